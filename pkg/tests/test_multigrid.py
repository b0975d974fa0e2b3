"""Patch solver, smoother, transfers, coarse solve, V-cycle."""

import numpy as np
import pytest

from sipg_oracle import assemble_sipg_dense
from sumfact.discretization import apply_operator, build_hierarchy
from sumfact.multigrid import (
    MultigridPreconditioner,
    PatchSolver,
    VCycleConfig,
    default_ordering,
    patch_inverse_apply,
    prolongate,
    restrict,
)
from sumfact.precision import PrecisionMode


@pytest.fixture(scope="module")
def hier21():
    return build_hierarchy(2, 1)


@pytest.fixture(scope="module")
def mg21(hier21):
    return MultigridPreconditioner(hier21, VCycleConfig())


def kron_patch_operator(lm, kinds):
    """Dense patch operator for a kind combination (block-axis order)."""
    dim = len(kinds)
    mats = [lm.L_smooth[kind] for kind in kinds]
    total = 0.0
    for t in range(dim):
        term = None
        for b in range(dim):
            f = mats[b] if b == t else lm.M_patch
            term = f if term is None else np.kron(term, f)
        total = total + term
    return total


# ------------------------------------------------------------ patch solver


def test_patch_solver_diagonal_case():
    lam = np.array([1.0, 4.0, 9.0, 16.0])
    solver = PatchSolver(np.eye(4), {"d": np.diag(lam)})
    rng = np.random.default_rng(0)
    r = rng.standard_normal((4, 4, 4))
    e = solver.apply_single(r, ("d", "d", "d"))
    denom = lam[:, None, None] + lam[None, :, None] + lam[None, None, :]
    assert np.allclose(e, r / denom, atol=1e-12)


@pytest.mark.parametrize("k", [1, 2])
def test_patch_solver_matches_dense_lu(k):
    hier = build_hierarchy(2, k)
    lm = hier.matrices(2)
    solver = PatchSolver(lm.M_patch, lm.L_smooth)
    rng = np.random.default_rng(1)
    B = 2 * (k + 1)
    kind_values = [(False, False), (True, False), (False, True), (True, True)]
    for kinds in [(a, b, c) for a in kind_values for b in kind_values for c in kind_values][
        :: max(1, k * 7)
    ]:
        A = kron_patch_operator(lm, kinds)
        r = rng.standard_normal(B**3)
        e = patch_inverse_apply(solver, r.reshape((B,) * 3), kinds).reshape(-1)
        ref = np.linalg.solve(A, r)
        # dense Kronecker order: block axis 0 slowest = flat index order here
        assert np.linalg.norm(e - ref) / np.linalg.norm(ref) <= 1e-10


def test_patch_solver_inverts_patch_operator(hier21):
    lm = hier21.matrices(2)
    solver = PatchSolver(lm.M_patch, lm.L_smooth)
    kinds = ((True, False), (False, False), (False, True))
    A = kron_patch_operator(lm, kinds)
    rng = np.random.default_rng(2)
    w = rng.standard_normal(A.shape[0])
    r = A @ w
    e = solver.apply_single(r.reshape((4, 4, 4)), kinds).reshape(-1)
    assert np.linalg.norm(e - w) / np.linalg.norm(w) <= 1e-9


# --------------------------------------------------------------- smoother


def test_smooth_fixed_point_at_solution(mg21, hier21):
    rng = np.random.default_rng(3)
    x = rng.standard_normal(hier21.n_dofs(2))
    b = apply_operator(hier21, 2, x)
    out = mg21.smooth(2, x, b)
    assert np.allclose(out, x, atol=1e-10)


def test_single_patch_level_smoother_is_direct_solve():
    hier = build_hierarchy(1, 2)
    mg = MultigridPreconditioner(hier, VCycleConfig())
    rng = np.random.default_rng(4)
    b = rng.standard_normal(hier.n_dofs(1))
    x = mg.smooth(1, np.zeros_like(b), b)
    r = b - apply_operator(hier, 1, x)
    assert np.linalg.norm(r) <= 1e-9 * np.linalg.norm(b)


def test_smoothing_reduces_residual_monotonically(mg21, hier21):
    rng = np.random.default_rng(5)
    b = rng.standard_normal(hier21.n_dofs(2))
    x = np.zeros_like(b)
    norms = [np.linalg.norm(b)]
    for _ in range(4):
        x = mg21.smooth(2, x, b)
        norms.append(np.linalg.norm(b - apply_operator(hier21, 2, x)))
    assert all(n1 < n0 for n0, n1 in zip(norms, norms[1:]))


def test_smoother_deterministic(mg21, hier21):
    rng = np.random.default_rng(6)
    b = rng.standard_normal(hier21.n_dofs(2))
    x1 = mg21.smooth(2, np.zeros_like(b), b)
    x2 = mg21.smooth(2, np.zeros_like(b), b)
    assert np.array_equal(x1, x2)


def test_ordering_must_cover_all_shifts(hier21):
    with pytest.raises(ValueError, match="ordering"):
        MultigridPreconditioner(
            hier21, VCycleConfig(smoother_ordering=((0, 0, 0), (1, 1, 1)))
        )
    # any permutation of the full shift set is allowed
    order = tuple(reversed(default_ordering(3)))
    MultigridPreconditioner(hier21, VCycleConfig(smoother_ordering=order))


# --------------------------------------------------------------- transfers


def test_prolongation_reproduces_polynomials():
    hier = build_hierarchy(2, 3)
    rng = np.random.default_rng(7)
    coef = rng.standard_normal((4, 4, 4))

    def poly(x, y, z):
        px = np.polynomial.polynomial.polyval(x, coef[0, 0])
        return (
            np.polynomial.polynomial.polyval3d(x, y, z, coef)
            + 0.0 * px
        )

    from sumfact.discretization import interpolate

    coarse = interpolate(hier, 1, poly)
    fine = prolongate(hier, 1, coarse)
    assert np.allclose(fine, interpolate(hier, 2, poly), atol=1e-11)


def test_transfer_transpose_duality(hier21):
    rng = np.random.default_rng(8)
    e = rng.standard_normal(hier21.n_dofs(1))
    r = rng.standard_normal(hier21.n_dofs(2))
    lhs = prolongate(hier21, 1, e) @ r
    rhs = e @ restrict(hier21, 2, r)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_restrict_prolongate_gram_spd(hier21):
    n_c = hier21.n_dofs(1)
    G = np.empty((n_c, n_c))
    e = np.zeros(n_c)
    for j in range(n_c):
        e[j] = 1.0
        G[:, j] = restrict(hier21, 2, prolongate(hier21, 1, e))
        e[j] = 0.0
    assert np.allclose(G, G.T, atol=1e-12)
    assert np.linalg.eigvalsh(G).min() > 0


def test_transfer_modes_use_fp32_storage(hier21):
    r = np.ones(hier21.n_dofs(2))
    out = restrict(hier21, 2, r, PrecisionMode.FP16)
    assert out.dtype == np.float32
    e = np.ones(hier21.n_dofs(1))
    assert prolongate(hier21, 1, e, PrecisionMode.FP32).dtype == np.float32


# ------------------------------------------------------------ coarse solve


def test_coarse_solve_residual(mg21, hier21):
    rng = np.random.default_rng(9)
    b = rng.standard_normal(hier21.n_dofs(1))
    x = mg21.coarse_solve(b, PrecisionMode.FP64)
    r = b - apply_operator(hier21, 1, x)
    assert np.linalg.norm(r) <= 1e-10 * np.linalg.norm(b)


def test_coarse_solve_linear(mg21, hier21):
    rng = np.random.default_rng(10)
    b = rng.standard_normal(hier21.n_dofs(1))
    x1 = mg21.coarse_solve(b, PrecisionMode.FP64)
    x2 = mg21.coarse_solve(2.5 * b, PrecisionMode.FP64)
    assert np.allclose(x2, 2.5 * x1, rtol=1e-12)


def test_coarse_solve_matches_assembly_oracle(mg21, hier21):
    A_ref = assemble_sipg_dense(1, 1, 3)
    rng = np.random.default_rng(11)
    b = rng.standard_normal(hier21.n_dofs(1))
    x = mg21.coarse_solve(b, PrecisionMode.FP64)
    assert np.allclose(A_ref @ x, b, atol=1e-9 * np.linalg.norm(b))


def test_coarse_solve_low_precision_storage(mg21, hier21):
    b = np.ones(hier21.n_dofs(1))
    out = mg21.coarse_solve(b, PrecisionMode.FP16)
    assert out.dtype == np.float32


# ----------------------------------------------------------------- V-cycle


def test_vcycle_at_coarse_level_is_coarse_solve(mg21, hier21):
    rng = np.random.default_rng(12)
    b = rng.standard_normal(hier21.n_dofs(1))
    x_any = rng.standard_normal(hier21.n_dofs(1))
    out = mg21.vcycle(x_any, b, level=1)
    ref = mg21.coarse_solve(b, PrecisionMode.FP64)
    assert np.allclose(out, ref)


def test_vcycle_linear_in_rhs(mg21, hier21):
    rng = np.random.default_rng(13)
    b = rng.standard_normal(hier21.n_dofs(2))
    zero = np.zeros_like(b)
    y1 = mg21.vcycle(zero, b)
    y2 = mg21.vcycle(zero, 3.0 * b)
    assert np.allclose(y2, 3.0 * y1, rtol=1e-11, atol=1e-12)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_vcycle_error_contraction(k):
    hier = build_hierarchy(3, k)
    mg = MultigridPreconditioner(hier, VCycleConfig())
    rng = np.random.default_rng(14)
    ustar = rng.standard_normal(hier.n_dofs(3))
    b = apply_operator(hier, 3, ustar)
    x = np.zeros_like(b)
    e_prev = np.linalg.norm(x - ustar)
    for _ in range(2):
        x = mg.vcycle(x, b)
        e = np.linalg.norm(x - ustar)
        assert e <= 0.5 * e_prev
        e_prev = e


def test_vcycle_level_range_check(mg21):
    with pytest.raises(ValueError):
        mg21.vcycle(np.zeros(8), np.zeros(8), level=5)


def test_vcycle_low_precision_boundary_conversion(hier21):
    mg = MultigridPreconditioner(hier21, VCycleConfig(mode=PrecisionMode.FP16_EC))
    rng = np.random.default_rng(15)
    b = rng.standard_normal(hier21.n_dofs(2))
    out = mg.vcycle(np.zeros_like(b), b)
    assert out.dtype == np.float64  # converted back at exit
    # the cycle ran in fp32 storage: the result is fp32-representable
    assert np.array_equal(out, out.astype(np.float32).astype(np.float64))


def test_config_validation():
    with pytest.raises(ValueError):
        VCycleConfig(pre_smooth_steps=0)
    with pytest.raises(ValueError):
        VCycleConfig(coarse_level=0)
