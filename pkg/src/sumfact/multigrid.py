"""Geometric V-cycle with multiplicative vertex-patch smoothing.

The smoother sweeps all two-cell-per-axis vertex patches in 2^dim colored
sub-passes (one per tiling shift); within a color the patches are disjoint
and solved exactly through per-axis generalized eigendecompositions of the
patch matrices (stiffness against mass), so a local solve is d forward
transforms, a diagonal scaling by the inverse eigenvalue sums, and d
backward transforms.

Low-precision cycles keep every vector in fp32 storage; conversion to and
from fp64 happens only when a cycle is entered or left.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .discretization import MeshHierarchy, _gather, _scatter_add, apply_operator, \
    materialize_operator
from .precision import PrecisionMode, contract_mode, demote16, _ec_demote


def default_ordering(dim: int) -> tuple[tuple[int, ...], ...]:
    """Canonical colored sub-pass schedule: all tiling shifts, lexicographic."""
    return tuple(itertools.product((0, 1), repeat=dim))


@dataclass
class VCycleConfig:
    pre_smooth_steps: int = 1
    post_smooth_steps: int = 1
    coarse_level: int = 1
    mode: PrecisionMode = PrecisionMode.FP64
    smoother_ordering: tuple = None  # filled per-dimension when omitted

    def __post_init__(self):
        if self.pre_smooth_steps < 1 or self.post_smooth_steps < 1:
            raise ValueError("smoothing steps must be at least 1")
        if self.coarse_level < 1:
            raise ValueError("coarse level must be at least 1")


class PatchSolver:
    """Inverse of the separable patch operator via per-axis eigenpairs.

    For each boundary kind, solves L w = lambda M w; with the eigenvectors
    M-orthonormal the patch inverse is (x)V . diag(1/sum lambda) . (x)V^T.
    """

    def __init__(self, M: np.ndarray, L_by_kind: dict):
        self.eig = {}
        for kind, L in L_by_kind.items():
            lam, V = scipy.linalg.eigh(L, M)
            self.eig[kind] = (lam, V)

    def lambda_sum(self, kinds) -> np.ndarray:
        """Eigenvalue-sum tensor over block axes for one kind combination."""
        dim = len(kinds)
        total = np.zeros((1,) * dim)
        for d, kind in enumerate(kinds):
            lam = self.eig[kind][0]
            shape = [1] * dim
            shape[d] = len(lam)
            total = total + lam.reshape(shape)
        return total

    def apply_batch(self, w: np.ndarray, kinds, mode: PrecisionMode) -> np.ndarray:
        """Solve on a batch (counts..., block...) sharing one kind per axis."""
        dim = w.ndim // 2
        t = w
        for b in reversed(range(dim)):
            V = self.eig[kinds[b]][1]
            t = contract_mode(np.ascontiguousarray(V.T), t, dim + b, mode)
        denom = self.lambda_sum(kinds).astype(t.dtype)
        t = t / denom.reshape((1,) * dim + denom.shape)
        for b in reversed(range(dim)):
            V = self.eig[kinds[b]][1]
            t = contract_mode(V, t, dim + b, mode)
        return t

    def apply_single(self, r: np.ndarray, kinds,
                     mode: PrecisionMode = PrecisionMode.FP64) -> np.ndarray:
        """Solve one patch; ``r`` shaped (block,)*dim in numpy axis order."""
        w = r[(None,) * r.ndim]
        return self.apply_batch(w, kinds, mode)[(0,) * r.ndim]


def patch_inverse_apply(solver: PatchSolver, r: np.ndarray, kinds) -> np.ndarray:
    """Exact inverse of one patch operator applied to a local residual."""
    return solver.apply_single(np.asarray(r, dtype=np.float64), kinds)


def _axis_segments(count: int, shift: int, n_cells: int):
    """Split one axis of a tiling into runs of constant boundary kind."""
    if count < 1:
        return []
    first_is_left = shift == 0
    last_is_right = 2 * (count - 1) + shift + 2 == n_cells
    if count == 1:
        return [(slice(0, 1), (first_is_left, last_is_right))]
    segs = [(slice(0, 1), (first_is_left, False))]
    if count > 2:
        segs.append((slice(1, count - 1), (False, False)))
    segs.append((slice(count - 1, count), (False, last_is_right)))
    return segs


def restrict(hier: MeshHierarchy, level: int, r: np.ndarray,
             mode: PrecisionMode = PrecisionMode.FP64) -> np.ndarray:
    """Transfer a fine residual to level-1: transpose of the embedding."""
    dim = hier.dim
    K = hier.degree + 1
    pairs = hier.n_cells(level) // 2
    arr = np.asarray(r).reshape(hier.shape(level)).astype(mode.storage_dtype, copy=False)
    w = _gather(arr, (0,) * dim, (pairs,) * dim, 2 * K)
    Pt = np.ascontiguousarray(hier.embedding.T)
    for b in reversed(range(dim)):
        w = contract_mode(Pt, w, dim + b, mode)
    coarse = np.zeros(hier.shape(level - 1), dtype=w.dtype)
    _scatter_add(coarse, w, (0,) * dim, (pairs,) * dim, K)
    return coarse.reshape(-1)


def prolongate(hier: MeshHierarchy, coarse_level: int, e: np.ndarray,
               mode: PrecisionMode = PrecisionMode.FP64) -> np.ndarray:
    """Embed a coarse function into the next finer level (exact on polynomials)."""
    dim = hier.dim
    K = hier.degree + 1
    n_c = hier.n_cells(coarse_level)
    arr = np.asarray(e).reshape(hier.shape(coarse_level)).astype(
        mode.storage_dtype, copy=False
    )
    w = _gather(arr, (0,) * dim, (n_c,) * dim, K)
    P = np.ascontiguousarray(hier.embedding)
    for b in reversed(range(dim)):
        w = contract_mode(P, w, dim + b, mode)
    fine = np.zeros(hier.shape(coarse_level + 1), dtype=w.dtype)
    _scatter_add(fine, w, (0,) * dim, (n_c,) * dim, 2 * K)
    return fine.reshape(-1)


class MultigridPreconditioner:
    """V-cycle on a mesh hierarchy, usable as a right preconditioner."""

    def __init__(self, hier: MeshHierarchy, config: VCycleConfig | None = None):
        self.hier = hier
        self.config = config or VCycleConfig()
        if self.config.smoother_ordering is None:
            self.config.smoother_ordering = default_ordering(hier.dim)
        self._check_ordering()
        if self.config.coarse_level < hier.min_level:
            raise ValueError("coarse level below the hierarchy's minimum")
        self.solvers = {
            lvl: PatchSolver(hier.matrices(lvl).M_patch, hier.matrices(lvl).L_smooth)
            for lvl in hier.levels()
        }
        self._coarse_cache = {}

    def _check_ordering(self):
        expected = set(default_ordering(self.hier.dim))
        if set(self.config.smoother_ordering) != expected or len(
            self.config.smoother_ordering
        ) != len(expected):
            raise ValueError("smoother ordering must enumerate every tiling shift once")

    # ------------------------------------------------------------- smoother

    def smooth(self, level: int, x: np.ndarray, b: np.ndarray,
               mode: PrecisionMode | None = None) -> np.ndarray:
        """One multiplicative sweep: every vertex patch, color by color.

        The residual is refreshed before each colored sub-pass, so later
        colors see the updates of earlier ones.
        """
        mode = mode or self.config.mode
        hier = self.hier
        dim = hier.dim
        K = hier.degree + 1
        n = hier.n_cells(level)
        solver = self.solvers[level]
        x = np.asarray(x, dtype=mode.storage_dtype).reshape(hier.shape(level)).copy()
        b = np.asarray(b, dtype=mode.storage_dtype).reshape(-1)

        for shift in self.config.smoother_ordering:
            counts = tuple(n // 2 - shift[dim - 1 - d] for d in range(dim))
            if min(counts) < 1:
                continue
            starts = tuple(K * shift[dim - 1 - d] for d in range(dim))
            r = b - apply_operator(hier, level, x.reshape(-1), mode)
            w = _gather(r.reshape(hier.shape(level)), starts, counts, 2 * K)
            out = np.empty_like(w)
            seg_lists = [
                _axis_segments(counts[d], shift[dim - 1 - d], n) for d in range(dim)
            ]
            for combo in itertools.product(*seg_lists):
                idx = tuple(sl for sl, _ in combo) + (slice(None),) * dim
                kinds = tuple(kind for _, kind in combo)
                out[idx] = solver.apply_batch(w[idx], kinds, mode)
            _scatter_add(x, out, starts, counts, 2 * K)
        return x.reshape(-1)

    # ---------------------------------------------------------- coarse solve

    def _coarse_matrix(self) -> np.ndarray:
        if "dense" not in self._coarse_cache:
            self._coarse_cache["dense"] = materialize_operator(
                self.hier, self.config.coarse_level
            )
        return self._coarse_cache["dense"]

    def _coarse_factor(self, mode: PrecisionMode):
        if mode not in self._coarse_cache:
            A = self._coarse_matrix()
            if mode is PrecisionMode.FP64:
                Ad = A
            elif mode is PrecisionMode.FP32:
                Ad = A.astype(np.float32)
            elif mode is PrecisionMode.FP16:
                Ad = demote16(A.astype(np.float32))
            else:  # fp16_ec: operands reconstructed from the half pair
                main, resid = _ec_demote(A.astype(np.float32))
                Ad = main + resid / np.float32(2048)
            self._coarse_cache[mode] = scipy.linalg.lu_factor(Ad)
        return self._coarse_cache[mode]

    def coarse_solve(self, b: np.ndarray, mode: PrecisionMode | None = None) -> np.ndarray:
        """Direct dense solve at the coarse level, factored in the mode's
        accumulator precision with operands demoted per mode."""
        mode = mode or self.config.mode
        factor = self._coarse_factor(mode)
        bs = np.asarray(b, dtype=mode.storage_dtype)
        if mode is PrecisionMode.FP16:
            bs = demote16(bs)
        x = scipy.linalg.lu_solve(factor, bs.astype(factor[0].dtype))
        return x.astype(mode.storage_dtype)

    # -------------------------------------------------------------- V-cycle

    def _vcycle(self, level: int, x: np.ndarray, b: np.ndarray) -> np.ndarray:
        cfg = self.config
        if level == cfg.coarse_level:
            return self.coarse_solve(b)
        for _ in range(cfg.pre_smooth_steps):
            x = self.smooth(level, x, b)
        r = b - apply_operator(self.hier, level, x, cfg.mode)
        r_c = restrict(self.hier, level, r, cfg.mode)
        e = self._vcycle(level - 1, np.zeros_like(r_c), r_c)
        x = x + prolongate(self.hier, level - 1, e, cfg.mode)
        for _ in range(cfg.post_smooth_steps):
            x = self.smooth(level, x, b)
        return x

    def vcycle(self, x: np.ndarray, b: np.ndarray, level: int | None = None) -> np.ndarray:
        """Run one V-cycle; fp64 in, fp64 out, conversion only at this boundary."""
        level = self.hier.max_level if level is None else level
        if not self.hier.min_level <= level <= self.hier.max_level:
            raise ValueError(f"level {level} outside hierarchy range")
        dtype = self.config.mode.storage_dtype
        xs = np.asarray(x, dtype=dtype).copy()
        bs = np.asarray(b, dtype=dtype)
        out = self._vcycle(level, xs, bs)
        return out.astype(np.float64)

    def apply(self, b: np.ndarray, level: int | None = None) -> np.ndarray:
        """Preconditioner action: one V-cycle from a zero initial guess."""
        return self.vcycle(np.zeros_like(np.asarray(b, dtype=np.float64)), b, level)
