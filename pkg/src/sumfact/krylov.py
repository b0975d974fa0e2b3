"""Right-preconditioned GMRES and its flexible variant.

Both run the outer iteration in fp64 with modified Gram-Schmidt (one
selective re-orthogonalization pass) and no restarting.  The flexible
solver stores the preconditioned basis so the preconditioner may change
every iteration; the standard solver applies one fixed preconditioner to
the combined basis vector at the end, which is exact only when the
preconditioner is a fixed linear map.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

_REORTH_FACTOR = 1.0 / np.sqrt(2.0)


@dataclass
class SolveReport:
    iterations: int
    residual_history: list
    final_relative_residual: float
    wall_time: float
    converged: bool
    breakdown: bool = False
    l2_error: float | None = None
    h1_error: float | None = None
    bases: tuple | None = field(default=None, repr=False)

    def as_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "residual_history": [float(r) for r in self.residual_history],
            "final_relative_residual": self.final_relative_residual,
            "wall_time": self.wall_time,
            "converged": self.converged,
            "l2_error": self.l2_error,
            "h1_error": self.h1_error,
        }


def _identity(v):
    return v


def _gmres_driver(apply_A, apply_M, b, tol, maxit, flexible, collect_bases):
    t0 = time.perf_counter()
    b = np.asarray(b, dtype=np.float64)
    n = b.size
    beta = float(np.linalg.norm(b))
    if beta == 0.0:
        return np.zeros(n), SolveReport(0, [0.0], 0.0, time.perf_counter() - t0, True)

    V = [b / beta]
    Z = []
    H = np.zeros((maxit + 1, maxit))
    cs = np.zeros(maxit)
    sn = np.zeros(maxit)
    g = np.zeros(maxit + 1)
    g[0] = beta
    history = [beta]
    breakdown = False
    j = -1

    for j in range(maxit):
        z = apply_M(V[j])
        if flexible:
            Z.append(np.asarray(z, dtype=np.float64))
        w = np.asarray(apply_A(z), dtype=np.float64)
        norm_before = float(np.linalg.norm(w))
        for i in range(j + 1):
            H[i, j] = V[i] @ w
            w = w - H[i, j] * V[i]
        h_next = float(np.linalg.norm(w))
        if h_next < _REORTH_FACTOR * norm_before:
            # severe cancellation: one extra Gram-Schmidt pass
            for i in range(j + 1):
                c = V[i] @ w
                H[i, j] += c
                w = w - c * V[i]
            h_next = float(np.linalg.norm(w))
        H[j + 1, j] = h_next

        # rotate the new column into triangular form
        for i in range(j):
            hij = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
            H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
            H[i, j] = hij
        denom = np.hypot(H[j, j], H[j + 1, j])
        cs[j] = H[j, j] / denom if denom else 1.0
        sn[j] = H[j + 1, j] / denom if denom else 0.0
        H[j, j] = denom
        H[j + 1, j] = 0.0
        g[j + 1] = -sn[j] * g[j]
        g[j] = cs[j] * g[j]
        history.append(abs(g[j + 1]))

        if abs(g[j + 1]) / beta <= tol:
            break
        if h_next <= 1e-14 * max(norm_before, 1.0):
            breakdown = True  # invariant subspace found: solution is exact
            break
        V.append(w / h_next)

    m = j + 1
    y = np.zeros(m)
    for i in range(m - 1, -1, -1):
        y[i] = (g[i] - H[i, i + 1 : m] @ y[i + 1 : m]) / H[i, i]
    if flexible:
        x = np.zeros(n)
        for i in range(m):
            x += y[i] * Z[i]
    else:
        combined = np.zeros(n)
        for i in range(m):
            combined += y[i] * V[i]
        x = np.asarray(apply_M(combined), dtype=np.float64)

    final_rel = history[-1] / beta
    report = SolveReport(
        iterations=m,
        residual_history=history,
        final_relative_residual=final_rel,
        wall_time=time.perf_counter() - t0,
        converged=bool(final_rel <= tol),
        breakdown=breakdown,
    )
    if collect_bases:
        report.bases = (
            np.column_stack(V),
            H[: m + 1, :m].copy(),
            np.column_stack(Z) if flexible else None,
        )
    return x, report


def fgmres(apply_A, apply_M=None, b=None, tol=1e-8, maxit=100, collect_bases=False):
    """Flexible GMRES; the preconditioner may differ on every call.

    Solves A x = b from a zero initial guess until the residual norm has
    dropped by ``tol`` relative to ``b`` or ``maxit`` iterations are
    reached.  Returns (x, SolveReport).
    """
    if b is None:
        raise ValueError("right-hand side is required")
    if not 0.0 < tol < 1.0:
        raise ValueError("tol must lie in (0, 1)")
    return _gmres_driver(apply_A, apply_M or _identity, b, tol, maxit, True, collect_bases)


def gmres(apply_A, apply_M=None, b=None, tol=1e-8, maxit=100, collect_bases=False):
    """Right-preconditioned GMRES with one fixed preconditioner.

    Identical Arnoldi process to fgmres, but the solution is recovered by
    applying the preconditioner once to the combined basis vector, which
    assumes the preconditioner is a fixed linear operator.
    """
    if b is None:
        raise ValueError("right-hand side is required")
    if not 0.0 < tol < 1.0:
        raise ValueError("tol must lie in (0, 1)")
    return _gmres_driver(apply_A, apply_M or _identity, b, tol, maxit, False, collect_bases)
