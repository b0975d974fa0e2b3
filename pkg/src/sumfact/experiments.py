"""Canned experiments behind the command-line interface.

Everything here is deterministic given (config, seed): solver runs on the
manufactured Poisson problem, refinement studies, matrix-free precision
profiles, and the analytical roofline points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discretization import (
    MeshHierarchy,
    apply_operator,
    assemble_rhs,
    build_hierarchy,
    h1_seminorm_error,
    l2_error,
    sine_product_problem,
)
from .gpu_model import (
    A100_CLOCK_GHZ,
    A100_PEAK_TFLOPS,
    A100_SMS,
    A100_VRAM_TBS,
    BANDWIDTH_NOTE,
    roofline,
    shared_bandwidth,
    vram_roofline,
)
from .krylov import fgmres, gmres
from .multigrid import MultigridPreconditioner, VCycleConfig
from .precision import PrecisionMode, relative_error
from .tensor import SeparableOperator, count_flops


@dataclass
class SolveOutcome:
    degree: int
    level: int
    mode: PrecisionMode
    solver: str
    dofs: int
    report: object
    l2: float
    h1: float


def laplacian_schedule(n: int) -> SeparableOperator:
    """Shape-only stand-in for the separable patch operator at size n."""
    eye = np.eye(n)
    return SeparableOperator(3, [(eye, eye, eye)] * 3)


def run_solve(
    degree: int,
    level: int,
    mode: PrecisionMode = PrecisionMode.FP64,
    solver: str = "fgmres",
    tol: float = 1e-8,
    maxit: int = 100,
    coarse_level: int = 1,
    pre_smooth: int = 1,
    post_smooth: int = 1,
    hier: MeshHierarchy | None = None,
) -> SolveOutcome:
    """Solve the manufactured Poisson problem with a V-cycle preconditioner."""
    if solver not in ("fgmres", "gmres"):
        raise ValueError(f"unknown solver {solver!r}")
    hier = hier or build_hierarchy(level, degree)
    prob = sine_product_problem(hier.dim)
    b = assemble_rhs(hier, level, prob.rhs)
    mg = MultigridPreconditioner(
        hier,
        VCycleConfig(
            pre_smooth_steps=pre_smooth,
            post_smooth_steps=post_smooth,
            coarse_level=coarse_level,
            mode=mode,
        ),
    )
    run = fgmres if solver == "fgmres" else gmres
    x, report = run(
        lambda v: apply_operator(hier, level, v),
        lambda v: mg.apply(v, level),
        b,
        tol=tol,
        maxit=maxit,
    )
    report.l2_error = l2_error(hier, level, x, prob.exact)
    report.h1_error = h1_seminorm_error(hier, level, x, prob.gradient)
    return SolveOutcome(
        degree=degree,
        level=level,
        mode=mode,
        solver=solver,
        dofs=hier.n_dofs(level),
        report=report,
        l2=report.l2_error,
        h1=report.h1_error,
    )


def convergence_study(degree: int, max_level: int, solver: str = "fgmres",
                      tol: float = 1e-8, maxit: int = 100) -> list[dict]:
    """Per-level errors and observed orders for the manufactured problem."""
    hier = build_hierarchy(max_level, degree)
    rows = []
    prev_l2 = None
    for level in hier.levels():
        out = run_solve(degree, level, solver=solver, tol=tol, maxit=maxit, hier=hier)
        rate = float(np.log2(prev_l2 / out.l2)) if prev_l2 else None
        rows.append(
            {
                "level": level,
                "h": hier.h(level),
                "dofs": out.dofs,
                "l2_error": out.l2,
                "h1_error": out.h1,
                "rate": rate,
                "iterations": out.report.iterations,
            }
        )
        prev_l2 = out.l2
    return rows


def error_profile(degree: int, max_level: int, modes, seed: int = 0) -> list[dict]:
    """Relative error of one operator apply against fp64, per size and mode."""
    hier = build_hierarchy(max_level, degree)
    rng = np.random.default_rng(seed)
    rows = []
    for level in hier.levels():
        u = rng.standard_normal(hier.n_dofs(level))
        ref = apply_operator(hier, level, u, PrecisionMode.FP64)
        for mode in modes:
            out = apply_operator(hier, level, u, mode)
            rows.append(
                {
                    "dofs": hier.n_dofs(level),
                    "level": level,
                    "mode": mode.value,
                    "relative_error": relative_error(out, ref),
                }
            )
    return rows


# published per-DoF operation counts for the size-16 patch evaluation,
# reported next to the computed numbers for comparison
PUBLISHED_FLOP_PER_DOF = {
    "fp64_scalar": 1738,
    "fp16_tensor": 1736,
    "fp16_tensor_ec": 5361,
}


def flops_report(n: int, variant: str, evaluation: str) -> dict:
    op = laplacian_schedule(n)
    report = count_flops(op, variant=variant, evaluation=evaluation)
    payload = report.as_dict()
    payload["n"] = n
    payload["variant"] = variant
    payload["evaluation"] = evaluation
    if n == 16 and evaluation == "patch":
        payload["published_references"] = dict(PUBLISHED_FLOP_PER_DOF)
        base = count_flops(op, variant="base", evaluation=evaluation)
        ec = count_flops(op, variant="error_corrected", evaluation=evaluation)
        payload["ec_over_base_ratio"] = ec.total_flops / base.total_flops
        payload["published_ec_over_base_ratio"] = (
            PUBLISHED_FLOP_PER_DOF["fp16_tensor_ec"] / PUBLISHED_FLOP_PER_DOF["fp16_tensor"]
        )
    return payload


_BYTES = {"fp64": 8, "fp32": 4, "fp16": 2, "fp16_ec": 2}


def roofline_points(sizes=(8, 16)) -> dict:
    """Analytical ceilings of the separable operator apply per precision.

    Traffic model per directional contraction of an n x n matrix with an
    n x n^2 tensor: read both operands, write the result, in the operand
    byte width (the corrected-half variant moves three operand pairs).
    """
    bw = shared_bandwidth(A100_SMS, 32, 4, A100_CLOCK_GHZ)
    points = []
    for n in sizes:
        op = laplacian_schedule(n)
        for prec, wb in _BYTES.items():
            variant = "error_corrected" if prec == "fp16_ec" else "base"
            rep = count_flops(op, variant=variant, evaluation="patch")
            n_contr = 3 * 3
            passes = 3 if prec == "fp16_ec" else 1
            bytes_read = n_contr * passes * (n * n + n**3) * wb
            bytes_written = n_contr * n**3 * 4  # accumulator width
            ai = rep.total_flops / (bytes_read + bytes_written)
            peak = A100_PEAK_TFLOPS["fp16" if prec.startswith("fp16") else prec]
            points.append(
                {
                    "kernel": f"{prec}-n{n}",
                    "n": n,
                    "precision": prec,
                    "flops_per_dof": float(rep.flops_per_dof),
                    "arithmetic_intensity": ai,
                    "shared_ceiling_tflops": roofline(bw, rep.total_flops,
                                                      bytes_read, bytes_written),
                    "vram_ceiling_tflops": vram_roofline(peak, A100_VRAM_TBS, ai),
                }
            )
    return {
        "shared_bandwidth_tbs": bw,
        "bandwidth_note": BANDWIDTH_NOTE,
        "vram_bandwidth_tbs": A100_VRAM_TBS,
        "peak_tflops": dict(A100_PEAK_TFLOPS),
        "points": points,
    }
