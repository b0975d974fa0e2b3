"""Batch experiment driver.

Non-interactive subcommands that run one experiment each and emit a CSV
or JSON report with the configuration embedded.  Exit codes: 0 success,
2 usage error, 3 numerical non-convergence (the report is still written).

Set SUMFACT_THREADS to pin the BLAS thread count of the few dense
factorizations; the contraction kernels are single-threaded either way,
so reports do not depend on it.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

from . import __version__
from .experiments import (
    convergence_study,
    error_profile,
    flops_report,
    roofline_points,
    run_solve,
)
from .gpu_model import BANK_SCENARIOS, bank_scenario
from .precision import PrecisionMode

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NO_CONVERGENCE = 3


def _fmt(value):
    if isinstance(value, float):
        return format(value, ".17g")
    if value is None:
        return ""
    return str(value)


def _config_dict(args) -> dict:
    skip = {"func", "out"}  # the destination is not part of the experiment
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def write_report(args, columns, rows, notes=None):
    """Render rows as CSV (comment-prefixed provenance) or JSON."""
    config = _config_dict(args)
    if args.format == "json":
        payload = {
            "version": __version__,
            "config": config,
            "columns": list(columns),
            "rows": rows,
        }
        if notes:
            payload["notes"] = notes
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    else:
        buf = io.StringIO()
        buf.write(f"# version: {__version__}\n")
        buf.write(f"# config: {json.dumps(config, sort_keys=True)}\n")
        for note in notes or []:
            buf.write(f"# note: {note}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in columns])
        text = buf.getvalue()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _parse_modes(spec: str):
    return [PrecisionMode.parse(s) for s in spec.split(",") if s.strip()]


# ------------------------------------------------------------- subcommands


def cmd_solve(args) -> int:
    from .discretization import build_hierarchy

    modes = _parse_modes(args.precision)
    outcomes = []
    hier = build_hierarchy(args.levels, args.k)
    for mode in modes:
        out = run_solve(
            args.k,
            args.levels,
            mode=mode,
            solver=args.solver,
            tol=args.tol,
            maxit=args.maxit,
            coarse_level=args.coarse_level,
            pre_smooth=args.pre_smooth,
            post_smooth=args.post_smooth,
            hier=hier,
        )
        outcomes.append(out)
    base_time = next(
        (o.report.wall_time for o in outcomes if o.mode is PrecisionMode.FP64), None
    )
    rows = []
    for o in outcomes:
        wall = 0.0 if args.no_timing else o.report.wall_time
        speedup = None
        if base_time and o.mode is not PrecisionMode.FP64 and not args.no_timing:
            speedup = base_time / o.report.wall_time
        rows.append(
            {
                "precision": o.mode.value,
                "time_s": wall,
                "iterations": o.report.iterations,
                "l2_error": o.l2,
                "h1_error": o.h1,
                "speedup_vs_fp64": speedup,
                "converged": o.report.converged,
                "dofs": o.dofs,
            }
        )
    write_report(
        args,
        ["precision", "time_s", "iterations", "l2_error", "h1_error",
         "speedup_vs_fp64", "converged", "dofs"],
        rows,
    )
    return EXIT_OK if all(o.report.converged for o in outcomes) else EXIT_NO_CONVERGENCE


def cmd_convergence(args) -> int:
    rows = convergence_study(args.k, args.levels, solver=args.solver,
                             tol=args.tol, maxit=args.maxit)
    write_report(
        args,
        ["level", "h", "dofs", "l2_error", "h1_error", "rate", "iterations"],
        rows,
    )
    return EXIT_OK


def cmd_error_profile(args) -> int:
    modes = _parse_modes(args.precision)
    rows = error_profile(args.k, args.levels, modes, seed=args.seed)
    write_report(args, ["dofs", "level", "mode", "relative_error"], rows)
    return EXIT_OK


def cmd_residuals(args) -> int:
    modes = _parse_modes(args.precision)
    hier = None
    rows = []
    for mode in modes:
        out = run_solve(args.k, args.levels, mode=mode, solver=args.solver,
                        tol=args.tol, maxit=args.maxit, hier=hier)
        for it, res in enumerate(out.report.residual_history):
            rows.append(
                {
                    "precision": mode.value,
                    "iteration": it,
                    "residual": res,
                    "relative_residual": res / out.report.residual_history[0],
                }
            )
    write_report(
        args, ["precision", "iteration", "residual", "relative_residual"], rows
    )
    return EXIT_OK


def cmd_bank_sim(args) -> int:
    names = BANK_SCENARIOS if args.scenario == "all" else (args.scenario,)
    rows = []
    for name in names:
        for report in bank_scenario(name):
            per_phase = report.phase_wavefronts
            summary = (
                "1 per phase"
                if all(w == 1 for w in per_phase)
                else ",".join(str(w) for w in per_phase)
            )
            rows.append(
                {
                    "scenario": name,
                    "fragment": report.pattern,
                    "layout": report.layout,
                    "phases": len(per_phase),
                    "wavefronts": summary,
                    "conflict": report.has_conflict,
                }
            )
    write_report(
        args,
        ["scenario", "fragment", "layout", "phases", "wavefronts", "conflict"],
        rows,
    )
    return EXIT_OK


def cmd_roofline(args) -> int:
    payload = roofline_points()
    rows = payload.pop("points")
    notes = [payload.pop("bandwidth_note")]
    for key, val in sorted(payload.items()):
        notes.append(f"{key}: {json.dumps(val, sort_keys=True)}")
    write_report(
        args,
        ["kernel", "n", "precision", "flops_per_dof", "arithmetic_intensity",
         "shared_ceiling_tflops", "vram_ceiling_tflops"],
        rows,
        notes=notes,
    )
    return EXIT_OK


def cmd_flops(args) -> int:
    variants = ("base", "error_corrected") if args.variant == "both" else (args.variant,)
    rows = []
    notes = []
    for variant in variants:
        payload = flops_report(args.n, variant, args.evaluation)
        refs = payload.pop("published_references", None)
        ratio = payload.pop("ec_over_base_ratio", None)
        pub_ratio = payload.pop("published_ec_over_base_ratio", None)
        payload["breakdown"] = json.dumps(payload["breakdown"], sort_keys=True)
        rows.append(payload)
        if refs and not notes:
            notes.append(f"published flop/DoF values: {json.dumps(refs, sort_keys=True)}")
            if ratio is not None:
                notes.append(
                    f"corrected/base flop ratio: computed {ratio:.4f}, "
                    f"published {pub_ratio:.4f}"
                )
    write_report(
        args,
        ["n", "variant", "evaluation", "total_flops", "dofs", "flops_per_dof",
         "flops_per_dof_exact", "overlap_multiplicity", "breakdown"],
        rows,
        notes=notes,
    )
    return EXIT_OK


# ------------------------------------------------------------------ parser


def _add_common(p):
    p.add_argument("--out", default=None, help="output file (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--seed", type=int, default=0)


def _add_solver_options(p, default_precision):
    p.add_argument("--k", type=int, default=3, help="polynomial degree")
    p.add_argument("--levels", type=int, default=3, help="finest refinement level")
    p.add_argument("--precision", default=default_precision,
                   help="comma list of fp64,fp32,fp16,fp16_ec")
    p.add_argument("--solver", choices=("fgmres", "gmres"), default="fgmres")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--maxit", type=int, default=100)
    p.add_argument("--coarse-level", type=int, default=1)
    p.add_argument("--pre-smooth", type=int, default=1)
    p.add_argument("--post-smooth", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sumfact",
        description="matrix-free tensor-product operator laboratory",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="preconditioned solve of the model problem")
    _add_solver_options(p, "fp64")
    p.add_argument("--no-timing", action="store_true",
                   help="zero the machine-dependent timing columns")
    _add_common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("convergence", help="refinement study with rates")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--solver", choices=("fgmres", "gmres"), default="fgmres")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--maxit", type=int, default=100)
    _add_common(p)
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("error-profile", help="operator-apply precision sweep")
    p.add_argument("--k", type=int, default=7, help="degree (7 gives size-16 patches)")
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--precision", default="fp32,fp16,fp16_ec")
    _add_common(p)
    p.set_defaults(func=cmd_error_profile)

    p = sub.add_parser("residuals", help="per-iteration residual histories")
    _add_solver_options(p, "fp64,fp32,fp16_ec")
    _add_common(p)
    p.set_defaults(func=cmd_residuals)

    p = sub.add_parser("bank-sim", help="shared-memory wavefront simulation")
    p.add_argument("--scenario", default="all",
                   choices=BANK_SCENARIOS + ("all",))
    _add_common(p)
    p.set_defaults(func=cmd_bank_sim)

    p = sub.add_parser("roofline", help="analytical performance ceilings")
    _add_common(p)
    p.set_defaults(func=cmd_roofline)

    p = sub.add_parser("flops", help="operation counting for one operator apply")
    p.add_argument("--n", type=int, default=16, help="1D matrix dimension")
    p.add_argument("--variant", choices=("base", "error_corrected", "both"),
                   default="both")
    p.add_argument("--evaluation", choices=("cell", "patch"), default="patch")
    _add_common(p)
    p.set_defaults(func=cmd_flops)
    return parser


def main(argv=None) -> int:
    threads = os.environ.get("SUMFACT_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
