#!/usr/bin/env python3
"""Compiled contraction kernel versus the pure-numpy fallback.

Times the batched directional contraction on the shapes the solver
actually runs (two-cell patches at degrees 1, 3 and 7, batch sizes of a
level-3/4 mesh), plus one full operator apply through each backend.

Run after an editable install:  python3 benchmarks/bench_contract.py
"""

import os
import time

import numpy as np

from sumfact._core import fallback

try:
    from sumfact._core import _contract as compiled
except ImportError:
    compiled = None


def time_backend(fn, u, m, out, reps):
    best = np.inf
    for _ in range(reps):
        t0 = time.perf_counter()
        fn(u, m, out)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels():
    rng = np.random.default_rng(0)
    cases = [
        ("k=1 patches, level 4", (4096, 4, 16), 4),
        ("k=3 patches, level 3", (64, 8, 64), 8),
        ("k=3 patches, level 4", (512, 8, 64), 8),
        ("k=7 patches, level 3", (512, 16, 256), 16),
    ]
    print(f"{'case':24s} {'dtype':8s} {'numpy':>10s} {'compiled':>10s} {'speedup':>8s}")
    for label, shape, rows in cases:
        for dtype in (np.float64, np.float32):
            u = rng.standard_normal(shape).astype(dtype)
            m = rng.standard_normal((rows, shape[1])).astype(dtype)
            out = np.empty((shape[0], rows, shape[2]), dtype=dtype)
            f_fb = fallback.contract_f8 if dtype == np.float64 else fallback.contract_f4
            t_fb = time_backend(f_fb, u, m, out, reps=20)
            if compiled is not None:
                f_c = (
                    compiled.contract_f8 if dtype == np.float64 else compiled.contract_f4
                )
                t_c = time_backend(f_c, u, m, out, reps=20)
                ratio = f"{t_fb / t_c:7.2f}x"
                t_c_s = f"{t_c * 1e3:8.3f}ms"
            else:
                ratio, t_c_s = "    n/a", "     n/a"
            print(
                f"{label:24s} {np.dtype(dtype).name:8s} {t_fb * 1e3:8.3f}ms "
                f"{t_c_s} {ratio}"
            )


def bench_operator():
    # end-to-end apply through whichever backend is active, then the other
    # one in a subprocess would be needed; here we just report the active one
    from sumfact._core import HAVE_COMPILED
    from sumfact.discretization import apply_operator, build_hierarchy

    hier = build_hierarchy(4, 3)
    u = np.random.default_rng(1).standard_normal(hier.n_dofs(4))
    apply_operator(hier, 4, u)  # warm up
    t0 = time.perf_counter()
    reps = 5
    for _ in range(reps):
        apply_operator(hier, 4, u)
    dt = (time.perf_counter() - t0) / reps
    backend = "compiled" if HAVE_COMPILED else "numpy fallback"
    dofs = hier.n_dofs(4)
    print(
        f"\noperator apply (k=3, level 4, {dofs} DoFs) via {backend}: "
        f"{dt * 1e3:.1f} ms, {dofs / dt / 1e6:.1f} MDoF/s"
    )
    print("set SUMFACT_PURE_PYTHON=1 to force the fallback backend")


if __name__ == "__main__":
    if os.environ.get("SUMFACT_PURE_PYTHON"):
        print("note: SUMFACT_PURE_PYTHON is set; package-level calls use the fallback")
    bench_kernels()
    bench_operator()
