"""Compiled contraction kernel versus the pure-numpy fallback."""

import os
import subprocess
import sys

import numpy as np
import pytest

from sumfact._core import HAVE_COMPILED, contract_batch, fallback

needs_compiled = pytest.mark.skipif(not HAVE_COMPILED, reason="extension not built")


def reference_loop(m, u3):
    # literal ascending-k accumulation, the semantics both backends promise
    outer, n, inner = u3.shape
    rows = m.shape[0]
    out = np.zeros((outer, rows, inner), dtype=u3.dtype)
    for o in range(outer):
        for i in range(rows):
            acc = np.zeros(inner, dtype=u3.dtype)
            for k in range(n):
                acc = acc + m[i, k] * u3[o, k]
            out[o, i] = acc
    return out


@needs_compiled
@pytest.mark.parametrize("dtype", [np.float64, np.float32])
def test_compiled_matches_reference_loop_bitwise(dtype):
    from sumfact._core import _contract

    rng = np.random.default_rng(0)
    u = rng.standard_normal((3, 5, 7)).astype(dtype)
    m = rng.standard_normal((4, 5)).astype(dtype)
    out = np.empty((3, 4, 7), dtype=dtype)
    kern = _contract.contract_f8 if dtype == np.float64 else _contract.contract_f4
    kern(u, m, out)
    assert np.array_equal(out, reference_loop(m, u))


@pytest.mark.parametrize("dtype", [np.float64, np.float32])
def test_fallback_close_to_reference_loop(dtype):
    rng = np.random.default_rng(1)
    u = rng.standard_normal((2, 6, 5)).astype(dtype)
    m = rng.standard_normal((6, 6)).astype(dtype)
    out = np.empty((2, 6, 5), dtype=dtype)
    fallback.contract_f8(u, m, out) if dtype == np.float64 else fallback.contract_f4(
        u, m, out
    )
    ref = reference_loop(m, u)
    tol = 1e-14 if dtype == np.float64 else 1e-5
    assert np.allclose(out, ref, rtol=tol, atol=tol)


@needs_compiled
@pytest.mark.parametrize("dtype", [np.float64, np.float32])
def test_backends_agree(dtype):
    rng = np.random.default_rng(2)
    for shape, rows in [((4, 8, 64), 8), ((27, 16, 256), 16), ((1, 3, 2), 5)]:
        u = rng.standard_normal(shape).astype(dtype)
        m = rng.standard_normal((rows, shape[1])).astype(dtype)
        a = np.empty((shape[0], rows, shape[2]), dtype=dtype)
        b = np.empty_like(a)
        from sumfact._core import _contract

        (_contract.contract_f8 if dtype == np.float64 else _contract.contract_f4)(u, m, a)
        (fallback.contract_f8 if dtype == np.float64 else fallback.contract_f4)(u, m, b)
        tol = 1e-13 if dtype == np.float64 else 1e-4
        ref = np.linalg.norm(a.astype(np.float64))
        assert np.linalg.norm((a - b).astype(np.float64)) <= tol * ref


def test_contract_batch_validation():
    u = np.zeros((2, 3, 4))
    with pytest.raises(TypeError):
        contract_batch(np.zeros((3, 3), np.float32), u, 1)
    with pytest.raises(ValueError):
        contract_batch(np.zeros((3, 5)), u, 1)
    with pytest.raises(IndexError):
        contract_batch(np.zeros((3, 3)), u, 3)
    with pytest.raises(ValueError):
        contract_batch(np.zeros(3), u, 1)
    with pytest.raises(TypeError):
        contract_batch(np.zeros((3, 3), np.int64), u.astype(np.int64), 1)


def test_contract_batch_arbitrary_axis():
    rng = np.random.default_rng(3)
    u = rng.standard_normal((2, 3, 4, 5))
    m = rng.standard_normal((7, 3))
    out = contract_batch(m, u, 1)
    assert out.shape == (2, 7, 4, 5)
    assert np.allclose(out, np.einsum("ik,akbc->aibc", m, u))


def test_env_variable_forces_fallback():
    code = (
        "from sumfact._core import HAVE_COMPILED; "
        "import sys; sys.exit(0 if not HAVE_COMPILED else 1)"
    )
    env = dict(os.environ, SUMFACT_PURE_PYTHON="1")
    proc = subprocess.run([sys.executable, "-c", code], env=env)
    assert proc.returncode == 0
