"""Numerical core: batched axis contractions.

At import time the compiled Cython kernel is preferred; the pure-numpy
fallback is selected when the extension is missing or when the
``SUMFACT_PURE_PYTHON`` environment variable is set (any non-empty value).
"""

import os

import numpy as np

if os.environ.get("SUMFACT_PURE_PYTHON"):
    from . import fallback as _impl

    HAVE_COMPILED = False
else:
    try:
        from . import _contract as _impl  # type: ignore[attr-defined]

        HAVE_COMPILED = True
    except ImportError:
        from . import fallback as _impl

        HAVE_COMPILED = False


def contract_batch(m: np.ndarray, u: np.ndarray, axis: int) -> np.ndarray:
    """Contract ``axis`` of ``u`` with the matrix ``m``.

    out[..., i, ...] = sum_k m[i, k] * u[..., k, ...] along the given
    numpy axis.  ``m`` and ``u`` must share one float dtype (float32 or
    float64); the output has the same dtype.
    """
    if m.dtype != u.dtype:
        raise TypeError(f"dtype mismatch: {m.dtype} vs {u.dtype}")
    if m.ndim != 2:
        raise ValueError("matrix operand must be 2-dimensional")
    axis = int(axis)
    if not 0 <= axis < u.ndim:
        raise IndexError(f"axis {axis} out of range for {u.ndim}-d operand")
    if m.shape[1] != u.shape[axis]:
        raise ValueError(
            f"cannot contract axis of extent {u.shape[axis]} with "
            f"{m.shape[0]}x{m.shape[1]} matrix"
        )
    u = np.ascontiguousarray(u)
    m = np.ascontiguousarray(m)
    outer = int(np.prod(u.shape[:axis], dtype=np.int64))
    inner = int(np.prod(u.shape[axis + 1 :], dtype=np.int64))
    u3 = u.reshape(outer, u.shape[axis], inner)
    out_shape = u.shape[:axis] + (m.shape[0],) + u.shape[axis + 1 :]
    out = np.empty((outer, m.shape[0], inner), dtype=u.dtype)
    if u.dtype == np.float64:
        _impl.contract_f8(u3, m, out)
    elif u.dtype == np.float32:
        _impl.contract_f4(u3, m, out)
    else:
        raise TypeError(f"unsupported dtype {u.dtype}")
    return out.reshape(out_shape)
