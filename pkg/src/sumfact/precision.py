"""Software binary16, residual error correction, and precision-tagged kernels.

The conversion routines here are bit-level (sign/exponent/mantissa
arithmetic on integer views) with round-to-nearest-even and full
subnormal support.  Hot loops demote through numpy's native float16
cast instead; the test suite pins the two routes to bit-exact agreement
so the fast path inherits the semantics of the reference one.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._core import contract_batch
from .tensor import TensorField, contract_dir

HALF_MAX = 65504.0
EC_SCALE = 2048  # 2**11, fixed rescale of the residual half

_QNAN16 = np.uint16(0x7E00)


class HalfRangeError(ValueError):
    """Value cannot be represented by the main+residual half pair."""


class PrecisionMode(Enum):
    FP64 = "fp64"
    FP32 = "fp32"
    FP16 = "fp16"
    FP16_EC = "fp16_ec"

    @property
    def storage_dtype(self):
        """Vector storage inside low-precision pipelines (fp32 except fp64)."""
        return np.float64 if self is PrecisionMode.FP64 else np.float32

    @property
    def accumulate_dtype(self):
        """Accumulator: fp64 for the fp64 mode, fp32 for everything else."""
        return np.float64 if self is PrecisionMode.FP64 else np.float32

    @classmethod
    def parse(cls, name: str) -> "PrecisionMode":
        key = name.strip().lower().replace("-", "_")
        aliases = {"fp16ec": "fp16_ec", "half": "fp16", "double": "fp64", "single": "fp32"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown precision mode {name!r}") from None


# ------------------------------------------------------------------ softfloat


def to_half(x) -> np.ndarray | np.uint16:
    """Convert fp32 value(s) to binary16 bit patterns, rounding to nearest even.

    Subnormal results are produced exactly; magnitudes that round above
    the largest finite half become infinity; NaN maps to the canonical
    quiet NaN (sign preserved).
    """
    x32 = np.asarray(x, dtype=np.float32)
    scalar = x32.ndim == 0
    x32 = np.atleast_1d(x32)
    bits = x32.view(np.uint32)

    sign = ((bits >> np.uint32(16)) & np.uint32(0x8000)).astype(np.uint16)
    absb = bits & np.uint32(0x7FFFFFFF)
    exp = (absb >> np.uint32(23)).astype(np.int64)
    mant = (absb & np.uint32(0x7FFFFF)).astype(np.int64)
    out = np.zeros(x32.shape, dtype=np.uint16)

    nan = absb > np.uint32(0x7F800000)
    inf = absb == np.uint32(0x7F800000)
    # biased half exponent; >= 31 overflows even before rounding
    h_exp = exp - 112
    big = (~nan) & (~inf) & (h_exp >= 31)
    normal = (~nan) & (~inf) & (h_exp >= 1) & (h_exp <= 30)
    small = (~nan) & (~inf) & (h_exp <= 0) & (exp > 0)
    # exp == 0 covers fp32 zeros and subnormals, all far below half range

    # normal range: drop 13 mantissa bits with round-to-nearest-even;
    # the carry may overflow into the exponent and produce infinity
    val = (h_exp << 10) | (mant >> 13)
    rem = mant & 0x1FFF
    round_up = (rem > 0x1000) | ((rem == 0x1000) & ((val & 1) == 1))
    val = np.where(round_up, val + 1, val)
    out[normal] = val[normal].astype(np.uint16)

    # subnormal range: significand counted in units of 2^-24
    significand = mant | 0x800000
    shift = np.minimum(126 - exp, 25)
    keep = significand >> shift
    half_point = np.int64(1) << (shift - 1)
    rem_s = significand & ((np.int64(1) << shift) - 1)
    round_up_s = (rem_s > half_point) | ((rem_s == half_point) & ((keep & 1) == 1))
    keep = np.where(round_up_s, keep + 1, keep)
    out[small] = keep[small].astype(np.uint16)

    out[big | inf] = np.uint16(0x7C00)
    out |= sign
    out[nan] = _QNAN16 | sign[nan]
    return out[0] if scalar else out


def from_half(h) -> np.ndarray | np.float32:
    """Exact fp32 value(s) of binary16 bit patterns."""
    bits = np.atleast_1d(np.asarray(h, dtype=np.uint16))
    scalar = np.asarray(h).ndim == 0
    sign = np.where((bits >> np.uint16(15)) & np.uint16(1), -1.0, 1.0)
    exp = ((bits >> np.uint16(10)) & np.uint16(0x1F)).astype(np.int64)
    mant = (bits & np.uint16(0x3FF)).astype(np.float64)

    value = np.empty(bits.shape, dtype=np.float64)
    sub = exp == 0
    value[sub] = mant[sub] * 2.0**-24
    norm = (exp > 0) & (exp < 31)
    value[norm] = (1.0 + mant[norm] / 1024.0) * np.exp2(exp[norm] - 15.0)
    special = exp == 31
    value[special] = np.where(mant[special] == 0, np.inf, np.nan)
    out = (sign * value).astype(np.float32)
    return out[0] if scalar else out


def demote16(x) -> np.ndarray:
    """Round fp32 value(s) through binary16 and return them as fp32.

    Fast path via numpy's native half cast; bit-equivalent to
    from_half(to_half(x)).  Out-of-range magnitudes become inf.
    """
    with np.errstate(over="ignore"):
        return np.asarray(x, dtype=np.float32).astype(np.float16).astype(np.float32)


# ------------------------------------------------------------ error correction


@dataclass
class EcPair:
    """Main half plus residual half scaled by 2^11 representing fp32 data."""

    main: np.ndarray  # uint16 bit patterns
    residual: np.ndarray
    scale: int = EC_SCALE

    def reconstruct(self) -> np.ndarray:
        m = from_half(self.main).astype(np.float32)
        r = from_half(self.residual).astype(np.float32)
        return m + r / np.float32(self.scale)


def ec_split(x) -> EcPair:
    """Split fp32 value(s) into a main half and a 2^11-scaled residual half."""
    x32 = np.asarray(x, dtype=np.float32)
    if np.any(np.abs(x32[np.isfinite(x32)]) > HALF_MAX) or not np.all(np.isfinite(x32)):
        raise HalfRangeError("values outside the correctable half range")
    main = to_half(x32)
    resid_source = (x32 - from_half(main)) * np.float32(EC_SCALE)
    residual = to_half(resid_source)
    return EcPair(main=np.atleast_1d(main), residual=np.atleast_1d(residual))


def _ec_demote(x32: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # fast-path split used inside kernels: both parts as half-valued fp32
    with np.errstate(over="ignore"):
        main = x32.astype(np.float16)
        main32 = main.astype(np.float32)
        resid = ((x32 - main32) * np.float32(EC_SCALE)).astype(np.float16)
        return main32, resid.astype(np.float32)


def ec_matmul(A: EcPair, B: EcPair, refine: str = "both") -> np.ndarray:
    """Residual-corrected matrix product with fp32 accumulation.

    Each partial product uses binary16 operands (a single half*half
    product is exact in fp32, so rounding happens only in the
    accumulation); the correction term is rescaled and added in fp32.
    ``refine`` selects which operands contribute corrections: "both"
    (default), "left", or "right".
    """
    if refine not in ("both", "left", "right"):
        raise ValueError(f"unknown refinement choice {refine!r}")
    a = from_half(A.main).astype(np.float32)
    da = from_half(A.residual).astype(np.float32)
    b = from_half(B.main).astype(np.float32)
    db = from_half(B.residual).astype(np.float32)
    if a.shape[-1] != b.shape[0]:
        raise ValueError(f"shape mismatch: {a.shape} @ {b.shape}")
    p_main = np.einsum("ik,kj->ij", a, b)
    corr = np.zeros_like(p_main)
    if refine in ("both", "left"):
        corr += np.einsum("ik,kj->ij", da, b)
    if refine in ("both", "right"):
        corr += np.einsum("ik,kj->ij", a, db)
    return p_main + corr / np.float32(EC_SCALE)


# ----------------------------------------------------- precision-tagged kernels


def contract_mode(m: np.ndarray, u: np.ndarray, axis: int, mode: PrecisionMode) -> np.ndarray:
    """Contract numpy ``axis`` of ``u`` with ``m`` under a precision mode.

    fp64: double operands and accumulation.  fp32: single throughout.
    fp16: operands rounded to binary16, products exact in fp32,
    accumulation in fp32.  fp16_ec: three half products combined with the
    rescaled residual correction, all sums in fp32.
    """
    if mode is PrecisionMode.FP64:
        return contract_batch(
            np.asarray(m, dtype=np.float64), np.asarray(u, dtype=np.float64), axis
        )
    m32 = np.asarray(m, dtype=np.float32)
    u32 = np.asarray(u, dtype=np.float32)
    if mode is PrecisionMode.FP32:
        return contract_batch(m32, u32, axis)
    if mode is PrecisionMode.FP16:
        return contract_batch(demote16(m32), demote16(u32), axis)
    if mode is PrecisionMode.FP16_EC:
        mh, dm = _ec_demote(m32)
        uh, du = _ec_demote(u32)
        main = contract_batch(mh, uh, axis)
        corr = contract_batch(dm, uh, axis) + contract_batch(mh, du, axis)
        return main + corr / np.float32(EC_SCALE)
    raise ValueError(f"unsupported mode {mode}")


def contract_dir_prec(
    M: np.ndarray, u: TensorField, axis: int, mode: PrecisionMode
) -> TensorField:
    """Directional contraction of a tensor field under a precision mode.

    The fp64 mode routes through the same kernel as the reference
    contraction and is bitwise identical to it.
    """
    if mode is PrecisionMode.FP64:
        return contract_dir(M, u, axis)
    M = np.asarray(M)
    if not 0 <= axis < u.dim:
        raise IndexError(f"axis {axis} out of range for dim {u.dim}")
    if M.ndim != 2 or M.shape[1] != u.extents[axis]:
        from .tensor import ContractionMismatch

        raise ContractionMismatch(
            f"matrix {M.shape} cannot contract axis {axis} of extent {u.extents[axis]}"
        )
    arr = u.as_array()
    out = contract_mode(M, arr, u.dim - 1 - axis, mode)
    return TensorField.from_array(out)


def relative_error(v_low, v_ref) -> float:
    """Relative l2 distance of a low-precision vector from its reference."""
    v_low = np.asarray(v_low, dtype=np.float64).ravel()
    v_ref = np.asarray(v_ref, dtype=np.float64).ravel()
    if v_low.shape != v_ref.shape:
        raise ValueError("vectors must have equal length")
    ref_norm = float(np.linalg.norm(v_ref))
    if ref_norm == 0.0:
        raise ValueError("reference vector has zero norm")
    return float(np.linalg.norm(v_low - v_ref) / ref_norm)
