#!/usr/bin/env python3
"""Generate the binary16 conversion reference vectors.

Writes tests/data/half_reference.txt: one "f32hex f16hex" pair per line,
produced by numpy's native IEEE-754 conversions (independent of the
package's bit-level implementation).  Covers normals, subnormals, exact
ties, the overflow boundary, and special values.
"""

import pathlib

import numpy as np


def main():
    rng = np.random.default_rng(20240127)
    cases = []

    def add(values):
        cases.append(np.asarray(values, dtype=np.float32))

    # special values and overflow boundary
    add([0.0, -0.0, 1.0, -1.0, 2.0, 0.5, np.inf, -np.inf, np.nan, -np.nan])
    add([65504.0, 65504.01, 65519.0, 65519.99, 65520.0, 65521.0, 65536.0, 1e30, -65520.0])
    add([6.1035156e-5, 6.0975552e-5, 5.9604645e-8, 2.9802322e-8, 2.98023224e-8 * 0.99, 1e-40])

    # every integer exactly representable in binary16
    add(np.arange(0, 2049, dtype=np.float32))
    add(-np.arange(1, 2049, dtype=np.float32))

    # exact midpoints between consecutive halves: the tie-breaking cases
    h = rng.integers(1, 0x7BFF, size=3000, dtype=np.uint16).astype(np.uint16)
    lo = h.view(np.float16).astype(np.float32)
    hi = (h + 1).view(np.float16).astype(np.float32)
    add((lo.astype(np.float64) + hi.astype(np.float64)) / 2.0)

    # random normals across the half range, both signs
    mag = np.exp(rng.uniform(np.log(1e-4), np.log(6.0e4), size=6000))
    add((rng.choice([-1.0, 1.0], size=6000) * mag))

    # random values that land in the subnormal half range
    add(rng.uniform(-6.1e-5, 6.1e-5, size=3000))

    # random fp32 bit patterns (finite only)
    bits = rng.integers(0, 2**32, size=4000, dtype=np.uint64).astype(np.uint32)
    x = bits.view(np.float32)
    add(x[np.isfinite(x)])

    allx = np.concatenate(cases).astype(np.float32)
    f16 = allx.astype(np.float16)

    out = pathlib.Path(__file__).resolve().parents[1] / "tests" / "data" / "half_reference.txt"
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w") as fh:
        fh.write("# fp32_bits_hex fp16_bits_hex (IEEE 754 round-to-nearest-even)\n")
        for x32, x16 in zip(allx.view(np.uint32), f16.view(np.uint16)):
            fh.write(f"{x32:08x} {x16:04x}\n")
    print(f"wrote {len(allx)} cases to {out}")


if __name__ == "__main__":
    main()
