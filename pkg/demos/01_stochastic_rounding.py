"""Stochastic rounding: unbiased sub-byte codes out of float activations.

Walks through rounding a vector to 2-bit codes, the empirical unbiasedness
of the rounding, and the bit-packed storage format.
"""

import numpy as np

from actcomp import (
    QuantScheme,
    dequantize_row,
    make_rng,
    pack_codes,
    quantize_row,
    sr_uniform,
    unpack_codes,
)

rng = make_rng(0)

# --- rounding a single value many times -------------------------------------
h = 1.3
draws = sr_uniform(np.full(100_000, h), 3, rng)
print(f"rounding {h} onto {{0,1,2,3}}: P(code=1)={np.mean(draws == 1):.3f} "
      f"P(code=2)={np.mean(draws == 2):.3f}")
print(f"mean of draws = {draws.mean():.4f}  (unbiased: equals {h})")

# --- a full row: normalize, round, pack -------------------------------------
scheme = QuantScheme(bits=2)
row = rng.normal(size=12).astype(np.float32)
codes, z, r = quantize_row(row, scheme, rng)
print("\noriginal  :", np.round(row, 3))
print("codes     :", codes)
print(f"zero point: {z:.4f}  range: {r:.4f}")

packed = pack_codes(codes, bits=2)
print(f"packed    : {packed.hex()}  ({len(packed)} bytes for {codes.size} values)")
assert np.array_equal(unpack_codes(packed, 2, codes.size), codes)

back = dequantize_row(codes, z, r, scheme)
print("decoded   :", np.round(back, 3))
print(f"max error : {np.max(np.abs(back - row)):.4f}  (bounded by r/B = {r/3:.4f})")

# --- the estimate is unbiased element by element -----------------------------
acc = np.zeros(row.size)
n = 20_000
for _ in range(n):
    c, z, r = quantize_row(row, scheme, rng)
    acc += dequantize_row(c, z, r, scheme)
print(f"\nmean round-trip error over {n} draws: "
      f"{np.max(np.abs(acc / n - row)):.5f} (shrinks like 1/sqrt(draws))")
