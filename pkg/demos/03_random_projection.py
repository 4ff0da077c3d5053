"""Rademacher random projection: 8x narrower storage, unbiased recovery.

Projects a matrix down by a factor of 8, recovers it with the transpose,
and shows that averaging over projector seeds converges to the original.
"""

import numpy as np

from actcomp import RademacherProjector, make_rng, project, recover

rng = make_rng(2)
n, d, ratio = 6, 64, 8
r = d // ratio
h = rng.normal(size=(n, d)).astype(np.float32)

p = RademacherProjector(d_in=d, d_out=r, seed=7)
h_proj = project(h, p)
print(f"projected {h.shape} -> {h_proj.shape} (stored at 1/{ratio} the width)")
print(f"projector storage: just the 64-bit seed, matrix entries are +-1/sqrt({r})")

h_back = recover(h_proj, p)
err1 = float(np.mean((h_back - h) ** 2))
row_energy = float(np.mean(np.sum(h.astype(np.float64) ** 2, axis=1)))
print(f"\nsingle-seed recovery MSE : {err1:.3f}")
print(f"analytic prediction      : {row_energy * (d - 1) / d / r:.3f}  (row energy / R)")

for n_seeds in (1, 10, 100, 1000):
    acc = np.zeros(h.shape)
    for seed in range(n_seeds):
        ps = RademacherProjector(d_in=d, d_out=r, seed=seed)
        acc += recover(project(h, ps), ps).astype(np.float64)
    mse = float(np.mean((acc / n_seeds - h) ** 2))
    print(f"mean over {n_seeds:>4} seeds: MSE {mse:.4f}")
print("-> error shrinks like 1/seeds: the recovery is unbiased")
