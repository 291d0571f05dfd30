"""
Capacity and diversity-gain curves
==================================

Closed-form bounds need no simulation, so this is the quickest place to start.
"""

import numpy as np
from grasscap import bounds

# capacity bounds in bits per feature as the noise power falls
kappa = 0.25
for sigma2 in np.logspace(-1, -6, 6):
    lo, hi = bounds.c_linear_bounds(kappa, sigma2)
    alo, ahi = bounds.c_affine_bounds(kappa, sigma2)
    print(f"sigma2={sigma2:8.1e}  linear [{lo:6.3f}, {hi:6.3f}]  affine [{alo:6.3f}, {ahi:6.3f}]")

# diversity gain against discrimination gain for M=3, k=1
m, k = 3, 1
print("\n   r   lower  conj   upper  affine")
for r in np.linspace(0, m - k, 9):
    row = [bounds.ddt_eval(bounds.DdtCurve(kind, m, k), r) for kind in bounds.DdtKind]
    upper, lower, conj, affine = row
    print(f"{r:5.2f}  {lower:5.3f}  {conj:5.3f}  {upper:5.3f}  {affine:5.3f}")

# the smallest Wishart eigenvalue drives the linear lower bound
rng = np.random.default_rng(0)
x = rng.standard_normal((400, 100))
print("\nmin eig of W/M:", np.linalg.eigvalsh(x.T @ x / 400)[0], "limit:", bounds.wishart_min_eig_limit(0.25))
