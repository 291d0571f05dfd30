"""
Error decay with a growing number of classes
============================================

Three-dimensional features, one-dimensional classes.  The number of classes
grows as (1/sigma2)^(r/2); the fitted decay exponent is compared with the
conjectured curve.  Raise ``ENSEMBLES`` for tighter estimates.
"""

import numpy as np
from grasscap.bounds import DdtCurve, ddt_eval
from grasscap.experiments import SweepConfig, fit_slope, run_ddt_sweep

ENSEMBLES = 30
grid = np.logspace(-1, -4, 8)
gains = (0.0, 0.75, 1.5, 1.8)

cfg = SweepConfig("ddt_linear", tuple(grid), gains, n=3, m=3, k=1,
                  ensembles_per_point=ENSEMBLES, signals_per_ensemble=100, master_seed=1)
rows = run_ddt_sweep(cfg, threads=4)

for r in gains:
    sel = [row for row in rows if row.gain == r]
    print(f"r={r}:  L = {[row.l for row in sel]}")
    print("       p = " + " ".join(f"{row.estimate.p_hat:.4f}" for row in sel))
    d_hat, se = fit_slope(sel)
    print(f"       d_hat = {d_hat:.3f} +- {se:.3f}   conjecture {ddt_eval(DdtCurve('linear_conjecture', 3, 1), r):.3f}")

# affine classes decay faster at r = 0
aff = run_ddt_sweep(SweepConfig("ddt_affine", tuple(grid), (0.0,), ensembles_per_point=ENSEMBLES,
                                signals_per_ensemble=300, master_seed=1))
print("affine r=0: d_hat = %.3f (theory 2)" % fit_slope(aff)[0])
