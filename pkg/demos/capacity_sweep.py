"""
Finite-dimensional view of the classification capacity
======================================================

N, k and L scale with M.  Below the capacity the error should shrink as M
grows; well above it the error stays put.  Points needing more than
``l_cap`` classes are reported as skipped.
"""

from grasscap.bounds import c_linear_bounds
from grasscap.ensemble import ScalingParams
from grasscap.experiments import SweepConfig, run_capacity_sweep

kappa, sigma2 = 0.25, 0.01
lo, hi = c_linear_bounds(kappa, sigma2)
print(f"capacity bounds at kappa={kappa}, sigma2={sigma2}: [{lo:.3f}, {hi:.3f}] bits/feature")

cfg = SweepConfig("capacity", (sigma2,), (0.1, 2.5), m_grid=(4, 8, 12, 16),
                  params=ScalingParams(nu=1.0, kappa=kappa), ensembles_per_point=40,
                  signals_per_ensemble=100, master_seed=5)
for row in run_capacity_sweep(cfg, threads=4):
    e = row.estimate
    if e is None:
        print(f"rho={row.gain} M={row.m}: skipped ({row.note})")
        continue
    print(f"rho={row.gain} M={row.m:2d} N={row.n:2d} k={row.k} L={row.l:6d}  "
          f"p={e.p_hat:.3f} [{e.ci_low:.3f}, {e.ci_high:.3f}]")
