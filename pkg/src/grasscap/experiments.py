"""Seeded Monte Carlo sweeps over noise power and feature count.

Randomness is keyed by position: ensemble ``e`` of grid point ``(i, j)`` draws
from ``RngStream(master_seed).substream(i, j, e, part)``.  Work items may run
on any number of threads and are merged in grid order, so outputs depend only
on the configuration.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .ensemble import (
    FeatureMatrix,
    RngLike,
    RngStream,
    ScalingParams,
    SubspaceClass,
    _gen,
    dims_for,
    draw_feature_matrix,
    num_classes_for,
)
from .estimates import ErrorEstimate
from .gauss_classifier import ClassBank, project_class

__all__ = [
    "SweepMode",
    "SweepConfig",
    "SweepRow",
    "InsufficientDataError",
    "estimate_error",
    "run_ddt_sweep",
    "run_capacity_sweep",
    "fit_slope",
    "MIN_SLOPE_ERRORS",
]

# rows with fewer observed errors are left out of slope fits
MIN_SLOPE_ERRORS = 10
DEFAULT_L_CAP = 100_000


class InsufficientDataError(ValueError):
    pass


class SweepMode(str, enum.Enum):
    DDT_LINEAR = "ddt_linear"
    DDT_AFFINE = "ddt_affine"
    CAPACITY = "capacity"


@dataclass(frozen=True)
class SweepConfig:
    """Parameters of one sweep.

    DDT modes use ``n, m, k`` with every (r, sigma2) in ``gains`` x
    ``sigma2_grid``.  Capacity mode uses ``params`` (nu, kappa) with every
    (rho, sigma2, M) in ``gains`` x ``sigma2_grid`` x ``m_grid``.
    """

    mode: SweepMode
    sigma2_grid: Tuple[float, ...]
    gains: Tuple[float, ...]
    n: int = 3
    m: int = 3
    k: int = 1
    m_grid: Tuple[int, ...] = ()
    params: ScalingParams = field(default_factory=ScalingParams)
    affine: bool = False
    ensembles_per_point: int = 100
    signals_per_ensemble: int = 100
    master_seed: int = 0
    l_cap: int = DEFAULT_L_CAP
    min_classes: int = 2

    def __post_init__(self):
        object.__setattr__(self, "mode", SweepMode(self.mode))
        object.__setattr__(self, "sigma2_grid", tuple(float(s) for s in self.sigma2_grid))
        object.__setattr__(self, "gains", tuple(float(g) for g in self.gains))
        object.__setattr__(self, "m_grid", tuple(int(m) for m in self.m_grid))
        if not self.sigma2_grid:
            raise ValueError("sigma2_grid must be non-empty")
        if any(not (s > 0 and math.isfinite(s)) for s in self.sigma2_grid):
            raise ValueError("sigma2_grid entries must be positive and finite")
        if not self.gains:
            raise ValueError("gains (r or rho list) must be non-empty")
        if any(g < 0 for g in self.gains):
            raise ValueError("gains must be nonnegative")
        if self.ensembles_per_point < 1 or self.signals_per_ensemble < 1:
            raise ValueError("ensembles_per_point and signals_per_ensemble must be >= 1")
        if self.l_cap < 1 or self.min_classes < 1:
            raise ValueError("l_cap and min_classes must be >= 1")
        if self.mode is SweepMode.CAPACITY:
            if not self.m_grid:
                raise ValueError("m_grid must be non-empty in capacity mode")
            if any(m < 1 for m in self.m_grid):
                raise ValueError("m_grid entries must be >= 1")
        elif not 1 <= self.k <= self.m <= self.n:
            raise ValueError(f"need 1 <= k <= m <= n, got n={self.n}, m={self.m}, k={self.k}")

    @property
    def family_affine(self) -> bool:
        return self.mode is SweepMode.DDT_AFFINE or (self.mode is SweepMode.CAPACITY and self.affine)


@dataclass(frozen=True)
class SweepRow:
    """One grid point of a sweep.  ``estimate`` is None for skipped points."""

    mode: str
    sigma2: float
    gain: float
    l: int
    m: int
    n: int
    k: int
    estimate: Optional[ErrorEstimate]
    master_seed: int
    note: str = ""


def _error_count(bank: ClassBank, g: np.ndarray, mu: Optional[np.ndarray], sigma2: float, signals: int,
                 gen: np.random.Generator) -> int:
    # g: (L, M, k) stacked factors, mu: (L, M) or None
    n_classes, m, k = g.shape
    labels = gen.integers(n_classes, size=signals)
    h = gen.standard_normal((signals, k))
    z = gen.standard_normal((signals, m)) * math.sqrt(sigma2)
    y = np.einsum("tmk,tk->tm", g[labels], h) + z
    if mu is not None:
        y += mu[labels]
    return int(np.count_nonzero(bank.classify(y) != labels))


def estimate_error(classes: Sequence[SubspaceClass], phi: FeatureMatrix, sigma2: float, signals: int,
                   rng: RngLike) -> ErrorEstimate:
    """Misclassification rate among ``classes`` with uniformly drawn true labels."""
    if len(classes) == 0:
        raise ValueError("need at least one class")
    if signals < 1:
        raise ValueError("signals must be >= 1")
    projected = [project_class(c, phi) for c in classes]
    if len({c.k for c in classes}) != 1:
        raise ValueError("all classes in an ensemble must share the subspace dimension k")
    bank = ClassBank(projected, sigma2)
    g = np.stack([p.factor for p in projected])
    mu = np.stack([p.proj_mean for p in projected]) if any(c.is_affine for c in classes) else None
    return ErrorEstimate.from_counts(_error_count(bank, g, mu, sigma2, signals, _gen(rng)), signals)


def _ensemble_errors(n: int, m: int, k: int, l: int, affine: bool, sigma2: float, signals: int,
                     stream: RngStream) -> int:
    gen = stream.substream(0).generator()
    phi = draw_feature_matrix(m, n, gen).rows
    bases = gen.standard_normal((l, n, k)) / math.sqrt(k)
    g = np.einsum("mn,lnk->lmk", phi, bases)
    mu = gen.standard_normal((l, n)) @ phi.T if affine else None
    bank = ClassBank.stacked(g, mu, sigma2)
    return _error_count(bank, g, mu, sigma2, signals, stream.substream(1).generator())


def _pooled(cfg: SweepConfig, n: int, m: int, k: int, l: int, sigma2: float, base: RngStream,
            pool: Optional[ThreadPoolExecutor]) -> ErrorEstimate:
    def job(e: int) -> int:
        return _ensemble_errors(n, m, k, l, cfg.family_affine, sigma2, cfg.signals_per_ensemble, base.substream(e))

    idx = range(cfg.ensembles_per_point)
    errors = sum(pool.map(job, idx)) if pool is not None else sum(map(job, idx))
    return ErrorEstimate.from_counts(errors, cfg.ensembles_per_point * cfg.signals_per_ensemble)


def _executor(threads: Optional[int]) -> Optional[ThreadPoolExecutor]:
    return ThreadPoolExecutor(threads) if threads and threads > 1 else None


def run_ddt_sweep(cfg: SweepConfig, threads: Optional[int] = None) -> List[SweepRow]:
    """Error rate at every (r, sigma2) with L = floor((1/sigma2)^(r/2)) classes.

    L below ``cfg.min_classes`` is raised to it (note ``l_clamped``); points
    with L above ``cfg.l_cap`` are skipped (note ``skipped_l_cap``).
    """
    if cfg.mode is SweepMode.CAPACITY:
        raise ValueError("run_ddt_sweep needs a ddt_linear or ddt_affine config")
    root = RngStream(cfg.master_seed)
    rows = []
    pool = _executor(threads)
    try:
        for i, r in enumerate(cfg.gains):
            for j, sigma2 in enumerate(cfg.sigma2_grid):
                l = num_classes_for(sigma2, r)
                note = ""
                if l < cfg.min_classes:
                    l, note = cfg.min_classes, "l_clamped"
                if l > cfg.l_cap:
                    rows.append(SweepRow(cfg.mode.value, sigma2, r, l, cfg.m, cfg.n, cfg.k, None,
                                         cfg.master_seed, "skipped_l_cap"))
                    continue
                est = _pooled(cfg, cfg.n, cfg.m, cfg.k, l, sigma2, root.substream(i, j), pool)
                rows.append(SweepRow(cfg.mode.value, sigma2, r, l, cfg.m, cfg.n, cfg.k, est, cfg.master_seed, note))
    finally:
        if pool is not None:
            pool.shutdown()
    return rows


def run_capacity_sweep(cfg: SweepConfig, threads: Optional[int] = None) -> List[SweepRow]:
    """Error rate at every (rho, sigma2, M) with (N, k, L) from the scaling laws."""
    if cfg.mode is not SweepMode.CAPACITY:
        raise ValueError("run_capacity_sweep needs a capacity config")
    root = RngStream(cfg.master_seed, stream_id=1)
    rows = []
    pool = _executor(threads)
    try:
        for i, rho in enumerate(cfg.gains):
            params = ScalingParams(cfg.params.nu, cfg.params.kappa, rho, cfg.params.r)
            for j, sigma2 in enumerate(cfg.sigma2_grid):
                for q, m in enumerate(cfg.m_grid):
                    try:
                        n, k, l = dims_for(m, params)
                    except OverflowError:
                        rows.append(SweepRow(cfg.mode.value, sigma2, rho, -1, m, math.floor(params.nu * m),
                                             max(1, math.floor(params.kappa * m)), None, cfg.master_seed,
                                             "skipped_overflow"))
                        continue
                    if l > cfg.l_cap:
                        rows.append(SweepRow(cfg.mode.value, sigma2, rho, l, m, n, k, None, cfg.master_seed,
                                             "skipped_l_cap"))
                        continue
                    est = _pooled(cfg, n, m, k, l, sigma2, root.substream(i, j, q), pool)
                    rows.append(SweepRow(cfg.mode.value, sigma2, rho, l, m, n, k, est, cfg.master_seed))
    finally:
        if pool is not None:
            pool.shutdown()
    return rows


def usable_for_slope(row: SweepRow) -> bool:
    est = row.estimate
    return est is not None and 0 < est.p_hat < 1 and est.errors >= MIN_SLOPE_ERRORS


def fit_slope(rows: Iterable[SweepRow]) -> Tuple[float, float]:
    """Diversity-gain estimate: minus the OLS slope of log2 p_hat on 1/2 log2(1/sigma2).

    Returns (d_hat, standard error of the slope).  Rows without an estimate,
    with p_hat in {0, 1}, or with fewer than ``MIN_SLOPE_ERRORS`` errors are
    ignored.
    """
    usable = [r for r in rows if usable_for_slope(r)]
    if len(usable) < 3:
        raise InsufficientDataError(f"need >= 3 usable rows for a slope fit, got {len(usable)}")
    x = np.array([0.5 * math.log2(1 / r.sigma2) for r in usable])
    y = np.array([math.log2(r.estimate.p_hat) for r in usable])
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0:
        raise InsufficientDataError("slope fit needs at least two distinct sigma2 values")
    slope = float(xc @ (y - y.mean())) / sxx
    resid = y - y.mean() - slope * xc
    dof = len(usable) - 2
    stderr = math.sqrt(float(resid @ resid) / dof / sxx) if dof > 0 else 0.0
    return -slope, stderr
