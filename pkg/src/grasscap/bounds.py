"""Closed-form bounds: Bhattacharyya error bound, capacity bounds, DDT curves.

Capacities are in bits per feature.  DDT curves give the diversity gain d(r),
the exponent of error decay in (1/sigma2)^{1/2}, when the number of classes
grows as (1/sigma2)^{r/2}.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .gauss_classifier import ProjectedClass

__all__ = [
    "GaussianPair",
    "DdtKind",
    "DdtCurve",
    "bhattacharyya_distance",
    "bhattacharyya_bound",
    "c_linear_bounds",
    "c_affine_bounds",
    "ddt_eval",
    "wishart_min_eig_limit",
    "predicted_classes",
]

SYMMETRY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class GaussianPair:
    mean1: np.ndarray
    cov1: np.ndarray
    mean2: np.ndarray
    cov2: np.ndarray

    def __post_init__(self):
        for name in ("mean1", "mean2", "cov1", "cov2"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        m = self.mean1.shape[0]
        if self.mean1.shape != (m,) or self.mean2.shape != (m,):
            raise ValueError("means must be vectors of equal length")
        for cov in (self.cov1, self.cov2):
            if cov.shape != (m, m):
                raise ValueError(f"covariances must be {m} x {m}")
            if np.max(np.abs(cov - cov.T)) > SYMMETRY_TOL:
                raise ValueError("covariance is not symmetric")

    @classmethod
    def from_projected(cls, a: ProjectedClass, b: ProjectedClass, sigma2: float) -> "GaussianPair":
        return cls(a.proj_mean, a.covariance(sigma2), b.proj_mean, b.covariance(sigma2))


def _chol(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("covariance is not positive definite") from exc


def _logdet(chol: np.ndarray) -> float:
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


def bhattacharyya_distance(p: GaussianPair) -> float:
    """Bhattacharyya distance between two Gaussians, with log-determinants from Cholesky factors."""
    l1, l2 = _chol(p.cov1), _chol(p.cov2)
    avg = 0.5 * (p.cov1 + p.cov2)
    la = _chol(avg)
    det_term = 0.5 * (_logdet(la) - 0.5 * _logdet(l1) - 0.5 * _logdet(l2))
    diff = p.mean1 - p.mean2
    z = np.linalg.solve(la, diff)
    # the log-det term is >= 0 in exact arithmetic; clip rounding noise
    return max(0.0, det_term) + 0.125 * float(z @ z)


def bhattacharyya_bound(p: GaussianPair) -> float:
    """Upper bound 1/2 exp(-B) on the equal-prior ML pairwise error."""
    return 0.5 * math.exp(-bhattacharyya_distance(p))


def _check_capacity_args(kappa: float, sigma2: float) -> None:
    if not 0 < kappa < 1:
        raise ValueError(f"kappa must lie in (0, 1), got {kappa}")
    if not (sigma2 > 0 and math.isfinite(sigma2)):
        raise ValueError(f"sigma2 must be positive and finite, got {sigma2}")


def _capacity_upper(kappa: float, sigma2: float, signal_power: float) -> float:
    return (
        (1 - kappa) / 2 * math.log2(1 / sigma2)
        + 0.5 * math.log2(signal_power + sigma2)
        - kappa / 2 * math.log2((math.sqrt(1 / kappa) - 1) ** 2 + sigma2)
    )


def c_linear_bounds(kappa: float, sigma2: float) -> Tuple[float, float]:
    """(lower, upper) on the linear-subspace classification capacity.

    The lower bound is returned unclamped and goes negative for large sigma2.
    """
    _check_capacity_args(kappa, sigma2)
    gap = (math.sqrt(1 / (2 * kappa)) - 1) ** 2
    lower = min(kappa, 1 - kappa) / 2 * math.log2(1 + gap / sigma2) - kappa / 2
    return lower, _capacity_upper(kappa, sigma2, 1.0)


def c_affine_bounds(kappa: float, sigma2: float) -> Tuple[float, float]:
    """(lower, upper) on the affine-subspace classification capacity."""
    _check_capacity_args(kappa, sigma2)
    gap = (math.sqrt(1 / (2 * kappa)) - 1) ** 2
    if kappa < 0.5:
        gap = min(gap, 0.5)
    lower = (1 - kappa) / 2 * math.log2(1 + gap / sigma2) - kappa / 2
    return lower, _capacity_upper(kappa, sigma2, 2.0)


class DdtKind(str, enum.Enum):
    LINEAR_UPPER = "linear_upper"
    LINEAR_LOWER = "linear_lower"
    LINEAR_CONJECTURE = "linear_conjecture"
    AFFINE = "affine"


@dataclass(frozen=True)
class DdtCurve:
    kind: DdtKind
    m: int
    k: int

    def __post_init__(self):
        object.__setattr__(self, "kind", DdtKind(self.kind))
        if not 1 <= self.k < self.m:
            raise ValueError(f"DDT curves need 1 <= k < M, got M={self.m}, k={self.k}")


def ddt_eval(curve: DdtCurve, r: float) -> float:
    """Diversity gain of the named curve at discrimination gain ``r``."""
    if r < 0:
        raise ValueError(f"r must be nonnegative, got {r}")
    m, k = curve.m, curve.k
    if curve.kind is DdtKind.LINEAR_UPPER:
        d = min(m - k - r, k * (1 - r / m))
    elif curve.kind is DdtKind.LINEAR_LOWER:
        d = min(m - k, k) - r
    elif curve.kind is DdtKind.LINEAR_CONJECTURE:
        d = min(m - k, k) * max(0.0, 1 - r / (m - k))
    else:
        d = m - k - r
    return max(0.0, float(d))


def wishart_min_eig_limit(kappa: float) -> float:
    """Almost-sure limit of the smallest eigenvalue of W/M, W ~ Wishart_k(M, I), k/M -> kappa."""
    if not 0 < kappa <= 1:
        raise ValueError(f"kappa must lie in (0, 1], got {kappa}")
    return (1 - math.sqrt(kappa)) ** 2


def predicted_classes(sigma2: float, m: int, k_model: int = 9, l_max: int = 38) -> int:
    """Number of classes predicted discriminable at noise power ``sigma2`` with ``m`` features.

    max(1, min(floor((1/sigma2)^((m - k_model)/2)), l_max)); the defaults
    are the face-recognition constants (9-dimensional faces, 38 subjects).
    """
    if not (sigma2 > 0 and math.isfinite(sigma2)):
        raise ValueError(f"sigma2 must be positive and finite, got {sigma2}")
    if m < 1 or l_max < 1:
        raise ValueError("m and l_max must be >= 1")
    log_count = (m - k_model) / 2 * math.log(1 / sigma2)
    if log_count >= math.log(l_max):
        return int(l_max)
    count = math.floor(math.exp(log_count) * (1 + 1e-12))
    return max(1, min(count, int(l_max)))
