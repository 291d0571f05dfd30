"""Random class ensembles, feature matrices and noisy observations.

Every draw takes an :class:`RngStream`, a small value type naming a
reproducible random stream by ``(master_seed, stream_id)`` plus an optional
path of sub-indices.  The same stream always yields the same numbers, so
work items can be scheduled in any order or on any number of threads.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np

__all__ = [
    "InvalidDimensionError",
    "RngStream",
    "SubspaceClass",
    "FeatureMatrix",
    "ScalingParams",
    "draw_linear_class",
    "draw_affine_class",
    "draw_feature_matrix",
    "sample_signal",
    "sample_signals",
    "num_classes_for",
    "dims_for",
]

_U64 = 2**64
ORTHONORMAL_TOL = 1e-10


class InvalidDimensionError(ValueError):
    """Raised when requested dimensions do not describe a valid instance."""


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream identified by a seed and stream id.

    ``path`` lets callers derive independent child streams, e.g. one per
    (grid point, ensemble, trial).  Generators are backed by Philox, a
    counter-based bit generator, keyed through ``numpy.random.SeedSequence``.
    """

    master_seed: int
    stream_id: int = 0
    path: Tuple[int, ...] = field(default=())

    def __post_init__(self):
        for v in (self.master_seed, self.stream_id, *self.path):
            if not (0 <= int(v) < _U64):
                raise ValueError(f"stream key component {v} outside 64-bit unsigned range")

    def substream(self, *indices: int) -> "RngStream":
        return RngStream(self.master_seed, self.stream_id, self.path + tuple(int(i) for i in indices))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=self.master_seed, spawn_key=(self.stream_id, *self.path))
        return np.random.Generator(np.random.Philox(seq))


RngLike = Union[RngStream, np.random.Generator]


def _gen(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


@dataclass(frozen=True, eq=False)
class SubspaceClass:
    """Class-conditional Gaussian N(mean, basis @ basis.T) in R^N.

    ``mean is None`` marks a linear (zero-mean) class.
    """

    basis: np.ndarray
    mean: Optional[np.ndarray] = None

    def __post_init__(self):
        basis = np.asarray(self.basis, dtype=float)
        if basis.ndim != 2:
            raise InvalidDimensionError("basis must be a 2-D array")
        n, k = basis.shape
        if not 1 <= k <= n:
            raise InvalidDimensionError(f"basis must satisfy 1 <= k <= N, got N={n}, k={k}")
        if not np.all(np.isfinite(basis)):
            raise ValueError("basis has non-finite entries")
        object.__setattr__(self, "basis", basis)
        if self.mean is not None:
            mean = np.asarray(self.mean, dtype=float)
            if mean.shape != (n,):
                raise InvalidDimensionError(f"mean must have length {n}, got shape {mean.shape}")
            if not np.all(np.isfinite(mean)):
                raise ValueError("mean has non-finite entries")
            object.__setattr__(self, "mean", mean)

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    @property
    def k(self) -> int:
        return self.basis.shape[1]

    @property
    def is_affine(self) -> bool:
        return self.mean is not None


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """M x N feature extractor with orthonormal rows."""

    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim != 2:
            raise InvalidDimensionError("feature matrix must be 2-D")
        m, n = rows.shape
        if not 1 <= m <= n:
            raise InvalidDimensionError(f"feature matrix needs 1 <= M <= N, got M={m}, N={n}")
        dev = np.max(np.abs(rows @ rows.T - np.eye(m)))
        if dev > ORTHONORMAL_TOL:
            raise ValueError(f"rows are not orthonormal (max deviation {dev:.3e})")
        object.__setattr__(self, "rows", rows)

    @classmethod
    def identity(cls, n: int) -> "FeatureMatrix":
        return cls(np.eye(n))

    @property
    def m(self) -> int:
        return self.rows.shape[0]

    @property
    def n(self) -> int:
        return self.rows.shape[1]


@dataclass(frozen=True)
class ScalingParams:
    """Dimension ratios and growth exponents.

    nu: N/M ratio (>= 1); kappa: k/M ratio in (0, 1); rho: classification
    rate in bits per feature; r: discrimination gain.
    """

    nu: float = 1.0
    kappa: float = 0.5
    rho: float = 0.0
    r: float = 0.0

    def __post_init__(self):
        vals = (self.nu, self.kappa, self.rho, self.r)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("scaling parameters must be finite")
        if self.nu < 1:
            raise ValueError(f"nu must be >= 1, got {self.nu}")
        if not 0 < self.kappa < 1:
            raise ValueError(f"kappa must lie in (0, 1), got {self.kappa}")
        if self.rho < 0 or self.r < 0:
            raise ValueError("rho and r must be nonnegative")


def _check_dims(n: int, k: int) -> None:
    if not 1 <= k <= n:
        raise InvalidDimensionError(f"need 1 <= k <= n, got n={n}, k={k}")


def draw_linear_class(n: int, k: int, rng: RngLike) -> SubspaceClass:
    """Basis with i.i.d. N(0, 1/k) entries, no mean."""
    _check_dims(n, k)
    g = _gen(rng)
    return SubspaceClass(g.standard_normal((n, k)) / math.sqrt(k))


def draw_affine_class(n: int, k: int, rng: RngLike) -> SubspaceClass:
    """As :func:`draw_linear_class`, plus a standard Gaussian mean vector."""
    _check_dims(n, k)
    g = _gen(rng)
    basis = g.standard_normal((n, k)) / math.sqrt(k)
    mean = g.standard_normal(n)
    return SubspaceClass(basis, mean)


def draw_feature_matrix(m: int, n: int, rng: RngLike) -> FeatureMatrix:
    """Haar-distributed M x N matrix with orthonormal rows.

    Orthonormalizes an N x M Gaussian matrix (QR with the sign fix that makes
    the result Haar) and transposes, so no N x N matrix is ever formed.
    """
    if not 1 <= m <= n:
        raise InvalidDimensionError(f"need 1 <= m <= n, got m={m}, n={n}")
    g = _gen(rng)
    q, r = np.linalg.qr(g.standard_normal((n, m)))
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return FeatureMatrix((q * signs).T)


def _check_signal_inputs(cls: SubspaceClass, phi: FeatureMatrix, sigma2: float) -> None:
    if cls.n != phi.n:
        raise InvalidDimensionError(f"class dimension {cls.n} does not match feature matrix N={phi.n}")
    if not (sigma2 > 0 and math.isfinite(sigma2)):
        raise ValueError(f"sigma2 must be positive and finite, got {sigma2}")


def sample_signals(cls: SubspaceClass, phi: FeatureMatrix, sigma2: float, count: int, rng: RngLike) -> np.ndarray:
    """``count`` observations y = Phi (U h + mu) + z, stacked as rows."""
    _check_signal_inputs(cls, phi, sigma2)
    g = _gen(rng)
    h = g.standard_normal((count, cls.k))
    z = g.standard_normal((count, phi.m)) * math.sqrt(sigma2)
    factor = phi.rows @ cls.basis
    y = h @ factor.T + z
    if cls.mean is not None:
        y += phi.rows @ cls.mean
    return y


def sample_signal(cls: SubspaceClass, phi: FeatureMatrix, sigma2: float, rng: RngLike) -> np.ndarray:
    """One noisy observation of a signal drawn from ``cls``."""
    return sample_signals(cls, phi, sigma2, 1, rng)[0]


def _floor(v: float) -> int:
    # floor that does not lose exact integers to rounding, e.g. (1/1e-4)**0.75
    nearest = round(v)
    if abs(v - nearest) <= 1e-9 * max(1.0, abs(v)):
        return int(nearest)
    return math.floor(v)


def num_classes_for(sigma2: float, r: float) -> int:
    """Class count max(1, floor((1/sigma2)^(r/2)))."""
    if not (sigma2 > 0 and math.isfinite(sigma2)):
        raise ValueError(f"sigma2 must be positive and finite, got {sigma2}")
    if r < 0:
        raise ValueError(f"r must be nonnegative, got {r}")
    return max(1, _floor((1.0 / sigma2) ** (r / 2.0)))


def dims_for(m: int, p: ScalingParams) -> Tuple[int, int, int]:
    """(N, k, L) for feature count ``m`` under the linear/exponential scaling laws.

    k is clamped to at least 1 and L to at least 2.  L must fit in a signed
    64-bit count; larger requests raise OverflowError.
    """
    if m < 1:
        raise InvalidDimensionError(f"m must be >= 1, got {m}")
    n = _floor(p.nu * m)
    k = max(1, _floor(p.kappa * m))
    exponent = p.rho * m
    if exponent >= 63:
        raise OverflowError(f"L = 2^{exponent:g} does not fit in a 64-bit count")
    l = max(2, _floor(2.0**exponent))
    return n, k, l
