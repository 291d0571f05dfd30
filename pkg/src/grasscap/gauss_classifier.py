"""Maximum-likelihood classification among low-rank-plus-noise Gaussians.

Each class in feature space is N(Phi mu, G G^T + sigma2 I) with G = Phi U of
shape M x k.  Likelihoods are evaluated through the k x k core
C = sigma2 I_k + G^T G:

    log|Sigma|        = (M - k) log sigma2 + log|C|
    d^T Sigma^{-1} d  = ||d - G v||^2 / sigma2 + ||v||^2,   v = C^{-1} G^T d

The second line is the Woodbury identity rearranged into a sum of
nonnegative terms, which avoids cancellation when y sits close to a class
subspace and sigma2 is small.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .ensemble import FeatureMatrix, InvalidDimensionError, RngStream, SubspaceClass, sample_signals
from .estimates import ErrorEstimate

__all__ = [
    "ProjectedClass",
    "ClassificationResult",
    "ClassBank",
    "project_class",
    "log_likelihood",
    "log_likelihoods",
    "classify",
    "classify_batch",
    "pairwise_error_mc",
]

LOG_2PI = math.log(2 * math.pi)
# relative log-likelihood gap below which two classes count as tied
TIE_RTOL = 1e-12
# bound on the T x L x M intermediate built per chunk
_CHUNK_ELEMS = 1 << 22
MC_BLOCK = 1024


@dataclass(frozen=True, eq=False)
class ProjectedClass:
    """A class as seen through the feature matrix: factor G = Phi U and mean Phi mu."""

    factor: np.ndarray
    proj_mean: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.factor, dtype=float)
        mu = np.asarray(self.proj_mean, dtype=float)
        if g.ndim != 2 or g.shape[0] < 1 or g.shape[1] < 1:
            raise InvalidDimensionError(f"factor must be M x k with M, k >= 1, got {g.shape}")
        if mu.shape != (g.shape[0],):
            raise InvalidDimensionError(f"proj_mean must have length {g.shape[0]}")
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(mu))):
            raise ValueError("projected class has non-finite entries")
        object.__setattr__(self, "factor", g)
        object.__setattr__(self, "proj_mean", mu)

    @property
    def m(self) -> int:
        return self.factor.shape[0]

    @property
    def k(self) -> int:
        return self.factor.shape[1]

    def covariance(self, sigma2: float) -> np.ndarray:
        return self.factor @ self.factor.T + sigma2 * np.eye(self.m)


@dataclass(frozen=True)
class ClassificationResult:
    chosen: int
    loglik: np.ndarray


def project_class(cls: SubspaceClass, phi: FeatureMatrix) -> ProjectedClass:
    if cls.n != phi.n:
        raise InvalidDimensionError(f"class dimension {cls.n} does not match feature matrix N={phi.n}")
    mean = np.zeros(phi.m) if cls.mean is None else phi.rows @ cls.mean
    return ProjectedClass(phi.rows @ cls.basis, mean)


def _check_sigma2(sigma2: float) -> None:
    if not (sigma2 > 0 and math.isfinite(sigma2)):
        raise ValueError(f"sigma2 must be positive and finite, got {sigma2}")


class ClassBank:
    """Per-class factorizations for repeated likelihood evaluation.

    Classes sharing the same rank k are stacked so one batched pass scores
    every observation against every class.
    """

    def __init__(self, classes: Sequence[ProjectedClass], sigma2: float):
        if len(classes) == 0:
            raise ValueError("need at least one class")
        _check_sigma2(sigma2)
        m = classes[0].m
        if any(c.m != m for c in classes):
            raise InvalidDimensionError("all classes must share the feature dimension M")
        self.m = m
        self.sigma2 = float(sigma2)
        self.size = len(classes)
        self._groups = []
        for k in sorted({c.k for c in classes}):
            idx = np.array([i for i, c in enumerate(classes) if c.k == k])
            g = np.stack([classes[i].factor for i in idx])
            mu = np.stack([classes[i].proj_mean for i in idx])
            self._groups.append(self._factorize(idx, g, mu))

    @classmethod
    def stacked(cls, factors: np.ndarray, means: Optional[np.ndarray], sigma2: float) -> "ClassBank":
        """Bank from factors of shape (L, M, k) and means (L, M) or None for zero means."""
        _check_sigma2(sigma2)
        factors = np.asarray(factors, dtype=float)
        if factors.ndim != 3 or min(factors.shape) < 1:
            raise InvalidDimensionError(f"factors must have shape (L, M, k), got {factors.shape}")
        n_classes, m, _ = factors.shape
        means = np.zeros((n_classes, m)) if means is None else np.asarray(means, dtype=float)
        if means.shape != (n_classes, m):
            raise InvalidDimensionError(f"means must have shape {(n_classes, m)}")
        bank = cls.__new__(cls)
        bank.m, bank.sigma2, bank.size = m, float(sigma2), n_classes
        bank._groups = [bank._factorize(np.arange(n_classes), factors, means)]
        return bank

    def _factorize(self, idx, g, mu):
        m, k = g.shape[1], g.shape[2]
        core = np.einsum("lmi,lmj->lij", g, g) + self.sigma2 * np.eye(k)
        chol = np.linalg.cholesky(core)
        chol_inv = np.linalg.inv(chol)
        core_inv = np.einsum("lji,ljk->lik", chol_inv, chol_inv)
        logdet = (m - k) * math.log(self.sigma2) + 2 * np.log(np.diagonal(chol, axis1=1, axis2=2)).sum(axis=1)
        const = -0.5 * (m * LOG_2PI + logdet)
        return idx, g, mu, core_inv, const

    def loglik(self, y: np.ndarray) -> np.ndarray:
        """Log-likelihoods, shape (T, L), for observations stacked as rows of ``y``."""
        y = np.atleast_2d(np.asarray(y, dtype=float))
        if y.shape[1] != self.m:
            raise InvalidDimensionError(f"observations must have length {self.m}")
        if not np.all(np.isfinite(y)):
            raise ValueError("observation has non-finite entries")
        out = np.empty((y.shape[0], self.size))
        for idx, g, mu, core_inv, const in self._groups:
            per_row = len(idx) * max(self.m, g.shape[2])
            step = max(1, _CHUNK_ELEMS // per_row)
            for s in range(0, y.shape[0], step):
                d = y[s : s + step, None, :] - mu[None, :, :]
                w = np.einsum("lmk,tlm->tlk", g, d)
                v = np.einsum("lkj,tlj->tlk", core_inv, w)
                resid = d - np.einsum("lmk,tlk->tlm", g, v)
                quad = np.einsum("tlm,tlm->tl", resid, resid) / self.sigma2 + np.einsum("tlk,tlk->tl", v, v)
                out[s : s + step, idx] = const[None, :] - 0.5 * quad
        return out

    def classify(self, y: np.ndarray) -> np.ndarray:
        return _argmax_first(self.loglik(y))


def _argmax_first(ll: np.ndarray) -> np.ndarray:
    best = ll.max(axis=1, keepdims=True)
    tied = ll >= best - TIE_RTOL * np.maximum(1.0, np.abs(best))
    return np.argmax(tied, axis=1)


def log_likelihoods(y: np.ndarray, classes: Sequence[ProjectedClass], sigma2: float) -> np.ndarray:
    return ClassBank(classes, sigma2).loglik(y)


def log_likelihood(y: np.ndarray, pc: ProjectedClass, sigma2: float) -> float:
    """log N(y; proj_mean, G G^T + sigma2 I) via the k x k core."""
    y = np.asarray(y, dtype=float)
    if y.shape != (pc.m,):
        raise InvalidDimensionError(f"observation must have length {pc.m}")
    return float(ClassBank([pc], sigma2).loglik(y[None, :])[0, 0])


def classify(y: np.ndarray, classes: Sequence[ProjectedClass], sigma2: float) -> ClassificationResult:
    """Maximum-likelihood class under equal priors; ties go to the smallest index."""
    y = np.asarray(y, dtype=float)
    ll = ClassBank(classes, sigma2).loglik(y[None, :])
    return ClassificationResult(int(_argmax_first(ll)[0]), ll[0])


def classify_batch(y: np.ndarray, classes: Sequence[ProjectedClass], sigma2: float) -> np.ndarray:
    return ClassBank(classes, sigma2).classify(y)


def pairwise_error_mc(
    a: SubspaceClass,
    b: SubspaceClass,
    phi: FeatureMatrix,
    sigma2: float,
    trials: int,
    rng: RngStream,
    threads: Optional[int] = None,
) -> ErrorEstimate:
    """Monte Carlo error of ML classification between two equiprobable classes.

    Half the trials (the extra one for odd counts) come from ``a``.  Trials
    are processed in fixed blocks with their own substreams, so the result
    does not depend on ``threads``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    bank = ClassBank([project_class(a, phi), project_class(b, phi)], sigma2)
    counts = (trials - trials // 2, trials // 2)
    work = []
    for label, (cls, total) in enumerate(zip((a, b), counts)):
        for j, start in enumerate(range(0, total, MC_BLOCK)):
            work.append((label, cls, min(MC_BLOCK, total - start), rng.substream(label, j)))

    def run(item):
        label, cls, count, stream = item
        y = sample_signals(cls, phi, sigma2, count, stream)
        return int(np.count_nonzero(bank.classify(y) != label))

    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            errors = sum(pool.map(run, work))
    else:
        errors = sum(map(run, work))
    return ErrorEstimate.from_counts(errors, trials)
