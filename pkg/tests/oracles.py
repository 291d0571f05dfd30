"""Reference computations kept independent of the package's fast paths."""
import math

import numpy as np
from scipy import linalg


def dense_loglik(y, factor, mean, sigma2):
    """log N(y; mean, G G^T + sigma2 I) from the explicit M x M covariance."""
    m = len(y)
    cov = factor @ factor.T + sigma2 * np.eye(m)
    c, low = linalg.cho_factor(cov, lower=True)
    d = y - mean
    quad = d @ linalg.cho_solve((c, low), d)
    logdet = 2 * np.sum(np.log(np.diag(c)))
    return -0.5 * (m * math.log(2 * math.pi) + logdet + quad)


def random_instance(rng, max_m=20, max_k=8, sig_range=(1e-6, 10.0)):
    m = int(rng.integers(1, max_m + 1))
    k = int(rng.integers(1, max_k + 1))
    g = rng.standard_normal((m, k)) * rng.uniform(0.1, 3.0)
    mu = rng.standard_normal(m) * rng.uniform(0, 2)
    sigma2 = float(np.exp(rng.uniform(np.log(sig_range[0]), np.log(sig_range[1]))))
    if rng.uniform() < 0.5:
        # observation near the class subspace stresses the small-sigma2 path
        y = mu + g @ rng.standard_normal(k) + math.sqrt(sigma2) * rng.standard_normal(m)
    else:
        y = rng.standard_normal(m) * rng.uniform(0.1, 5)
    return y, g, mu, sigma2


def dense_loglik_mp(y, factor, mean, sigma2, dps=40):
    """Dense-covariance log-density in extended precision; double-precision Cholesky loses digits at tiny sigma2."""
    import mpmath

    with mpmath.workdps(dps):
        m = len(y)
        g = mpmath.matrix(factor.tolist())
        cov = g * g.T + mpmath.mpf(float(sigma2)) * mpmath.eye(m)
        chol = mpmath.cholesky(cov)
        d = mpmath.matrix((np.asarray(y) - np.asarray(mean)).tolist())
        z = mpmath.lu_solve(chol, d)  # lower-triangular solve
        quad = sum(z[i] ** 2 for i in range(m))
        logdet = 2 * sum(mpmath.log(chol[i, i]) for i in range(m))
        return float(-0.5 * (m * mpmath.log(2 * mpmath.pi) + logdet + quad))
