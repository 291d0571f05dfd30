import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from grasscap.bounds import (
    DdtCurve,
    DdtKind,
    GaussianPair,
    bhattacharyya_bound,
    bhattacharyya_distance,
    c_affine_bounds,
    c_linear_bounds,
    ddt_eval,
    predicted_classes,
    wishart_min_eig_limit,
)

KINDS = list(DdtKind)


def _pair(m1, c1, m2, c2):
    return GaussianPair(np.atleast_1d(m1), np.atleast_2d(c1), np.atleast_1d(m2), np.atleast_2d(c2))


def test_bhattacharyya_identical():
    p = _pair(np.zeros(3), np.eye(3), np.zeros(3), np.eye(3))
    assert bhattacharyya_distance(p) == 0.0
    assert bhattacharyya_bound(p) == 0.5


def test_bhattacharyya_mean_shift():
    delta = np.array([2.0, -1.0, 0.5, 1.0])
    p = _pair(delta, np.eye(4), np.zeros(4), np.eye(4))
    assert bhattacharyya_distance(p) == pytest.approx(delta @ delta / 8, rel=1e-14)


def test_bhattacharyya_bound_b_equals_one():
    delta = np.array([2.0, 2.0])  # |delta|^2 = 8
    p = _pair(delta, np.eye(2), np.zeros(2), np.eye(2))
    assert bhattacharyya_bound(p) == pytest.approx(0.183939720585721160797761885081, rel=1e-14)


def test_bhattacharyya_scalar_variances():
    p = _pair(0.0, 1.0, 0.0, 3.0)
    # mpmath: 1/2 ln(2/sqrt 3) and 1/2 exp(-B)
    assert bhattacharyya_distance(p) == pytest.approx(0.0719205181129452318598047514985, rel=1e-13)
    assert bhattacharyya_bound(p) == pytest.approx(0.465302429551049799470609373492, rel=1e-13)


@pytest.mark.parametrize("m1,v1,m2,v2", [(0, 1, 0, 3), (0.5, 0.2, -1, 2.5), (3, 1, 0, 1), (0, 1e-2, 0.1, 1)])
def test_bhattacharyya_quadrature_oracle(m1, v1, m2, v2):
    # exp(-B) is the Bhattacharyya coefficient: the integral of sqrt(p1 p2)
    f = lambda x: math.sqrt(stats.norm.pdf(x, m1, math.sqrt(v1)) * stats.norm.pdf(x, m2, math.sqrt(v2)))
    coeff, _ = integrate.quad(f, -np.inf, np.inf, epsabs=1e-13, epsrel=1e-12)
    assert bhattacharyya_distance(_pair(m1, v1, m2, v2)) == pytest.approx(-math.log(coeff), abs=1e-9)


def _spd(rng, m):
    a = rng.standard_normal((m, m))
    return a @ a.T + 0.1 * np.eye(m)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32), m=st.integers(1, 8))
def test_bhattacharyya_symmetric_nonnegative(seed, m):
    rng = np.random.default_rng(seed)
    m1, m2, c1, c2 = rng.standard_normal(m), rng.standard_normal(m), _spd(rng, m), _spd(rng, m)
    b12 = bhattacharyya_distance(_pair(m1, c1, m2, c2))
    b21 = bhattacharyya_distance(_pair(m2, c2, m1, c1))
    assert b12 >= 0 and abs(b12 - b21) <= 1e-9
    assert 0 < bhattacharyya_bound(_pair(m1, c1, m2, c2)) <= 0.5


def test_bhattacharyya_large_dimension_no_overflow():
    rng = np.random.default_rng(0)
    m = 400
    c1, c2 = 50 * np.eye(m), 60 * np.eye(m)  # determinants overflow doubles
    b = bhattacharyya_distance(_pair(np.zeros(m), c1, np.zeros(m), c2))
    assert b == pytest.approx(m / 2 * math.log(55 / math.sqrt(3000)), rel=1e-10)


def test_bhattacharyya_not_pd():
    with pytest.raises(np.linalg.LinAlgError):
        bhattacharyya_distance(_pair(np.zeros(2), np.diag([1.0, -1.0]), np.zeros(2), np.eye(2)))


def test_gaussian_pair_rejects_asymmetric():
    with pytest.raises(ValueError):
        _pair(np.zeros(2), np.array([[1.0, 0.5], [0.0, 1.0]]), np.zeros(2), np.eye(2))


@pytest.mark.parametrize("sigma2", [1e-4, 0.01, 1.0, 10.0])
def test_c_linear_lower_degenerate_at_half(sigma2):
    assert c_linear_bounds(0.5, sigma2)[0] == -0.25


def test_c_linear_examples():
    assert c_linear_bounds(0.5, 0.01)[1] == pytest.approx(2.28348654318027792589942397588, rel=1e-13)
    assert c_linear_bounds(1 / 8, 0.01)[0] == pytest.approx(0.353638217671987171073228694593, rel=1e-13)


def test_c_affine_examples():
    lo, up = c_affine_bounds(0.25, 0.01)
    # (sqrt2 - 1)^2 = 0.1715... < 1/2 selects the first argument of the min
    assert lo == pytest.approx(1.44342879729342916402960837129, rel=1e-13)
    assert up == pytest.approx(2.99324941024548996504505058717, rel=1e-13)


def test_c_affine_branch_continuity():
    for s in (1e-3, 0.1, 1.0):
        assert c_affine_bounds(0.5, s)[0] == c_linear_bounds(0.5, s)[0]
        below = c_affine_bounds(0.5 - 1e-12, s)[0]
        assert below == pytest.approx(c_affine_bounds(0.5, s)[0], abs=1e-9)


def test_c_affine_uses_half_cap_for_small_kappa():
    # kappa = 0.05: (sqrt(10) - 1)^2 = 4.67 > 1/2, so the cap applies
    s = 0.01
    expected = 0.95 / 2 * math.log2(1 + 0.5 / s) - 0.025
    assert c_affine_bounds(0.05, s)[0] == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("kappa", [0.1, 0.3, 0.5, 0.75, 0.9])
@pytest.mark.parametrize("sigma2", [1e-6, 1e-3, 0.1, 1.0, 100.0])
def test_affine_upper_exceeds_linear(kappa, sigma2):
    diff = c_affine_bounds(kappa, sigma2)[1] - c_linear_bounds(kappa, sigma2)[1]
    assert diff == pytest.approx(0.5 * math.log2((2 + sigma2) / (1 + sigma2)), rel=1e-9)
    assert diff > 0


def test_capacity_domain_errors():
    for bad in (0.0, 1.0, -0.2):
        with pytest.raises(ValueError):
            c_linear_bounds(bad, 0.1)
    with pytest.raises(ValueError):
        c_affine_bounds(0.5, 0.0)


def test_capacity_gap_is_order_one():
    gap = [c_linear_bounds(0.5, s)[1] - c_linear_bounds(0.5, s)[0] for s in (1e-6, 1e-8)]
    assert abs(gap[0] - gap[1]) <= 0.05


def test_ddt_examples():
    assert ddt_eval(DdtCurve("affine", 3, 1), 0) == 2
    assert ddt_eval(DdtCurve("linear_conjecture", 3, 1), 1.5) == pytest.approx(0.25)
    assert ddt_eval(DdtCurve("linear_upper", 4, 1), 2) == pytest.approx(0.5)
    assert ddt_eval(DdtCurve("linear_lower", 5, 2), 1) == pytest.approx(1.0)


def test_ddt_curve_validation():
    with pytest.raises(ValueError):
        DdtCurve("affine", 3, 3)
    with pytest.raises(ValueError):
        DdtCurve("nonsense", 3, 1)
    with pytest.raises(ValueError):
        ddt_eval(DdtCurve("affine", 3, 1), -0.1)


def _ddt_grid():
    for m in range(2, 21):
        for k in range(1, m):
            for r in np.linspace(0, m, 4 * m + 1):
                yield m, k, float(r)


def test_ddt_ordering_grid():
    for m, k, r in _ddt_grid():
        if r > m - k:
            continue
        lo = ddt_eval(DdtCurve("linear_lower", m, k), r)
        mid = ddt_eval(DdtCurve("linear_conjecture", m, k), r)
        hi = ddt_eval(DdtCurve("linear_upper", m, k), r)
        assert lo <= mid + 1e-12 and mid <= hi + 1e-12, (m, k, r)


@pytest.mark.parametrize("kind", KINDS)
def test_ddt_non_increasing_and_zero_crossing(kind):
    for m in range(2, 21):
        for k in range(1, m):
            rs = np.linspace(0, 2 * m, 200)
            vals = np.array([ddt_eval(DdtCurve(kind, m, k), r) for r in rs])
            assert np.all(vals >= 0) and np.all(np.diff(vals) <= 1e-12)
            end = m if kind is DdtKind.LINEAR_UPPER else m - k
            assert ddt_eval(DdtCurve(kind, m, k), end) == pytest.approx(0.0, abs=1e-12)


def test_linear_upper_k_branch_is_loose():
    # k(1 - r/M) alone is positive past r = M - k; the min with M - k - r zeroes it
    curve = DdtCurve("linear_upper", 4, 3)
    assert ddt_eval(curve, 1.0) == 0.0 and 3 * (1 - 1.0 / 4) > 0


def test_wishart_limit_examples():
    assert wishart_min_eig_limit(1.0) == 0.0
    assert wishart_min_eig_limit(0.25) == 0.25
    with pytest.raises(ValueError):
        wishart_min_eig_limit(0.0)


def test_wishart_limit_empirical():
    rng = np.random.default_rng(0)
    m, k = 400, 100
    vals = [np.linalg.eigvalsh(g.T @ g / m)[0] for g in rng.standard_normal((20, m, k))]
    assert abs(np.mean(vals) - wishart_min_eig_limit(0.25)) <= 0.05


def test_predicted_classes_examples():
    assert predicted_classes(0.1, 9, 9, 38) == 1
    assert predicted_classes(0.25, 11, 9, 38) == 4
    assert predicted_classes(0.25, 20, 9, 38) == 38  # 4^5.5 = 2048
    assert predicted_classes(0.25, 11) == 4  # defaults are 9 and 38


def test_predicted_classes_monotone():
    sig = np.logspace(0, -6, 25)
    table = np.array([[predicted_classes(s, m) for m in range(1, 50)] for s in sig])
    assert np.all(np.diff(table, axis=1) >= 0)
    assert np.all(np.diff(table, axis=0) >= 0)
    assert table.min() >= 1 and table.max() <= 38
