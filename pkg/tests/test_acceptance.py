"""Acceptance criteria, one test each, at their stated tolerances.

Each test appends a ``[PASS]`` or ``[FAIL]`` line to the terminal summary.
"""
import math
import os

import numpy as np
import pytest

import conftest
from oracles import dense_loglik_mp, random_instance
from grasscap.bounds import (
    DdtCurve,
    DdtKind,
    GaussianPair,
    bhattacharyya_bound,
    c_affine_bounds,
    c_linear_bounds,
    ddt_eval,
    wishart_min_eig_limit,
)
from grasscap.cli import main
from grasscap.ensemble import RngStream, draw_feature_matrix, draw_linear_class
from grasscap.empirical import load_image_dir, run_face_experiment, synthetic_corpus
from grasscap.experiments import SweepConfig, fit_slope, run_ddt_sweep
from grasscap.gauss_classifier import ProjectedClass, log_likelihood, pairwise_error_mc, project_class

DDT_GRID = tuple(float(s) for s in np.logspace(-1, -4, 8))


def report(number, ok, detail):
    conftest.ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
    assert ok, detail


def test_criterion_1_linear_ddt_slopes():
    gains = (0.0, 0.75, 1.5, 1.8)
    cfg = SweepConfig("ddt_linear", DDT_GRID, gains, n=3, m=3, k=1, ensembles_per_point=100,
                      signals_per_ensemble=100, master_seed=2024)
    rows = run_ddt_sweep(cfg, threads=os.cpu_count())
    parts, ok = [], True
    for r in gains:
        d_hat, _ = fit_slope([row for row in rows if row.gain == r])
        target = ddt_eval(DdtCurve(DdtKind.LINEAR_CONJECTURE, 3, 1), r)
        tol = max(0.2, 0.3 * target)
        hit = abs(d_hat - target) <= tol
        ok &= hit
        parts.append(f"r={r}: {d_hat:.3f} vs {target:g}±{tol:g}{'' if hit else ' MISS'}")
    report(1, ok, "linear DDT slopes; " + "; ".join(parts))


def test_criterion_2_affine_ddt_slope():
    cfg = SweepConfig("ddt_affine", DDT_GRID, (0.0,), n=3, m=3, k=1, ensembles_per_point=100,
                      signals_per_ensemble=1000, master_seed=2024)
    d_hat, se = fit_slope(run_ddt_sweep(cfg, threads=os.cpu_count()))
    report(2, abs(d_hat - 2) <= 0.4, f"affine DDT slope {d_hat:.3f} (se {se:.3f}) vs 2±0.4")


def test_criterion_3_bhattacharyya_validity():
    root = RngStream(33)
    worst, violations = -np.inf, 0
    for i in range(100):
        gen = root.substream(i, 0).generator()
        m = int(gen.integers(1, 9))
        k = int(gen.integers(1, 4))
        n = max(m, k) + int(gen.integers(0, 4))
        sigma2 = (0.1, 0.01)[i % 2]
        a, b = draw_linear_class(n, k, gen), draw_linear_class(n, k, gen)
        phi = draw_feature_matrix(m, n, gen)
        pair = GaussianPair.from_projected(project_class(a, phi), project_class(b, phi), sigma2)
        bound = bhattacharyya_bound(pair)
        est = pairwise_error_mc(a, b, phi, sigma2, 2000, root.substream(i, 1))
        margin = est.p_hat - (bound + 3 * est.stderr)
        worst = max(worst, margin)
        violations += margin > 0
    report(3, violations == 0, f"100 pairs, {violations} violations; max p_hat - (bound + 3 se) = {worst:.4f}")


def test_criterion_4_likelihood_oracle():
    rng = np.random.default_rng(44)
    worst = 0.0
    for _ in range(1000):
        y, g, mu, sigma2 = random_instance(rng)
        ref = dense_loglik_mp(y, g, mu, sigma2)
        got = log_likelihood(y, ProjectedClass(g, mu), sigma2)
        worst = max(worst, abs(got - ref) / max(abs(ref), 1e-300))
    report(4, worst <= 1e-8, f"1000 instances, max relative error {worst:.2e} (limit 1e-8)")


def test_criterion_5_bound_ordering():
    bad = []
    for m in range(2, 21):
        for k in range(1, m):
            rs = np.linspace(0, m, 8 * m + 1)
            curves = {kind: np.array([ddt_eval(DdtCurve(kind, m, k), r) for r in rs]) for kind in DdtKind}
            inside = rs <= m - k
            lo, mid, hi = (curves[x][inside] for x in (DdtKind.LINEAR_LOWER, DdtKind.LINEAR_CONJECTURE,
                                                       DdtKind.LINEAR_UPPER))
            if np.any(lo > mid + 1e-12) or np.any(mid > hi + 1e-12):
                bad.append(f"order M={m} k={k}")
            for kind, vals in curves.items():
                if np.any(np.diff(vals) > 1e-12):
                    bad.append(f"{kind.value} increases M={m} k={k}")
    for kappa in (0.5, 0.75):
        for sigma2 in np.logspace(-1, -10, 46):
            for fn in (c_linear_bounds, c_affine_bounds):
                lo, hi = fn(kappa, sigma2)
                if hi < lo:
                    bad.append(f"{fn.__name__} kappa={kappa} sigma2={sigma2:g}")
    report(5, not bad, "DDT ordering/monotonicity and capacity upper >= lower" + (f"; {bad[:3]}" if bad else ""))


def test_criterion_6_wishart_limit():
    rng = np.random.default_rng(66)
    m, parts, ok = 400, [], True
    for kappa in (0.25, 0.5):
        k = int(kappa * m)
        emp = float(np.mean([np.linalg.eigvalsh(x.T @ x / m)[0] for x in rng.standard_normal((20, m, k))]))
        lim = wishart_min_eig_limit(kappa)
        ok &= abs(emp - lim) <= 0.05
        parts.append(f"kappa={kappa}: {emp:.4f} vs {lim:.4f}")
    report(6, ok, "Wishart min eigenvalue; " + "; ".join(parts))


def _first_reaching(values, m_grid, target):
    return next((m for m, v in zip(m_grid, values) if v >= target), None)


def _overlap_ok(a, b):
    return a.ci_low <= b.ci_high


def test_criterion_7_face_pipeline():
    imgs = synthetic_corpus(n_classes=10, n=1024, k=9, sigma2=1e-3, per_class=60, seed=0)
    m_grid = tuple(range(1, 41))
    res = run_face_experiment(imgs, m_grid, tuple(range(1, 11)), k_model=9, seed=0)
    problems = []
    for i in range(len(m_grid)):
        for j in range(10):
            e = res.errors[i][j]
            if j + 1 < 10 and res.errors[i][j + 1].p_hat < e.p_hat and not _overlap_ok(e, res.errors[i][j + 1]):
                problems.append(f"decrease in L at M={m_grid[i]}")
            if i + 1 < len(m_grid) and res.errors[i + 1][j].p_hat > e.p_hat \
                    and not _overlap_ok(res.errors[i + 1][j], e):
                problems.append(f"increase in M at L={j + 1}")
    m_emp = _first_reaching(res.max_l_empirical, m_grid, 10)
    m_pred = _first_reaching(res.predicted, m_grid, 10)
    window = m_emp is not None and m_pred is not None and m_pred / 2 <= m_emp <= 2 * m_pred
    ok = not problems and m_emp is not None and window
    report(7, ok, f"synthetic faces: max-L reaches 10 at M={m_emp}, predicted at M={m_pred}; "
                  f"trend violations {len(problems)}")


def test_criterion_7_yale_soft_report():
    root = os.environ.get("GRASSCAP_YALE_DIR")
    if not root:
        conftest.ACCEPTANCE_LINES.append("[SKIP] criterion 7 (soft): set GRASSCAP_YALE_DIR for the real-corpus report")
        pytest.skip("no real face corpus supplied")
    imgs = load_image_dir(root)
    m_grid = (5, 10, 15, 20, 25, 30)
    res = run_face_experiment(imgs, m_grid, tuple(range(1, imgs.class_count + 1)), k_model=9, seed=0)
    full = _first_reaching(res.max_l_empirical, m_grid, imgs.class_count)
    conftest.ACCEPTANCE_LINES.append(f"[INFO] criterion 7 (soft): all {imgs.class_count} classes below 0.2 "
                                     f"error from M={full}; max-L by M: {res.max_l_empirical}")


RUNS = {
    "ddt": ["ddt", "--sigma2", "logspace:-1:-3:5", "--r", "0,1.5", "--ensembles", "8", "--signals", "50"],
    "ddt_affine": ["ddt", "--mode", "ddt_affine", "--sigma2", "0.1,0.01", "--r", "0", "--ensembles", "8"],
    "capacity": ["capacity", "--m-grid", "4,8", "--ensembles", "8", "--signals", "50"],
    "faces": ["faces", "--synthetic", "true", "--n", "256", "--per-class", "20", "--m-grid", "5,10,20"],
}


def test_criterion_8_determinism(tmp_path):
    mismatched = []
    for name, argv in RUNS.items():
        outs = []
        for i, threads in enumerate((None, None, 1, 4)):
            path = tmp_path / f"{name}{i}.csv"
            extra = [] if threads is None else ["--threads", str(threads)]
            assert main(argv + extra + ["--seed", "9", "--out", str(path)]) == 0
            outs.append(path.read_bytes())
        rerun = tmp_path / f"{name}_rerun.csv"
        assert main([argv[0], "--config", str(tmp_path / f"{name}0.csv"), "--threads", "3", "--out", str(rerun)]) == 0
        outs.append(rerun.read_bytes())
        if len(set(outs)) != 1:
            mismatched.append(name)
    report(8, not mismatched, f"byte-identical CSVs across reruns, --threads and header reruns for "
                              f"{', '.join(RUNS)}" + (f"; mismatched: {mismatched}" if mismatched else ""))
