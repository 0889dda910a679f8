"""PCA rotation, univariate CV criterion and smoothing-parameter selection."""

import numpy as np
import pytest

from probitcopula import (
    BandwidthMatrix,
    cv_criterion_1d,
    pca_scores,
    select_fixed,
    select_knn,
)
from probitcopula.bandwidth import (
    ALPHA_GRID,
    N_INTEGRAL_NODES,
    TAIL_SIGMAS,
    _round_half_up,
    k_factor_fixed,
    k_factor_knn,
)
from probitcopula.kde import kernel_density_2d
from probitcopula.loclik import loclik_fit_point
from probitcopula.transforms import TransformedSample, pseudo_observations, transform
from probitcopula.copulas import CopulaModel, sample_copula

SQRT_2PI = np.sqrt(2.0 * np.pi)


def _ts(points):
    pts = np.asarray(points, dtype=float)
    return TransformedSample(pts[:, 0], pts[:, 1])


def _loglin_1d(data, n_eff, h, x):
    """Closed-form univariate degree-1 local likelihood density at x."""
    d = np.asarray(data, dtype=float) - x
    w = np.exp(-0.5 * (d / h) ** 2)
    total = w.sum()
    if total <= 1e-12:
        return 0.0
    m = float((w * d).sum() / total)
    kde = total / (n_eff * SQRT_2PI * h)
    return kde * np.exp(-0.5 * m * m / (h * h))


# ---------------------------------------------------------------------------
# PCA rotation

def test_pca_diagonal_line_configuration():
    ts = _ts([[1.0, 1.0], [-1.0, -1.0], [0.1, -0.1], [-0.1, 0.1]])
    pca = pca_scores(ts)
    r = 1.0 / np.sqrt(2.0)
    assert np.allclose(pca.W, [[r, r], [-r, r]], atol=1e-12)


def test_pca_axis_aligned_configuration():
    ts = _ts([[2.0, 0.0], [-2.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    pca = pca_scores(ts)
    assert np.allclose(pca.W, np.eye(2), atol=1e-12)


def test_pca_matches_eigen_oracle():
    rng = np.random.default_rng(60)
    pts = rng.multivariate_normal([0, 0], [[2.0, 0.7], [0.7, 1.0]], size=50)
    ts = _ts(pts)
    pca = pca_scores(ts)
    g = pts.T @ pts
    assert np.allclose(pca.W @ pca.W.T, np.eye(2), atol=1e-12)
    assert np.linalg.det(pca.W) == pytest.approx(1.0, abs=1e-12)
    diag = pca.W @ g @ pca.W.T
    assert abs(diag[0, 1]) < 1e-10 * diag[0, 0]
    assert diag[0, 0] >= diag[1, 1]
    evals = np.sort(np.linalg.eigvalsh(g))[::-1]
    assert np.allclose(np.diag(diag), evals, rtol=1e-10)


def test_pca_scores_are_uncorrelated_and_invertible():
    rng = np.random.default_rng(61)
    pts = rng.multivariate_normal([0, 0], [[1.0, 0.6], [0.6, 1.5]], size=200)
    ts = _ts(pts)
    pca = pca_scores(ts)
    cross = float(pca.scores[:, 0] @ pca.scores[:, 1])
    scale = float(np.abs(pca.scores).max()) ** 2 * 200
    assert abs(cross) < 1e-10 * scale
    assert np.allclose(pca.scores @ pca.W, pts, atol=1e-12)


def test_pca_rejects_degenerate_data():
    ts = _ts([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])
    with pytest.raises(ValueError):
        pca_scores(ts)


def test_rotation_consistency_of_assembled_bandwidth():
    # smoothing the rotated scores with a diagonal matrix equals smoothing
    # the original sample with the back-rotated matrix
    rng = np.random.default_rng(62)
    pts = rng.multivariate_normal([0, 0], [[1.0, 0.5], [0.5, 0.8]], size=120)
    ts = _ts(pts)
    pca = pca_scores(ts)
    d1, d2 = 0.21, 0.13
    h_st = BandwidthMatrix.from_matrix(pca.W.T @ np.diag([d1, d2]) @ pca.W)
    h_qr = BandwidthMatrix(d1, d2, 0.0)
    for at in ((0.2, -0.3), (1.0, 0.5)):
        at_qr = pca.W @ np.asarray(at)
        direct = kernel_density_2d(pts, h_st, at)
        rotated = kernel_density_2d(pca.scores, h_qr, at_qr)
        assert direct == pytest.approx(rotated, rel=1e-10)
        # the local-likelihood density value inherits the same invariance
        f1 = loclik_fit_point(ts, h_st, 1, at).density
        f2 = loclik_fit_point(_ts(pca.scores), h_qr, 1, at_qr).density
        assert f1 == pytest.approx(f2, rel=1e-8)


# ---------------------------------------------------------------------------
# degree factors and rounding

def test_k_factor_arithmetic():
    assert k_factor_fixed(1000, 1) == pytest.approx(1.5848931924611136, abs=1e-10)
    assert k_factor_fixed(1000, 2) == pytest.approx(1000.0 ** (1.0 / 45.0), abs=1e-12)
    assert k_factor_knn(1000, 1) == pytest.approx(1000.0 ** (-2.0 / 15.0), abs=1e-12)
    assert k_factor_knn(1000, 2) == pytest.approx(1000.0 ** (-4.0 / 45.0), abs=1e-12)


def test_k_factor_monotonicity():
    for p in (1, 2):
        assert k_factor_fixed(100, p) > 1.0
        assert k_factor_fixed(1000, p) > k_factor_fixed(100, p)
        assert k_factor_knn(100, p) < 1.0
        assert k_factor_knn(1000, p) < k_factor_knn(100, p)


def test_round_half_up():
    assert _round_half_up(0.5) == 1
    assert _round_half_up(1.5) == 2
    assert _round_half_up(2.4) == 2
    assert _round_half_up(270.6) == 271
    assert _round_half_up(-0.5) == 0


# ---------------------------------------------------------------------------
# univariate CV criterion

def test_cv_criterion_validation():
    rng = np.random.default_rng(63)
    x = rng.normal(size=30)
    with pytest.raises(ValueError):
        cv_criterion_1d(x, 1)
    with pytest.raises(ValueError):
        cv_criterion_1d(x, 1, h=0.5, alpha=0.3)
    with pytest.raises(ValueError):
        cv_criterion_1d(x, 1, h=-0.5)
    with pytest.raises(ValueError):
        cv_criterion_1d(x, 1, alpha=1.2)
    with pytest.raises(ValueError):
        cv_criterion_1d(x, 3, h=0.5)
    with pytest.raises(ValueError):
        cv_criterion_1d(x[:5], 1, h=0.5)


def test_cv_criterion_h_profile_is_u_shaped():
    rng = np.random.default_rng(64)
    x = rng.normal(size=200)
    hs = np.geomspace(0.05, 2.0, 15)
    vals = np.array([cv_criterion_1d(x, 1, h=float(h)) for h in hs])
    finite = np.where(np.isnan(vals), np.inf, vals)
    i = int(np.argmin(finite))
    assert np.isfinite(finite[i])
    assert 0 < i < len(hs) - 1, (i, vals)
    assert cv_criterion_1d(x, 1, h=10.0) > finite[i]


def test_cv_criterion_tiny_bandwidth_is_invalid():
    rng = np.random.default_rng(65)
    x = rng.normal(size=40)
    assert np.isnan(cv_criterion_1d(x, 1, h=1e-6))


def test_cv_criterion_fixed_h_recomputation_oracle():
    # duplicate-free sample: rebuild the criterion from the closed-form
    # degree-1 fits (integral by trapezoid on the module's node layout, the
    # leave-one-out sum by naive recomputation on n-1 points)
    rng = np.random.default_rng(66)
    x = rng.normal(size=20)
    assert len(np.unique(x)) == 20
    h = 0.5 * x.std(ddof=1)
    sigma = x.std(ddof=1)
    nodes = np.linspace(x.min() - TAIL_SIGMAS * sigma, x.max() + TAIL_SIGMAS * sigma,
                        N_INTEGRAL_NODES)
    f_nodes = np.array([_loglin_1d(x, 20.0, h, t) for t in nodes])
    integral = float(np.trapezoid(f_nodes * f_nodes, nodes))
    loo = sum(
        _loglin_1d(np.delete(x, i), 19.0, h, x[i]) for i in range(20)
    )
    expected = integral - (2.0 / 20.0) * loo
    got = cv_criterion_1d(x, 1, h=float(h))
    # the solver stops at gradient norm 1e-8, which leaves ~1e-10 in the
    # 277-term sum; exact agreement would need exact per-point maximisers
    assert got == pytest.approx(expected, abs=1e-9)


def test_cv_criterion_knn_recomputation_oracle():
    # the alpha mode uses per-point bandwidths: the k-th neighbour distance
    # among the others for leave-one-out, among all points for the nodes
    rng = np.random.default_rng(67)
    x = rng.normal(size=20)
    alpha = 0.4
    k_nodes = int(np.clip(_round_half_up(alpha * 20), 2, 20))
    k_loo = int(np.clip(_round_half_up(alpha * 19), 2, 19))
    sigma = x.std(ddof=1)
    nodes = np.linspace(x.min() - TAIL_SIGMAS * sigma, x.max() + TAIL_SIGMAS * sigma,
                        N_INTEGRAL_NODES)
    f_nodes = np.empty(N_INTEGRAL_NODES)
    for j, t in enumerate(nodes):
        h = np.sort(np.abs(x - t))[k_nodes - 1]
        f_nodes[j] = _loglin_1d(x, 20.0, h, t)
    integral = float(np.trapezoid(f_nodes * f_nodes, nodes))
    loo = 0.0
    for i in range(20):
        others = np.delete(x, i)
        h = np.sort(np.abs(others - x[i]))[k_loo - 1]
        loo += _loglin_1d(others, 19.0, h, x[i])
    expected = integral - (2.0 / 20.0) * loo
    got = cv_criterion_1d(x, 1, alpha=alpha)
    assert got == pytest.approx(expected, abs=1e-9)


# ---------------------------------------------------------------------------
# fixed-bandwidth selection

def test_select_fixed_assembly_oracle():
    u, v = sample_copula(CopulaModel("gaussian", 0.5), 150, seed=87)
    ts = transform(pseudo_observations(u, v))
    for p in (1, 2):
        sel = select_fixed(ts, p)
        assert sel.mode == "fixed" and sel.p == p and not sel.fallback
        assert sel.h_q > 0 and sel.h_r > 0
        assert sel.k_factor == pytest.approx(k_factor_fixed(150, p))
        kf = sel.k_factor
        want = sel.W.T @ np.diag([kf * sel.h_q**2, kf * sel.h_r**2]) @ sel.W
        assert np.allclose(sel.H_st.matrix, want, atol=1e-12)
        assert sel.H_st.det > 0 and sel.H_st.h1_sq > 0
        assert isinstance(sel.bandwidth(), BandwidthMatrix)


def test_select_fixed_fallback_uses_normal_reference():
    # this sample's degree-2 h-profile has no interior minimum in the
    # search bracket, which must trigger the documented fallback
    from probitcopula import normal_reference_H

    u, v = sample_copula(CopulaModel("gaussian", 0.5), 150, seed=70)
    ts = transform(pseudo_observations(u, v))
    with pytest.warns(RuntimeWarning, match="no interior bandwidth minimum"):
        sel = select_fixed(ts, 2)
    assert sel.fallback
    assert np.allclose(sel.H_st.matrix, normal_reference_H(ts).matrix, atol=1e-14)


def test_select_fixed_deterministic():
    u, v = sample_copula(CopulaModel("frank", 4.16), 120, seed=71)
    ts = transform(pseudo_observations(u, v))
    a = select_fixed(ts, 1)
    b = select_fixed(ts, 1)
    assert a.h_q == b.h_q and a.h_r == b.h_r
    assert np.array_equal(a.H_st.matrix, b.H_st.matrix)


# ---------------------------------------------------------------------------
# k-NN selection

def test_select_knn_outputs_lie_on_the_grid():
    u, v = sample_copula(CopulaModel("gaussian", 0.5), 200, seed=72)
    ts = transform(pseudo_observations(u, v))
    for p in (1, 2):
        sel = select_knn(ts, p)
        assert sel.mode == "knn" and not sel.fallback
        assert sel.alpha_q in ALPHA_GRID and sel.alpha_r in ALPHA_GRID
        assert sel.kappa == pytest.approx(sel.alpha_q / sel.alpha_r)
        expected_k = int(np.clip(
            _round_half_up(k_factor_knn(200, p) * sel.alpha_q * 200),
            max(6, 3 * p), 200,
        ))
        assert sel.k == expected_k
        bw = sel.bandwidth()
        assert bw.k == sel.k and bw.kappa == pytest.approx(sel.kappa)


def test_select_knn_deterministic():
    u, v = sample_copula(CopulaModel("clayton", 2.5), 150, seed=73)
    ts = transform(pseudo_observations(u, v))
    a = select_knn(ts, 1)
    b = select_knn(ts, 1)
    assert (a.alpha_q, a.alpha_r, a.k) == (b.alpha_q, b.alpha_r, b.k)


def test_select_knn_degree_two_smooths_more():
    # on Gaussian-copula scores the log-density is close to quadratic, so
    # the degree-2 fit supports much heavier smoothing than degree 1
    u, v = sample_copula(CopulaModel("gaussian", 0.31), 500, seed=74)
    ts = transform(pseudo_observations(u, v))
    sel1 = select_knn(ts, 1)
    sel2 = select_knn(ts, 2)
    assert sel2.alpha_q > sel1.alpha_q


def test_select_knn_plausible_fraction_degree_one():
    # replication median of the selected fraction on Gaussian rho=0.3 data
    alphas = []
    for seed in range(5):
        u, v = sample_copula(CopulaModel("gaussian", 0.3), 500, seed=100 + seed)
        ts = transform(pseudo_observations(u, v))
        alphas.append(select_knn(ts, 1).alpha_q)
    med = float(np.median(alphas))
    assert 0.04 <= med <= 0.34, alphas


def test_select_knn_plausible_fraction_degree_two():
    # the least-squares criterion decreases monotonically in alpha on data
    # whose score log-density is essentially quadratic, so this check
    # documents the expected middle-of-grid fraction and currently fails:
    # the selector runs to the top of the grid instead (see the benchmark
    # discussion in the README)
    alphas = []
    for seed in range(5):
        u, v = sample_copula(CopulaModel("gaussian", 0.3), 500, seed=100 + seed)
        ts = transform(pseudo_observations(u, v))
        alphas.append(select_knn(ts, 2).alpha_q)
    med = float(np.median(alphas))
    assert 0.35 <= med <= 0.65, alphas
