"""Data-driven smoothing selection for the local log-polynomial estimators.

The bivariate selection problem is split into two univariate ones along the
principal axes of the transformed sample: each margin gets a least-squares
cross-validation criterion

    int f~^2  -  (2/n) sum_i f~_{-i}(x_i)

evaluated with the univariate local log-polynomial smoother of the same
degree.  The fixed rule searches a log-spaced bandwidth bracket by golden
section; the k-NN rule scans a fraction grid.  The two univariate answers
are recombined into a plane bandwidth through degree-dependent factors and
the PCA rotation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .kde import BandwidthMatrix, normal_reference_H
from .loclik import KnnBandwidth, _newton_1d
from .transforms import TransformedSample

__all__ = [
    "PcaDecomposition",
    "SmoothingSelection",
    "pca_scores",
    "cv_criterion_1d",
    "select_fixed",
    "select_knn",
    "ALPHA_GRID",
    "k_factor_fixed",
    "k_factor_knn",
]

# candidate neighbour fractions for the k-NN rule
ALPHA_GRID = np.round(np.arange(0.05, 0.95 + 1e-9, 0.025), 10)

N_INTEGRAL_NODES = 257
TAIL_SIGMAS = 4.0
LOO_FAILURE_SHARE = 0.2


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def k_factor_fixed(n: int, p: int) -> float:
    """Bandwidth inflation from univariate CV answers to the plane, fixed rule."""
    return float(n ** (1.0 / 15.0)) if p == 1 else float(n ** (1.0 / 45.0))


def k_factor_knn(n: int, p: int) -> float:
    """Fraction deflation from univariate CV answers to the plane, k-NN rule."""
    return float(n ** (-2.0 / 15.0)) if p == 1 else float(n ** (-4.0 / 45.0))


@dataclass(frozen=True)
class PcaDecomposition:
    """Rotation W (rows = principal axes, leading first) and rotated scores."""

    W: np.ndarray
    scores: np.ndarray


def pca_scores(ts: TransformedSample) -> PcaDecomposition:
    """Principal axes of the transformed sample via the scatter matrix.

    The sign convention makes the dominant entry of the first axis positive
    and the second axis its +90-degree rotation, so W is a deterministic
    rotation (det +1) with the larger-variance direction first.
    """
    if ts.n < 3:
        raise ValueError("PCA needs at least 3 points")
    xi = ts.as_points()
    g = xi.T @ xi
    evals, evecs = np.linalg.eigh(g)
    if not evals[0] > 1e-12 * evals[1]:
        raise ValueError("degenerate sample: all mass on one line")
    w1 = evecs[:, 1]
    dom = 0 if abs(w1[0]) >= abs(w1[1]) else 1
    if w1[dom] < 0:
        w1 = -w1
    w2 = np.array([-w1[1], w1[0]])
    W = np.vstack((w1, w2))
    return PcaDecomposition(W=W, scores=xi @ W.T)


@dataclass(frozen=True)
class SmoothingSelection:
    """Outcome of the CV selection for one degree.

    mode "fixed" carries the univariate bandwidths, the degree factor and
    the assembled plane matrix; mode "knn" carries the fractions, their
    ratio kappa and the neighbour count.  ``fallback`` records that the
    criterion had no usable minimum and a default was substituted.
    """

    mode: str
    p: int
    W: np.ndarray
    h_q: float | None = None
    h_r: float | None = None
    k_factor: float | None = None
    H_st: BandwidthMatrix | None = None
    alpha_q: float | None = None
    alpha_r: float | None = None
    kappa: float | None = None
    k: int | None = None
    fallback: bool = False

    def bandwidth(self):
        if self.mode == "fixed":
            return self.H_st
        return KnnBandwidth(k=self.k, kappa=self.kappa, W=self.W)


class _CvWorkspace:
    """Precomputed distances for repeated criterion evaluations on one margin."""

    def __init__(self, x: np.ndarray):
        x = np.asarray(x, dtype=float).ravel()
        if x.size < 10:
            raise ValueError("cross-validation needs at least 10 points")
        self.x = x
        self.n = x.size
        self.sigma = float(x.std(ddof=1))
        if not self.sigma > 0.0:
            raise ValueError("degenerate margin: zero variance")
        pad = TAIL_SIGMAS * self.sigma
        self.nodes = np.linspace(x.min() - pad, x.max() + pad, N_INTEGRAL_NODES)
        # z = data - eval throughout
        self.node_diff = x[None, :] - self.nodes[:, None]
        self.node_dist_sorted = np.sort(np.abs(self.node_diff), axis=1)
        self.pair_diff = x[None, :] - x[:, None]
        self.pair_dist_sorted = np.sort(np.abs(self.pair_diff), axis=1)

    def _node_fit(self, p: int, h_nodes) -> np.ndarray:
        S = np.empty((N_INTEGRAL_NODES, p + 1))
        hh = np.broadcast_to(np.asarray(h_nodes, dtype=float), (N_INTEGRAL_NODES,))
        w = np.exp(-0.5 * (self.node_diff / hh[:, None]) ** 2)
        S[:, 0] = w.sum(axis=1)
        S[:, 1] = (w * self.node_diff).sum(axis=1)
        if p == 2:
            S[:, 2] = (w * self.node_diff * self.node_diff).sum(axis=1)
        a, _, mass, _ = _newton_1d(S, hh, float(self.n), p)
        return np.where(mass, np.exp(a[:, 0]), 0.0)

    def _loo_fit(self, p: int, h_loo):
        hh = np.broadcast_to(np.asarray(h_loo, dtype=float), (self.n,))
        w = np.exp(-0.5 * (self.pair_diff / hh[:, None]) ** 2)
        np.fill_diagonal(w, 0.0)
        S = np.empty((self.n, p + 1))
        S[:, 0] = w.sum(axis=1)
        S[:, 1] = (w * self.pair_diff).sum(axis=1)
        if p == 2:
            S[:, 2] = (w * self.pair_diff * self.pair_diff).sum(axis=1)
        a, conv, mass, _ = _newton_1d(S, hh, float(self.n - 1), p)
        values = np.where(mass, np.exp(a[:, 0]), 0.0)
        failures = int(np.count_nonzero(~(conv & mass)))
        return values, failures

    def criterion(self, p: int, *, h: float | None = None,
                  alpha: float | None = None) -> float:
        if (h is None) == (alpha is None):
            raise ValueError("give exactly one of h or alpha")
        if h is not None:
            if not h > 0.0:
                raise ValueError("bandwidth must be positive")
            h_nodes = np.full(N_INTEGRAL_NODES, float(h))
            h_loo = np.full(self.n, float(h))
        else:
            if not 0.0 < alpha < 1.0:
                raise ValueError("alpha must lie in (0,1)")
            k_int = int(np.clip(_round_half_up(alpha * self.n), 2, self.n))
            h_nodes = self.node_dist_sorted[:, k_int - 1]
            k_loo = int(np.clip(_round_half_up(alpha * (self.n - 1)), 2, self.n - 1))
            # k-th neighbour among the other n-1 points: position k in the
            # sorted row, whose position 0 is the self-distance 0
            h_loo = self.pair_dist_sorted[:, k_loo]
        f_nodes = self._node_fit(p, h_nodes)
        integral = float(np.trapezoid(f_nodes * f_nodes, self.nodes))
        loo_values, failures = self._loo_fit(p, h_loo)
        if failures > LOO_FAILURE_SHARE * self.n:
            return float("nan")
        return integral - (2.0 / self.n) * float(loo_values.sum())


def cv_criterion_1d(sample, p: int, *, h: float | None = None,
                    alpha: float | None = None) -> float:
    """Least-squares CV criterion of one margin; NaN when the candidate is
    invalid (leave-one-out fits failing at more than 20% of points)."""
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    return _CvWorkspace(np.asarray(sample, dtype=float)).criterion(p, h=h, alpha=alpha)


def _golden_minimize(fun, lo: float, hi: float, tol: float = 1e-3):
    """Golden-section minimisation on [lo, hi]; ties move to the right.

    Returns the best evaluated abscissa, preferring the larger one on ties,
    or None when every evaluation was invalid.
    """
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    best_x, best_v = None, np.inf
    def probe(x):
        nonlocal best_x, best_v
        v = fun(x)
        v = np.inf if np.isnan(v) else v
        if v < best_v or (v == best_v and (best_x is None or x > best_x)):
            best_x, best_v = x, v
        return v
    a, b = lo, hi
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = probe(x1), probe(x2)
    while b - a > tol:
        if f1 < f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = probe(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = probe(x2)
    return best_x if np.isfinite(best_v) else None


def _search_fixed_margin(wsp: _CvWorkspace, p: int) -> float | None:
    """Coarse scan of the log-bandwidth bracket, then golden section.

    Returns None when no interior minimum exists in the bracket.
    """
    lo = np.log(0.05 * wsp.sigma)
    hi = np.log(3.0 * wsp.sigma)
    grid = np.linspace(lo, hi, 15)
    vals = np.array([wsp.criterion(p, h=float(np.exp(g))) for g in grid])
    vals = np.where(np.isnan(vals), np.inf, vals)
    if not np.isfinite(vals).any():
        return None
    # ties resolved toward larger smoothing
    i = len(vals) - 1 - int(np.argmin(vals[::-1]))
    if i == 0 or i == len(vals) - 1:
        return None
    x = _golden_minimize(
        lambda g: wsp.criterion(p, h=float(np.exp(g))), grid[i - 1], grid[i + 1]
    )
    return None if x is None else float(np.exp(x))


def select_fixed(ts: TransformedSample, p: int) -> SmoothingSelection:
    """CV choice of a fixed plane bandwidth matrix for degree p."""
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    pca = pca_scores(ts)
    h_q = _search_fixed_margin(_CvWorkspace(pca.scores[:, 0]), p)
    h_r = _search_fixed_margin(_CvWorkspace(pca.scores[:, 1]), p)
    kf = k_factor_fixed(ts.n, p)
    if h_q is None or h_r is None:
        warnings.warn(
            "cross-validation found no interior bandwidth minimum; "
            "falling back to the normal reference rule",
            RuntimeWarning,
        )
        return SmoothingSelection(
            mode="fixed", p=p, W=pca.W, k_factor=kf,
            H_st=normal_reference_H(ts), fallback=True,
        )
    d = np.diag([kf * h_q * h_q, kf * h_r * h_r])
    h_st = BandwidthMatrix.from_matrix(pca.W.T @ d @ pca.W)
    return SmoothingSelection(
        mode="fixed", p=p, W=pca.W, h_q=h_q, h_r=h_r, k_factor=kf, H_st=h_st,
    )


def _search_knn_margin(wsp: _CvWorkspace, p: int) -> tuple[float, bool]:
    vals = np.array([wsp.criterion(p, alpha=float(a)) for a in ALPHA_GRID])
    finite = np.isfinite(vals)
    if not finite.any():
        return 0.3, True
    vmin = vals[finite].min()
    # ties resolved toward larger smoothing (larger fraction)
    winners = ALPHA_GRID[finite & (vals == vmin)]
    return float(winners.max()), False


def select_knn(ts: TransformedSample, p: int) -> SmoothingSelection:
    """CV choice of the k-NN smoothing fractions for degree p."""
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    pca = pca_scores(ts)
    alpha_q, fb_q = _search_knn_margin(_CvWorkspace(pca.scores[:, 0]), p)
    alpha_r, fb_r = _search_knn_margin(_CvWorkspace(pca.scores[:, 1]), p)
    if fb_q or fb_r:
        warnings.warn(
            "cross-validation declared every neighbour fraction invalid; "
            "falling back to alpha=0.3",
            RuntimeWarning,
        )
    kf = k_factor_knn(ts.n, p)
    k = int(np.clip(_round_half_up(kf * alpha_q * ts.n), max(6, 3 * p), ts.n))
    return SmoothingSelection(
        mode="knn", p=p, W=pca.W, k_factor=kf,
        alpha_q=alpha_q, alpha_r=alpha_r, kappa=alpha_q / alpha_r, k=k,
        fallback=fb_q or fb_r,
    )
