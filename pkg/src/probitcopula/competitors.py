"""Reference copula density estimators that work on the square directly.

Three standard boundary-aware competitors: kernel smoothing of the
nine-fold reflected sample, the Beta-kernel smoother whose kernel shape
adapts near the edges, and the Bernstein polynomial smoother of the
empirical copula.  All consume pseudo-observations only.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln

from .kde import BandwidthMatrix, kernel_density_2d
from .transforms import PseudoSample

__all__ = [
    "reflect_sample",
    "mirror_bandwidth",
    "mirror_estimate",
    "beta_estimate",
    "bernstein_box_masses",
    "bernstein_from_box_masses",
    "bernstein_estimate",
]


# ---------------------------------------------------------------------------
# Mirror-reflection estimator

def reflect_sample(ps: PseudoSample) -> np.ndarray:
    """The 9n-point cloud {u,-u,2-u} x {v,-v,2-v}."""
    u, v = ps.u, ps.v
    us = (u, -u, 2.0 - u)
    vs = (v, -v, 2.0 - v)
    return np.concatenate(
        [np.column_stack((a, b)) for a in us for b in vs], axis=0
    )


def mirror_bandwidth(augmented: np.ndarray) -> BandwidthMatrix:
    """Normal reference on the reflected cloud, shrunk by (1/9)^(2/3).

    The shrink undoes the artificial nine-fold sample-size inflation in the
    n^(-1/3) factor of the reference rule.
    """
    m = augmented.shape[0]
    cov = np.cov(augmented[:, 0], augmented[:, 1], ddof=1)
    return BandwidthMatrix.from_matrix(m ** (-1.0 / 3.0) * (1.0 / 9.0) ** (2.0 / 3.0) * cov)


def mirror_estimate(ps: PseudoSample, at):
    """Gaussian KDE of the reflected cloud, normalised by n (not 9n)."""
    if ps.n < 3:
        raise ValueError("mirror estimator needs at least 3 points")
    aug = reflect_sample(ps)
    H = mirror_bandwidth(aug)
    return kernel_density_2d(aug, H, at, weight_count=ps.n)


# ---------------------------------------------------------------------------
# Beta-kernel estimator

def _chen_rho(x, h):
    return 2.0 * h * h + 2.5 - np.sqrt(
        4.0 * h ** 4 + 6.0 * h * h + 2.25 - x * x - x / h
    )

def _beta_shapes(x, h):
    """Kernel shape pair at evaluation coordinate x.

    Interior: (x/h + 1, (1-x)/h + 1).  Within 2h of an edge the shape on
    that side switches to Chen's boundary curve rho(x) + 1, which meets the
    interior value continuously at x = 2h.
    """
    x = np.asarray(x, dtype=float)
    # the boundary curve is only consumed on [0, 2h]; clamping its argument
    # there keeps the discarded branch of np.where out of the sqrt's domain
    lo = np.minimum(x, 2.0 * h)
    hi = np.minimum(1.0 - x, 2.0 * h)
    s1 = np.where(x < 2.0 * h, _chen_rho(lo, h) + 1.0, x / h + 1.0)
    s2 = np.where(x > 1.0 - 2.0 * h, _chen_rho(hi, h) + 1.0, (1.0 - x) / h + 1.0)
    return s1, s2


def _beta_kernel_matrix(x_eval: np.ndarray, data: np.ndarray, h: float) -> np.ndarray:
    """K[i, j] = Beta(shape pair of x_eval[i]) density at data[j]."""
    s1, s2 = _beta_shapes(x_eval, h)
    s1 = s1[:, None]
    s2 = s2[:, None]
    log_k = (
        gammaln(s1 + s2) - gammaln(s1) - gammaln(s2)
        + (s1 - 1.0) * np.log(data[None, :])
        + (s2 - 1.0) * np.log1p(-data[None, :])
    )
    return np.exp(log_k)


def beta_estimate(ps: PseudoSample, h: float, at):
    """Beta-kernel copula density estimate at point(s) of the open square."""
    if not 0.0 < h < 0.25:
        raise ValueError("beta kernel bandwidth must lie in (0, 0.25)")
    ev = np.asarray(at, dtype=float)
    scalar = ev.ndim == 1
    ev = ev[None, :] if scalar else ev
    if np.any(ev <= 0.0) or np.any(ev >= 1.0):
        raise ValueError("evaluation points must lie strictly inside the square")
    ku = _beta_kernel_matrix(ev[:, 0], ps.u, h)
    kv = _beta_kernel_matrix(ev[:, 1], ps.v, h)
    out = (ku * kv).sum(axis=1) / ps.n
    return float(out[0]) if scalar else out


def beta_grid_values(ps: PseudoSample, h: float, u_pts: np.ndarray) -> np.ndarray:
    """Beta-kernel estimate on a product lattice, exploiting separability."""
    ku = _beta_kernel_matrix(u_pts, ps.u, h)
    kv = _beta_kernel_matrix(u_pts, ps.v, h)
    return ku @ kv.T / ps.n


# ---------------------------------------------------------------------------
# Bernstein estimator

def bernstein_box_masses(ps: PseudoSample, k: int) -> np.ndarray:
    """Empirical-copula mass of each cell ((i/k,(i+1)/k] x (j/k,(j+1)/k]."""
    if k < 1:
        raise ValueError("k must be at least 1")
    edges = np.arange(k + 1) / k
    iu = np.searchsorted(edges, ps.u, side="left") - 1
    iv = np.searchsorted(edges, ps.v, side="left") - 1
    masses = np.zeros((k, k))
    np.add.at(masses, (iu, iv), 1.0)
    return masses / ps.n


def _bernstein_basis(x: np.ndarray, k: int) -> np.ndarray:
    """B[i, j] = C(k-1, j) x_i^j (1-x_i)^(k-1-j)."""
    j = np.arange(k, dtype=float)
    log_binom = gammaln(k) - gammaln(j + 1.0) - gammaln(k - j)
    x = x[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        log_b = log_binom[None, :] + j[None, :] * np.log(x) + (k - 1 - j)[None, :] * np.log1p(-x)
    b = np.exp(log_b)
    # log(0)*0 produces nan at the closed edges; the basis value there is
    # the indicator of the extreme index
    if np.any(~np.isfinite(b)):
        b = np.where(np.isfinite(b), b, 0.0)
        edge0 = np.flatnonzero(x[:, 0] == 0.0)
        edge1 = np.flatnonzero(x[:, 0] == 1.0)
        b[edge0] = 0.0
        b[edge0, 0] = 1.0
        b[edge1] = 0.0
        b[edge1, k - 1] = 1.0
    return b


def bernstein_from_box_masses(masses: np.ndarray, at):
    """Bernstein density from given cell masses: k^2 * Bu M Bv'."""
    masses = np.asarray(masses, dtype=float)
    k = masses.shape[0]
    if masses.shape != (k, k):
        raise ValueError("masses must be square")
    ev = np.asarray(at, dtype=float)
    scalar = ev.ndim == 1
    ev = ev[None, :] if scalar else ev
    bu = _bernstein_basis(ev[:, 0], k)
    bv = _bernstein_basis(ev[:, 1], k)
    out = k * k * ((bu @ masses) * bv).sum(axis=1)
    return float(out[0]) if scalar else out


def bernstein_estimate(ps: PseudoSample, k: int, at):
    """Bernstein polynomial smoothing of the empirical copula."""
    return bernstein_from_box_masses(bernstein_box_masses(ps, k), at)


def bernstein_grid_values(ps: PseudoSample, k: int, u_pts: np.ndarray) -> np.ndarray:
    masses = bernstein_box_masses(ps, k)
    bu = _bernstein_basis(u_pts, k)
    return k * k * (bu @ masses @ bu.T)
