"""Rank pseudo-observations and the probit transform.

Everything downstream sees the data through two maps: raw observations are
replaced by their normalised ranks (pseudo-observations, which live strictly
inside the unit square), and the pseudo-observations are pushed through the
standard normal quantile function so that kernel smoothing can happen on an
unbounded plane.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri
from scipy.stats import rankdata

__all__ = [
    "PseudoSample",
    "TransformedSample",
    "pseudo_observations",
    "probit",
    "normal_cdf",
    "normal_pdf",
    "transform",
    "empirical_copula",
]

_SQRT_2PI = np.sqrt(2.0 * np.pi)


def _validated_column(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError(f"{name} is empty")
    bad = np.flatnonzero(~np.isfinite(arr))
    if bad.size:
        # report 1-based positions, matching CSV row diagnostics elsewhere
        raise ValueError(f"non-finite value in {name} at row {bad[0] + 1}")
    return arr


@dataclass(frozen=True)
class PseudoSample:
    """Pairs (u_i, v_i) of normalised ranks, all strictly inside (0,1)."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float).ravel()
        v = np.asarray(self.v, dtype=float).ravel()
        if u.shape != v.shape:
            raise ValueError("u and v must have equal length")
        if u.size == 0:
            raise ValueError("empty sample")
        for name, arr in (("u", u), ("v", v)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite pseudo-observation in {name}")
            if np.any(arr <= 0.0) or np.any(arr >= 1.0):
                raise ValueError(f"pseudo-observations in {name} must lie in (0,1)")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def n(self) -> int:
        return self.u.size

    def as_points(self) -> np.ndarray:
        return np.column_stack((self.u, self.v))


@dataclass(frozen=True)
class TransformedSample:
    """Probit-transformed pseudo-observations (S_i, T_i) on the plane."""

    s: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float).ravel()
        t = np.asarray(self.t, dtype=float).ravel()
        if s.shape != t.shape:
            raise ValueError("s and t must have equal length")
        if s.size == 0:
            raise ValueError("empty sample")
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(t))):
            raise ValueError("transformed sample must be finite")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "t", t)

    @property
    def n(self) -> int:
        return self.s.size

    def as_points(self) -> np.ndarray:
        return np.column_stack((self.s, self.t))


def pseudo_observations(x, y) -> PseudoSample:
    """Normalised ranks u_i = rank(x_i)/(n+1), mid-ranks on ties.

    Invariant under strictly increasing transformations of either margin.
    """
    x = _validated_column(x, "x")
    y = _validated_column(y, "y")
    if x.size != y.size:
        raise ValueError("x and y must have equal length")
    n = x.size
    u = rankdata(x, method="average") / (n + 1.0)
    v = rankdata(y, method="average") / (n + 1.0)
    return PseudoSample(u, v)


def probit(u):
    """Standard normal quantile of u, u in the open interval (0,1)."""
    arr = np.asarray(u, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise ValueError("probit argument must lie strictly inside (0,1)")
    out = ndtri(arr)
    if np.isscalar(u) or arr.ndim == 0:
        return float(out)
    return out


def normal_cdf(x):
    return ndtr(np.asarray(x, dtype=float))


def normal_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / _SQRT_2PI


def transform(ps: PseudoSample) -> TransformedSample:
    """Probit both coordinates of a pseudo-sample."""
    return TransformedSample(ndtri(ps.u), ndtri(ps.v))


def empirical_copula(ps: PseudoSample, u: float, v: float) -> float:
    """Fraction of pseudo-observations with u_i <= u and v_i <= v."""
    if not (0.0 <= u <= 1.0 and 0.0 <= v <= 1.0):
        raise ValueError("empirical copula is evaluated on the closed unit square")
    inside = np.logical_and(ps.u <= u, ps.v <= v)
    return float(np.count_nonzero(inside)) / ps.n
