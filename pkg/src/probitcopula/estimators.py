"""Uniform interface over all copula density estimators.

Each estimator is addressable by a short spec string (the form the CLI and
benchmark configs use), fits on a pseudo-observation sample and can produce
point values or a full interior-lattice grid:

    mirror                     kernel smoothing of the 9-fold reflected sample
    naive                      back-transformed KDE, normal reference bandwidth
    amended                    naive with the second-order divisor, renormalised
    loglin[:bw=knn|fixed]      local log-linear fit on the plane (CV bandwidth)
    logquad[:bw=knn|fixed]     local log-quadratic fit on the plane (CV bandwidth)
    beta:h=0.02                Beta-kernel smoother with bandwidth h
    bernstein:k=15             Bernstein smoothing of the empirical copula
    oracle                     true density (benchmark baseline; needs a model)
"""

from __future__ import annotations

import numpy as np

from . import competitors
from .bandwidth import select_fixed, select_knn
from .copulas import CopulaModel, copula_density
from .kde import (
    BandwidthMatrix,
    DensityGrid,
    grid_lattice,
    kernel_density_2d,
    normal_reference_H,
    renormalize,
)
from .loclik import improved_grid_values
from .transforms import PseudoSample, normal_pdf, probit, transform

__all__ = ["make_estimator", "ESTIMATOR_NAMES", "truth_grid"]

NORMALIZATION_GRID_N = 400


def _lattice_mesh(n_grid: int) -> np.ndarray:
    pts = grid_lattice(n_grid)
    uu, vv = np.meshgrid(pts, pts, indexing="ij")
    return np.column_stack((uu.ravel(), vv.ravel()))


def _midpoint_mesh(n_grid: int) -> np.ndarray:
    """Midpoint-rule nodes ((i-1/2)/n, (j-1/2)/n); used for normalisation."""
    pts = (np.arange(n_grid) + 0.5) / n_grid
    uu, vv = np.meshgrid(pts, pts, indexing="ij")
    return np.column_stack((uu.ravel(), vv.ravel()))


def truth_grid(model: CopulaModel, n_grid: int) -> DensityGrid:
    pts = grid_lattice(n_grid)
    vals = copula_density(model, pts[:, None], pts[None, :])
    return DensityGrid(vals)


class _EstimatorBase:
    spec: str = ""

    def fit(self, ps: PseudoSample):
        raise NotImplementedError

    def evaluate(self, at) -> np.ndarray:
        raise NotImplementedError

    def grid(self, n_grid: int) -> DensityGrid:
        vals = self.evaluate(_lattice_mesh(n_grid))
        return DensityGrid(np.asarray(vals).reshape(n_grid, n_grid))

    def manifest(self) -> dict:
        return {}


class MirrorEstimator(_EstimatorBase):
    def __init__(self):
        self.spec = "mirror"

    def fit(self, ps: PseudoSample):
        if ps.n < 3:
            raise ValueError("mirror estimator needs at least 3 points")
        self._cloud = competitors.reflect_sample(ps)
        self._H = competitors.mirror_bandwidth(self._cloud)
        self._n = ps.n
        return self

    def evaluate(self, at):
        return kernel_density_2d(self._cloud, self._H, at, weight_count=self._n)

    def manifest(self) -> dict:
        return {"h1_sq": self._H.h1_sq, "h2_sq": self._H.h2_sq, "h12": self._H.h12}


class NaiveEstimator(_EstimatorBase):
    """Back-transformed KDE; optionally amended and renormalised."""

    def __init__(self, amended: bool = False):
        self.amended = amended
        self.spec = "amended" if amended else "naive"

    def fit(self, ps: PseudoSample):
        self._ts = transform(ps)
        self._H = normal_reference_H(self._ts)
        self._norm = None
        return self

    def _raw(self, at):
        ev = np.atleast_2d(np.asarray(at, dtype=float))
        s = probit(ev[:, 0])
        t = probit(ev[:, 1])
        dens = kernel_density_2d(
            self._ts.as_points(), self._H, np.column_stack((s, t))
        )
        out = dens / (normal_pdf(s) * normal_pdf(t))
        if self.amended:
            H = self._H
            div = 1.0 + 0.5 * (
                H.h1_sq * (s * s - 1.0) + 2.0 * H.h12 * s * t + H.h2_sq * (t * t - 1.0)
            )
            out = out / np.maximum(div, 0.1)
        return out

    def _normalization(self) -> float:
        if self._norm is None:
            if not self.amended:
                self._norm = 1.0
            else:
                mesh = _midpoint_mesh(NORMALIZATION_GRID_N)
                self._norm = float(self._raw(mesh).mean())
        return self._norm

    def evaluate(self, at):
        ev = np.asarray(at, dtype=float)
        scalar = ev.ndim == 1
        out = self._raw(ev) / self._normalization()
        return float(out[0]) if scalar else out

    def manifest(self) -> dict:
        return {"h1_sq": self._H.h1_sq, "h2_sq": self._H.h2_sq, "h12": self._H.h12}


class LocalLikEstimator(_EstimatorBase):
    """Local log-polynomial estimator with cross-validated bandwidth."""

    def __init__(self, p: int, bw: str = "knn"):
        if bw not in ("knn", "fixed"):
            raise ValueError("bw must be 'knn' or 'fixed'")
        self.p = p
        self.bw_mode = bw
        base = "loglin" if p == 1 else "logquad"
        self.spec = base if bw == "knn" else f"{base}:bw=fixed"

    def fit(self, ps: PseudoSample):
        self._ts = transform(ps)
        if self.bw_mode == "knn":
            self.selection = select_knn(self._ts, self.p)
        else:
            self.selection = select_fixed(self._ts, self.p)
        self._bw = self.selection.bandwidth()
        self._norm = None
        return self

    def _raw(self, st: np.ndarray) -> np.ndarray:
        dens, conv = improved_grid_values(self._ts, self._bw, self.p, st)
        self.converged_share = float(conv.mean())
        return dens / (normal_pdf(st[:, 0]) * normal_pdf(st[:, 1]))

    def _normalization(self) -> float:
        if self._norm is None:
            mesh = _midpoint_mesh(NORMALIZATION_GRID_N)
            st = np.column_stack((probit(mesh[:, 0]), probit(mesh[:, 1])))
            self._norm = float(self._raw(st).mean())
        return self._norm

    def evaluate(self, at):
        ev = np.asarray(at, dtype=float)
        scalar = ev.ndim == 1
        pts = np.atleast_2d(ev)
        st = np.column_stack((probit(pts[:, 0]), probit(pts[:, 1])))
        norm = self._normalization()
        out = self._raw(st) / norm
        return float(out[0]) if scalar else out

    def manifest(self) -> dict:
        sel = self.selection
        info = {"p": self.p, "bandwidth": self.bw_mode, "fallback": sel.fallback,
                "normalization": self._normalization()}
        if sel.mode == "knn":
            info.update(alpha_q=sel.alpha_q, alpha_r=sel.alpha_r,
                        kappa=sel.kappa, k=sel.k)
        else:
            H = sel.H_st
            info.update(h_q=sel.h_q, h_r=sel.h_r, k_factor=sel.k_factor,
                        h1_sq=H.h1_sq, h2_sq=H.h2_sq, h12=H.h12)
        return info


class BetaEstimator(_EstimatorBase):
    def __init__(self, h: float):
        self.h = float(h)
        self.spec = f"beta:h={self.h:g}"

    def fit(self, ps: PseudoSample):
        if not 0.0 < self.h < 0.25:
            raise ValueError("beta kernel bandwidth must lie in (0, 0.25)")
        self._ps = ps
        return self

    def evaluate(self, at):
        return competitors.beta_estimate(self._ps, self.h, at)

    def grid(self, n_grid: int) -> DensityGrid:
        vals = competitors.beta_grid_values(self._ps, self.h, grid_lattice(n_grid))
        return DensityGrid(vals)

    def manifest(self) -> dict:
        return {"h": self.h}


class BernsteinEstimator(_EstimatorBase):
    def __init__(self, k: int):
        self.k = int(k)
        self.spec = f"bernstein:k={self.k}"

    def fit(self, ps: PseudoSample):
        if self.k < 1:
            raise ValueError("bernstein order k must be positive")
        self._masses = competitors.bernstein_box_masses(ps, self.k)
        return self

    def evaluate(self, at):
        return competitors.bernstein_from_box_masses(self._masses, at)

    def grid(self, n_grid: int) -> DensityGrid:
        bu = competitors._bernstein_basis(grid_lattice(n_grid), self.k)
        return DensityGrid(self.k * self.k * (bu @ self._masses @ bu.T))

    def manifest(self) -> dict:
        return {"k": self.k}


class OracleEstimator(_EstimatorBase):
    """Returns the true density; the zero-error baseline for sanity checks."""

    def __init__(self, model: CopulaModel):
        self.model = model
        self.spec = "oracle"

    def fit(self, ps: PseudoSample):
        return self

    def evaluate(self, at):
        ev = np.asarray(at, dtype=float)
        scalar = ev.ndim == 1
        pts = np.atleast_2d(ev)
        out = copula_density(self.model, pts[:, 0], pts[:, 1])
        return float(out) if scalar else out

    def grid(self, n_grid: int) -> DensityGrid:
        return truth_grid(self.model, n_grid)


ESTIMATOR_NAMES = (
    "mirror", "naive", "amended", "loglin", "logquad", "beta", "bernstein", "oracle",
)


def make_estimator(spec: str, model: CopulaModel | None = None) -> _EstimatorBase:
    """Build an estimator from its spec string."""
    text = spec.strip()
    name, _, rest = text.partition(":")
    name = name.strip().lower()
    kv = {}
    if rest.strip():
        for item in rest.split(","):
            key, eq, value = item.partition("=")
            if not eq:
                raise ValueError(f"malformed estimator spec item {item!r}")
            kv[key.strip().lower()] = value.strip()
    if name == "mirror":
        _reject_extras(kv, spec)
        return MirrorEstimator()
    if name == "naive":
        _reject_extras(kv, spec)
        return NaiveEstimator(amended=False)
    if name == "amended":
        _reject_extras(kv, spec)
        return NaiveEstimator(amended=True)
    if name in ("loglin", "logquad"):
        bw = kv.pop("bw", "knn")
        _reject_extras(kv, spec)
        return LocalLikEstimator(p=1 if name == "loglin" else 2, bw=bw)
    if name == "beta":
        h = float(kv.pop("h"))
        _reject_extras(kv, spec)
        return BetaEstimator(h)
    if name == "bernstein":
        k = int(kv.pop("k"))
        _reject_extras(kv, spec)
        return BernsteinEstimator(k)
    if name == "oracle":
        _reject_extras(kv, spec)
        if model is None:
            raise ValueError("oracle estimator needs the true model")
        return OracleEstimator(model)
    raise ValueError(f"unknown estimator {name!r}")


def _reject_extras(kv: dict, spec: str) -> None:
    if kv:
        raise ValueError(f"unrecognised keys {sorted(kv)} in estimator spec {spec!r}")
