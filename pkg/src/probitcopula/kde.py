"""Gaussian kernel density machinery on the transformed plane.

The naive copula density estimate is a plain bivariate Gaussian KDE of the
probit-transformed pseudo-observations, pushed back to the unit square by
dividing out the normal densities of the evaluation point.  The amended
variant divides by a second-order correction factor before renormalising,
which removes most of the corner hypertrophy of the naive estimate.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .transforms import TransformedSample, PseudoSample, normal_pdf, probit

__all__ = [
    "BandwidthMatrix",
    "DensityGrid",
    "gaussian_kde2",
    "kernel_density_2d",
    "unit_square_kde",
    "naive_estimate",
    "amended_estimate",
    "normal_reference_H",
    "renormalize",
    "grid_lattice",
    "write_grid_csv",
    "read_grid_csv",
]

_TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class BandwidthMatrix:
    """Symmetric positive definite 2x2 smoothing matrix.

    Stored by components: h1_sq and h2_sq are the diagonal (variance-scale)
    entries, h12 the off-diagonal one.
    """

    h1_sq: float
    h2_sq: float
    h12: float = 0.0

    def __post_init__(self):
        det = self.h1_sq * self.h2_sq - self.h12 * self.h12
        if not (self.h1_sq > 0.0 and det > 0.0):
            raise ValueError("bandwidth matrix must be symmetric positive definite")

    @classmethod
    def isotropic(cls, h: float) -> "BandwidthMatrix":
        """h^2 times the identity; h is the kernel standard deviation."""
        return cls(h * h, h * h, 0.0)

    @classmethod
    def from_matrix(cls, m) -> "BandwidthMatrix":
        m = np.asarray(m, dtype=float)
        if m.shape != (2, 2):
            raise ValueError("expected a 2x2 matrix")
        if abs(m[0, 1] - m[1, 0]) > 1e-12 * (1.0 + abs(m[0, 1])):
            raise ValueError("bandwidth matrix must be symmetric")
        return cls(float(m[0, 0]), float(m[1, 1]), float(0.5 * (m[0, 1] + m[1, 0])))

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.h1_sq, self.h12], [self.h12, self.h2_sq]])

    @property
    def det(self) -> float:
        return self.h1_sq * self.h2_sq - self.h12 * self.h12

    @property
    def inv(self) -> np.ndarray:
        d = self.det
        return np.array([[self.h2_sq, -self.h12], [-self.h12, self.h1_sq]]) / d


def _eval_points(at) -> tuple[np.ndarray, bool]:
    pts = np.asarray(at, dtype=float)
    if pts.ndim == 1:
        if pts.shape != (2,):
            raise ValueError("evaluation point must be a pair")
        return pts[None, :], True
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("evaluation points must have shape (m, 2)")
    return pts, False


def kernel_density_2d(points: np.ndarray, H: BandwidthMatrix, at, *,
                      weight_count: int | None = None, chunk: int = 512):
    """Bivariate Gaussian KDE of an (n,2) point cloud.

    ``weight_count`` replaces n in the normalising constant; the mirror
    estimator sums 9n reflected kernels but divides by n only.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must have shape (n, 2)")
    ev, scalar = _eval_points(at)
    hinv = H.inv
    a, b, c = hinv[0, 0], hinv[0, 1], hinv[1, 1]
    norm = (weight_count if weight_count is not None else pts.shape[0]) * _TWO_PI * np.sqrt(H.det)
    out = np.empty(ev.shape[0])
    for lo in range(0, ev.shape[0], chunk):
        sl = slice(lo, min(lo + chunk, ev.shape[0]))
        dx = pts[None, :, 0] - ev[sl, 0][:, None]
        dy = pts[None, :, 1] - ev[sl, 1][:, None]
        q = a * dx * dx + 2.0 * b * dx * dy + c * dy * dy
        out[sl] = np.exp(-0.5 * q).sum(axis=1)
    out /= norm
    return float(out[0]) if scalar else out


def gaussian_kde2(ts: TransformedSample, H: BandwidthMatrix, at):
    """KDE of the transformed sample at point(s) of the plane."""
    return kernel_density_2d(ts.as_points(), H, at)


def unit_square_kde(ps: PseudoSample, H: BandwidthMatrix, at):
    """Gaussian KDE built directly on the unit square (no transform).

    Biased near the boundary by construction; kept as the reference the
    transformation estimators are measured against in tests.
    """
    return kernel_density_2d(ps.as_points(), H, at)


def naive_estimate(ts: TransformedSample, H: BandwidthMatrix, at):
    """Back-transformed KDE: f_hat(probit(u), probit(v)) / (phi phi)."""
    ev, scalar = _eval_points(at)
    st = np.column_stack((probit(ev[:, 0]), probit(ev[:, 1])))
    dens = kernel_density_2d(ts.as_points(), H, st)
    out = dens / (normal_pdf(st[:, 0]) * normal_pdf(st[:, 1]))
    return float(out[0]) if scalar else out


def amended_estimate(ts: TransformedSample, H: BandwidthMatrix, at, *,
                     divisor_floor: float = 0.1):
    """Naive estimate divided by its second-order expectation factor.

    The divisor 1 + (h1^2 (s^2-1) + 2 h12 s t + h2^2 (t^2-1))/2 is clamped
    below at ``divisor_floor``.  Renormalisation of a full surface is a
    separate step (``renormalize``), not done per point.
    """
    ev, scalar = _eval_points(at)
    s = probit(ev[:, 0])
    t = probit(ev[:, 1])
    base = naive_estimate(ts, H, ev)
    div = 1.0 + 0.5 * (
        H.h1_sq * (s * s - 1.0) + 2.0 * H.h12 * s * t + H.h2_sq * (t * t - 1.0)
    )
    div = np.maximum(div, divisor_floor)
    out = np.asarray(base) / div
    return float(out[0]) if scalar else out


def normal_reference_H(ts: TransformedSample) -> BandwidthMatrix:
    """Normal reference rule on the plane: H = n^(-1/3) * sample covariance."""
    if ts.n < 3:
        raise ValueError("normal reference rule needs at least 3 points")
    cov = np.cov(ts.s, ts.t, ddof=1)
    det = cov[0, 0] * cov[1, 1] - cov[0, 1] ** 2
    if not det > 1e-12 * max(cov[0, 0] * cov[1, 1], 1e-300):
        raise ValueError("degenerate sample covariance")
    return BandwidthMatrix.from_matrix(ts.n ** (-1.0 / 3.0) * cov)


def grid_lattice(n_grid: int) -> np.ndarray:
    """Interior lattice k/(n+1), k = 1..n."""
    if n_grid < 1:
        raise ValueError("grid size must be positive")
    return np.arange(1, n_grid + 1, dtype=float) / (n_grid + 1.0)


@dataclass(frozen=True)
class DensityGrid:
    """Square array of density values on the interior lattice k/(N+1)."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape[0] != vals.shape[1]:
            raise ValueError("grid values must be a square matrix")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid values must be finite")
        if np.any(vals < 0.0):
            raise ValueError("density values must be nonnegative")
        object.__setattr__(self, "values", vals)

    @property
    def n_grid(self) -> int:
        return self.values.shape[0]

    @property
    def points(self) -> np.ndarray:
        return grid_lattice(self.n_grid)

    def integral(self) -> float:
        """Equal-weight quadrature over the square (weights sum to one)."""
        return float(self.values.mean())


def renormalize(grid: DensityGrid) -> DensityGrid:
    """Scale a density surface so its quadrature integral is exactly one."""
    total = grid.integral()
    if not total > 0.0:
        raise ValueError("cannot renormalize a surface with zero integral")
    return DensityGrid(grid.values / total)


def write_grid_csv(grid: DensityGrid, path) -> None:
    pts = grid.points
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["u", "v", "value"])
        for i, u in enumerate(pts):
            for j, v in enumerate(pts):
                writer.writerow([f"{u:.12g}", f"{v:.12g}", f"{grid.values[i, j]:.12g}"])


def read_grid_csv(path) -> DensityGrid:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError("empty grid file")
        if [h.strip().lower() for h in header] != ["u", "v", "value"]:
            raise ValueError("grid file must start with a 'u,v,value' header")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ValueError(f"malformed grid row {lineno}")
            try:
                rows.append(tuple(float(x) for x in row))
            except ValueError as exc:
                raise ValueError(f"non-numeric grid row {lineno}") from exc
    m = len(rows)
    n = round(np.sqrt(m))
    if n * n != m:
        raise ValueError("grid file does not contain a square lattice")
    vals = np.array([r[2] for r in rows]).reshape(n, n)
    grid = DensityGrid(vals)
    us = np.array([r[0] for r in rows]).reshape(n, n)
    vs = np.array([r[1] for r in rows]).reshape(n, n)
    lat = grid.points
    if not (np.allclose(us, lat[:, None], atol=1e-9) and np.allclose(vs, lat[None, :], atol=1e-9)):
        raise ValueError("grid file coordinates do not match the interior lattice")
    return grid
