"""Local log-polynomial likelihood smoothing on the transformed plane.

Around an evaluation point x the log-density of the probit-transformed
sample is approximated by a polynomial P_a of degree p (1 or 2) in z = X - x,
fitted by maximising the kernel-weighted likelihood

    sum_i K(H^{-1/2} z_i) P_a(z_i)  -  n * int K(H^{-1/2} z) exp(P_a(z)) dz

with a Gaussian kernel; exp(a_0) is then the density estimate at x.  The
kernel here is the unnormalised exp(-|.|^2/2), so the integral term equals
2*pi*|H|^{1/2}*e^{a0} when the slope and curvature coefficients vanish; the
maximiser does not depend on that convention.

Because the kernel is Gaussian the integral has a closed form: with
A = H^{-1} - 2Q (Q the quadratic-coefficient matrix, zero for p=1) and b the
slope vector, the term is e^{a0} * 2*pi * det(A)^{-1/2} * exp(b'A^{-1}b/2),
finite exactly when A is positive definite.  Gradients and Hessians of the
objective are moments of a Gaussian with mean A^{-1}b and covariance A^{-1},
so the concave problem is solved by damped Newton iterations, batched over
evaluation points.

Bandwidths are either a fixed matrix or a k-nearest-neighbour rule: the
distance to the k-th neighbour in PCA coordinates (r-axis weighted by kappa)
sets the local scale, giving larger smoothing where data are sparse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .kde import BandwidthMatrix
from .transforms import TransformedSample, normal_pdf, probit

__all__ = [
    "LocalFit",
    "KnnBandwidth",
    "LoclikError",
    "loclik_objective",
    "loclik_fit_point",
    "knn_distance",
    "improved_estimate",
    "improved_grid_values",
]

_TWO_PI = 2.0 * np.pi

# Monomial exponents of the local polynomial, constant term first.
_EXPS_2D = {
    1: ((0, 0), (1, 0), (0, 1)),
    2: ((0, 0), (1, 0), (0, 1), (2, 0), (0, 2), (1, 1)),
}
_EXPS_1D = {1: ((0,), (1,)), 2: ((0,), (1,), (2,))}

GRAD_TOL = 1e-8
MAX_ITER = 100
MASS_FLOOR = 1e-12  # below this summed kernel weight a point has no local data


class LoclikError(RuntimeError):
    pass


@dataclass(frozen=True)
class LocalFit:
    """Solution of one local likelihood problem."""

    p: int
    coef: np.ndarray
    converged: bool
    n_iter: int

    @property
    def density(self) -> float:
        return float(np.exp(self.coef[0]))


@dataclass(frozen=True)
class KnnBandwidth:
    """k-nearest-neighbour bandwidth rule in rotated (PCA) coordinates.

    The distance between points is sqrt(dq^2 + kappa^2 dr^2); the local
    smoothing matrix at a point with k-th neighbour distance D is
    W' * D^2 diag(1, 1/kappa^2) * W back in the original coordinates.
    """

    k: int
    kappa: float
    W: np.ndarray

    def __post_init__(self):
        W = np.asarray(self.W, dtype=float)
        if W.shape != (2, 2):
            raise ValueError("W must be 2x2")
        if not np.allclose(W @ W.T, np.eye(2), atol=1e-12):
            raise ValueError("W must be orthonormal")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if not self.kappa > 0.0:
            raise ValueError("kappa must be positive")
        object.__setattr__(self, "W", W)


# ---------------------------------------------------------------------------
# Gaussian moments

def _normal_moments_2d(mu1, mu2, s11, s12, s22, max_order):
    """Raw moments E[z1^a z2^b] of N(mu, Sigma) for a+b <= max_order.

    Vectorised over points; uses the Stein recursion
    m_{a,b} = mu1 m_{a-1,b} + (a-1) s11 m_{a-2,b} + b s12 m_{a-1,b-1}.
    """
    one = np.ones_like(mu1)
    m = {(0, 0): one}
    for total in range(1, max_order + 1):
        for a in range(total, -1, -1):
            b = total - a
            if a >= 1:
                val = mu1 * m[(a - 1, b)]
                if a >= 2:
                    val = val + (a - 1) * s11 * m[(a - 2, b)]
                if b >= 1:
                    val = val + b * s12 * m[(a - 1, b - 1)]
            else:
                val = mu2 * m[(0, b - 1)]
                if b >= 2:
                    val = val + (b - 1) * s22 * m[(0, b - 2)]
            m[(a, b)] = val
    return m


def _normal_moments_1d(mu, var, max_order):
    m = [np.ones_like(mu), mu]
    for k in range(2, max_order + 1):
        m.append(mu * m[k - 1] + (k - 1) * var * m[k - 2])
    return m


# ---------------------------------------------------------------------------
# Closed-form model terms (2-D)

def _model_core_2d(a, hi11, hi12, hi22, p):
    """A = H^{-1} - 2Q, its inverse, the tilted mean and the log prefactor."""
    b1, b2 = a[:, 1], a[:, 2]
    if p == 2:
        a11 = hi11 - 2.0 * a[:, 3]
        a22 = hi22 - 2.0 * a[:, 4]
        a12 = hi12 - a[:, 5]
    else:
        a11, a12, a22 = hi11, hi12, hi22
        if np.ndim(a11) == 0:
            a11 = np.full_like(b1, hi11)
            a12 = np.full_like(b1, hi12)
            a22 = np.full_like(b1, hi22)
    det_a = a11 * a22 - a12 * a12
    feasible = (a11 > 0.0) & (det_a > 0.0)
    safe = np.where(feasible, det_a, 1.0)
    s11 = a22 / safe
    s22 = a11 / safe
    s12 = -a12 / safe
    mu1 = s11 * b1 + s12 * b2
    mu2 = s12 * b1 + s22 * b2
    # log of I(a)/n-eff-free part: 2*pi*det(A)^{-1/2} * exp(a0 + b'mu/2)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_i0 = (
            np.log(_TWO_PI)
            - 0.5 * np.log(safe)
            + a[:, 0]
            + 0.5 * (b1 * mu1 + b2 * mu2)
        )
    return feasible, mu1, mu2, s11, s12, s22, log_i0


def _objective_2d(a, S, hi11, hi12, hi22, n_eff, p):
    feasible, _, _, _, _, _, log_i0 = _model_core_2d(a, hi11, hi12, hi22, p)
    with np.errstate(over="ignore"):
        i0 = np.exp(log_i0)
    obj = (a * S).sum(axis=1) - n_eff * i0
    return np.where(feasible & np.isfinite(obj), obj, -np.inf)


def _newton_2d(S, hi11, hi12, hi22, det_h, n_eff, p):
    """Damped Newton maximisation, batched over evaluation points.

    Returns coefficients, a convergence mask and the iteration count.
    Points whose summed kernel weight is below MASS_FLOOR are left at the
    initial value and reported unconverged.
    """
    exps = _EXPS_2D[p]
    k = len(exps)
    m = S.shape[0]
    n_eff = np.broadcast_to(np.asarray(n_eff, dtype=float), (m,))
    hi11 = np.broadcast_to(np.asarray(hi11, dtype=float), (m,))
    hi12 = np.broadcast_to(np.asarray(hi12, dtype=float), (m,))
    hi22 = np.broadcast_to(np.asarray(hi22, dtype=float), (m,))
    det_h = np.broadcast_to(np.asarray(det_h, dtype=float), (m,))

    s0 = S[:, 0]
    has_mass = s0 > MASS_FLOOR
    a = np.zeros((m, k))
    kde = np.where(has_mass, s0, MASS_FLOOR) / (_TWO_PI * n_eff * np.sqrt(det_h))
    a[:, 0] = np.log(np.maximum(kde, 1e-12))

    converged = np.zeros(m, dtype=bool)
    done = ~has_mass
    obj = _objective_2d(a, S, hi11, hi12, hi22, n_eff, p)
    max_order = 2 * p
    n_iter = 0
    while not done.all() and n_iter < MAX_ITER:
        n_iter += 1
        idx = np.flatnonzero(~done)
        aa = a[idx]
        ss = S[idx]
        ne = n_eff[idx]
        feas, mu1, mu2, s11, s12, s22, log_i0 = _model_core_2d(
            aa, hi11[idx], hi12[idx], hi22[idx], p
        )
        # current iterates are always feasible (line search enforces it)
        i0 = np.exp(log_i0)
        mom = _normal_moments_2d(mu1, mu2, s11, s12, s22, max_order)
        et = np.stack([mom[e] for e in exps], axis=1)
        grad = ss - (ne * i0)[:, None] * et

        scale = np.maximum(1.0, ss[:, 0])
        new_conv = np.max(np.abs(grad), axis=1) <= GRAD_TOL * scale
        if new_conv.any():
            which = idx[new_conv]
            converged[which] = True
            done[which] = True
        live = ~new_conv
        if not live.any():
            continue
        jdx = idx[live]
        aa, ss, ne, i0, et, grad = (
            aa[live], ss[live], ne[live], i0[live], et[live], grad[live],
        )
        mm = np.empty((jdx.size, k, k))
        for r in range(k):
            er = exps[r]
            for c in range(r, k):
                ec = exps[c]
                key = (er[0] + ec[0], er[1] + ec[1])
                mom_rc = mom[key][live] if isinstance(mom[key], np.ndarray) else mom[key]
                mm[:, r, c] = mom_rc
                mm[:, c, r] = mom_rc
        rhs = grad / (ne * i0)[:, None]
        try:
            delta = np.linalg.solve(mm, rhs[..., None])[..., 0]
        except np.linalg.LinAlgError:
            # near-singular moment matrix at some point: regularise it
            mm = mm + 1e-10 * np.eye(k)[None, :, :] * (
                1.0 + mm.reshape(jdx.size, -1).max(axis=1)[:, None, None]
            )
            delta = np.linalg.solve(mm, rhs[..., None])[..., 0]

        slope = (grad * delta).sum(axis=1)
        base = obj[jdx]
        step = np.ones(jdx.size)
        accepted = np.zeros(jdx.size, dtype=bool)
        a_new = aa.copy()
        for _ in range(40):
            trial = aa + step[:, None] * delta
            trial_obj = _objective_2d(
                trial, ss, hi11[jdx], hi12[jdx], hi22[jdx], ne, p
            )
            ok = ~accepted & (trial_obj >= base + 1e-4 * step * slope)
            if ok.any():
                a_new[ok] = trial[ok]
                obj[jdx[ok]] = trial_obj[ok]
                accepted |= ok
            if accepted.all():
                break
            step = np.where(accepted, step, step * 0.5)
        stuck = ~accepted
        if stuck.any():
            done[jdx[stuck]] = True  # cannot improve; leave unconverged
        a[jdx] = a_new
    return a, converged, has_mass, n_iter


def _moments_2d(data, ev, hi11, hi12, hi22, p, n_loo=False, chunk=512):
    """Kernel-weighted monomial sums S_k = sum_i w_i z^e around each point.

    z is data minus evaluation point; hi components may be scalars or
    per-point arrays.  With ``n_loo`` the contribution of an exactly
    coincident observation (z = 0, weight 1) is removed from S_0.
    """
    exps = _EXPS_2D[p]
    m = ev.shape[0]
    S = np.empty((m, len(exps)))
    hi11 = np.broadcast_to(np.asarray(hi11, dtype=float), (m,))
    hi12 = np.broadcast_to(np.asarray(hi12, dtype=float), (m,))
    hi22 = np.broadcast_to(np.asarray(hi22, dtype=float), (m,))
    for lo in range(0, m, chunk):
        sl = slice(lo, min(lo + chunk, m))
        z1 = data[None, :, 0] - ev[sl, 0][:, None]
        z2 = data[None, :, 1] - ev[sl, 1][:, None]
        q = (
            hi11[sl][:, None] * z1 * z1
            + 2.0 * hi12[sl][:, None] * z1 * z2
            + hi22[sl][:, None] * z2 * z2
        )
        w = np.exp(-0.5 * q)
        t1 = w * z1
        t2 = w * z2
        S[sl, 0] = w.sum(axis=1)
        S[sl, 1] = t1.sum(axis=1)
        S[sl, 2] = t2.sum(axis=1)
        if p == 2:
            S[sl, 3] = (t1 * z1).sum(axis=1)
            S[sl, 4] = (t2 * z2).sum(axis=1)
            S[sl, 5] = (t1 * z2).sum(axis=1)
    if n_loo:
        S[:, 0] -= 1.0
    return S


# ---------------------------------------------------------------------------
# Univariate counterpart (used by the bandwidth selection criterion)

def _objective_1d(a, S, hinv2, n_eff, p):
    """Objective with closed-form integral; hinv2 is 1/h^2 per point."""
    b = a[:, 1]
    av = hinv2 - 2.0 * a[:, 2] if p == 2 else hinv2
    feasible = av > 0.0
    safe = np.where(feasible, av, 1.0)
    with np.errstate(over="ignore", invalid="ignore"):
        log_i0 = (
            0.5 * np.log(_TWO_PI)
            - 0.5 * np.log(safe)
            + a[:, 0]
            + 0.5 * b * b / safe
        )
        obj = (a * S).sum(axis=1) - n_eff * np.exp(log_i0)
    return np.where(feasible & np.isfinite(obj), obj, -np.inf)


def _newton_1d(S, h, n_eff, p):
    """Damped Newton for the univariate local log-polynomial fit."""
    k = p + 1
    m = S.shape[0]
    h = np.broadcast_to(np.asarray(h, dtype=float), (m,))
    n_eff = np.broadcast_to(np.asarray(n_eff, dtype=float), (m,))
    hinv2 = 1.0 / (h * h)
    s0 = S[:, 0]
    has_mass = s0 > MASS_FLOOR
    kde = np.where(has_mass, s0, MASS_FLOOR) / (np.sqrt(_TWO_PI) * n_eff * h)
    # work with a fixed width of 3 internally; the quadratic column stays
    # zero for p=1 so the same objective code serves both degrees
    coef = np.zeros((m, 3))
    coef[:, 0] = np.log(np.maximum(kde, 1e-12))
    converged = np.zeros(m, dtype=bool)
    done = ~has_mass
    obj = _objective_1d(coef, _pad_s(S), hinv2, n_eff, p)
    n_iter = 0
    while not done.all() and n_iter < MAX_ITER:
        n_iter += 1
        idx = np.flatnonzero(~done)
        cc = coef[idx]
        ss = _pad_s(S[idx])
        ne = n_eff[idx]
        av = hinv2[idx] - 2.0 * cc[:, 2] if p == 2 else hinv2[idx]
        var = 1.0 / av
        mu = cc[:, 1] * var
        log_i0 = (
            0.5 * np.log(_TWO_PI) - 0.5 * np.log(av) + cc[:, 0] + 0.5 * cc[:, 1] * mu
        )
        i0 = np.exp(log_i0)
        mom = _normal_moments_1d(mu, var, 2 * p)
        et = np.stack([mom[j] for j in range(k)], axis=1)
        grad = ss[:, :k] - (ne * i0)[:, None] * et
        scale = np.maximum(1.0, ss[:, 0])
        new_conv = np.max(np.abs(grad), axis=1) <= GRAD_TOL * scale
        if new_conv.any():
            which = idx[new_conv]
            converged[which] = True
            done[which] = True
        live = ~new_conv
        if not live.any():
            continue
        jdx = idx[live]
        cc, ss, ne, i0, grad = cc[live], ss[live], ne[live], i0[live], grad[live]
        mm = np.empty((jdx.size, k, k))
        for r in range(k):
            for c in range(r, k):
                mom_rc = mom[r + c][live]
                mm[:, r, c] = mom_rc
                mm[:, c, r] = mom_rc
        rhs = grad / (ne * i0)[:, None]
        try:
            delta = np.linalg.solve(mm, rhs[..., None])[..., 0]
        except np.linalg.LinAlgError:
            mm = mm + 1e-10 * np.eye(k)[None, :, :] * (
                1.0 + mm.reshape(jdx.size, -1).max(axis=1)[:, None, None]
            )
            delta = np.linalg.solve(mm, rhs[..., None])[..., 0]
        slope = (grad * delta).sum(axis=1)
        base = obj[jdx]
        step = np.ones(jdx.size)
        accepted = np.zeros(jdx.size, dtype=bool)
        c_new = cc.copy()
        for _ in range(40):
            trial = cc.copy()
            trial[:, :k] = cc[:, :k] + step[:, None] * delta
            trial_obj = _objective_1d(trial, ss, hinv2[jdx], ne, p)
            ok = ~accepted & (trial_obj >= base + 1e-4 * step * slope)
            if ok.any():
                c_new[ok] = trial[ok]
                obj[jdx[ok]] = trial_obj[ok]
                accepted |= ok
            if accepted.all():
                break
            step = np.where(accepted, step, step * 0.5)
        stuck = ~accepted
        if stuck.any():
            done[jdx[stuck]] = True
        coef[jdx] = c_new
    return coef[:, :k], converged, has_mass, n_iter


def _pad_s(S):
    if S.shape[1] == 3:
        return S
    return np.column_stack((S, np.zeros((S.shape[0], 3 - S.shape[1]))))


def _moments_1d(data, ev, h, p, chunk=2048):
    """Kernel-weighted monomial sums around univariate evaluation points."""
    m = ev.shape[0]
    h = np.broadcast_to(np.asarray(h, dtype=float), (m,))
    S = np.empty((m, p + 1))
    for lo in range(0, m, chunk):
        sl = slice(lo, min(lo + chunk, m))
        z = data[None, :] - ev[sl][:, None]
        w = np.exp(-0.5 * (z / h[sl][:, None]) ** 2)
        S[sl, 0] = w.sum(axis=1)
        S[sl, 1] = (w * z).sum(axis=1)
        if p == 2:
            S[sl, 2] = (w * z * z).sum(axis=1)
    return S


# ---------------------------------------------------------------------------
# Public operations

def loclik_objective(ts: TransformedSample, H: BandwidthMatrix, p: int, at, a) -> float:
    """Value of the local likelihood objective at coefficient vector a.

    Returns -inf when the integral term diverges (p=2 with H^{-1} - 2Q not
    positive definite).
    """
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    a = np.asarray(a, dtype=float).ravel()
    k = len(_EXPS_2D[p])
    if a.shape != (k,):
        raise ValueError(f"coefficient vector must have length {k} for p={p}")
    at = np.asarray(at, dtype=float).ravel()
    if at.shape != (2,):
        raise ValueError("evaluation point must be a pair (s, t)")
    hinv = H.inv
    S = _moments_2d(
        ts.as_points(), at[None, :], hinv[0, 0], hinv[0, 1], hinv[1, 1], p
    )
    obj = _objective_2d(
        a[None, :], S, np.array([hinv[0, 0]]), np.array([hinv[0, 1]]),
        np.array([hinv[1, 1]]), float(ts.n), p,
    )
    return float(obj[0])


def loclik_fit_point(ts: TransformedSample, H: BandwidthMatrix, p: int, at) -> LocalFit:
    """Maximise the local likelihood at one plane point with fixed H."""
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    at = np.asarray(at, dtype=float).ravel()
    if at.shape != (2,):
        raise ValueError("evaluation point must be a pair (s, t)")
    hinv = H.inv
    S = _moments_2d(ts.as_points(), at[None, :], hinv[0, 0], hinv[0, 1], hinv[1, 1], p)
    if S[0, 0] <= MASS_FLOOR:
        raise LoclikError("no local data: kernel weights vanish at the evaluation point")
    a, conv, _, n_iter = _newton_2d(
        S, hinv[0, 0], hinv[0, 1], hinv[1, 1], H.det, float(ts.n), p
    )
    return LocalFit(p=p, coef=a[0], converged=bool(conv[0]), n_iter=n_iter)


def knn_distance(scores: np.ndarray, kappa: float, k: int, at) -> float:
    """Distance to the k-th nearest score under sqrt(dq^2 + kappa^2 dr^2)."""
    scores = np.asarray(scores, dtype=float)
    if scores.ndim != 2 or scores.shape[1] != 2:
        raise ValueError("scores must have shape (n, 2)")
    if not 1 <= k <= scores.shape[0]:
        raise ValueError("k must lie in [1, n]")
    at = np.asarray(at, dtype=float).ravel()
    dq = scores[:, 0] - at[0]
    dr = scores[:, 1] - at[1]
    d2 = dq * dq + kappa * kappa * dr * dr
    return float(np.sqrt(np.partition(d2, k - 1)[k - 1]))


def _knn_radii(scores: np.ndarray, kappa: float, k: int, at_qr: np.ndarray) -> np.ndarray:
    """Batch k-th neighbour distances via a KD-tree on kappa-scaled scores."""
    scaled = np.column_stack((scores[:, 0], kappa * scores[:, 1]))
    tree = cKDTree(scaled)
    query = np.column_stack((at_qr[:, 0], kappa * at_qr[:, 1]))
    dist, _ = tree.query(query, k=[k])
    return np.maximum(dist[:, 0], 1e-10)


def _knn_hinv_st(bw: KnnBandwidth, radii: np.ndarray):
    """Components of H_ST^{-1} = W' diag(1, kappa^2) W / D^2 and det H_ST."""
    w = bw.W
    k2 = bw.kappa * bw.kappa
    d2 = radii * radii
    hi11 = (w[0, 0] * w[0, 0] + k2 * w[1, 0] * w[1, 0]) / d2
    hi12 = (w[0, 0] * w[0, 1] + k2 * w[1, 0] * w[1, 1]) / d2
    hi22 = (w[0, 1] * w[0, 1] + k2 * w[1, 1] * w[1, 1]) / d2
    det_h = d2 * d2 / k2
    return hi11, hi12, hi22, det_h


def _fit_batch_st(ts: TransformedSample, bandwidth, p: int, st: np.ndarray):
    """Fit the local polynomial at plane points, fixed or k-NN bandwidth."""
    data = ts.as_points()
    if isinstance(bandwidth, BandwidthMatrix):
        hinv = bandwidth.inv
        hi11, hi12, hi22 = hinv[0, 0], hinv[0, 1], hinv[1, 1]
        det_h = bandwidth.det
    elif isinstance(bandwidth, KnnBandwidth):
        if bandwidth.k > ts.n:
            raise ValueError("k exceeds the sample size")
        scores = data @ bandwidth.W.T
        at_qr = st @ bandwidth.W.T
        radii = _knn_radii(scores, bandwidth.kappa, bandwidth.k, at_qr)
        hi11, hi12, hi22, det_h = _knn_hinv_st(bandwidth, radii)
    else:
        raise TypeError("bandwidth must be BandwidthMatrix or KnnBandwidth")
    S = _moments_2d(data, st, hi11, hi12, hi22, p)
    a, conv, has_mass, _ = _newton_2d(S, hi11, hi12, hi22, det_h, float(ts.n), p)
    return a, conv, has_mass


def improved_estimate(ts: TransformedSample, bandwidth, p: int, at):
    """Local log-polynomial copula density estimate at point(s) of the square.

    ``bandwidth`` is a BandwidthMatrix or a KnnBandwidth; ``at`` is a (u,v)
    pair or an (m,2) array.  Raises LoclikError when some evaluation point
    has no kernel mass at all.
    """
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    ev = np.asarray(at, dtype=float)
    scalar = ev.ndim == 1
    ev = ev[None, :] if scalar else ev
    if ev.ndim != 2 or ev.shape[1] != 2:
        raise ValueError("evaluation points must have shape (m, 2)")
    st = np.column_stack((probit(ev[:, 0]), probit(ev[:, 1])))
    a, conv, has_mass = _fit_batch_st(ts, bandwidth, p, st)
    if not has_mass.all():
        raise LoclikError("no local data at some evaluation points")
    out = np.exp(a[:, 0]) / (normal_pdf(st[:, 0]) * normal_pdf(st[:, 1]))
    return float(out[0]) if scalar else out


def improved_grid_values(ts: TransformedSample, bandwidth, p: int, st: np.ndarray):
    """Plane-density fits at plane points; returns (exp(a0), converged mask).

    Low-level batch entry used by grid evaluation: unconverged points keep
    their best iterate, points without kernel mass come back as zero density
    and False in the mask.
    """
    a, conv, has_mass = _fit_batch_st(ts, bandwidth, p, st)
    dens = np.where(has_mass, np.exp(a[:, 0]), 0.0)
    return dens, conv & has_mass
