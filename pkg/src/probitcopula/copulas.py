"""Parametric copula families used as simulation ground truth.

Densities, exact samplers and Kendall-tau parameter maps for the
independence, Gaussian, Student-t, Frank, Gumbel and Clayton families.
Samplers draw genuine copula data (uniform margins); the estimators
themselves never see these uniforms directly, only ranks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import gammaln, ndtr, ndtri, stdtr, stdtrit

__all__ = [
    "CopulaModel",
    "FAMILIES",
    "copula_density",
    "sample_copula",
    "tau_to_param",
    "parse_copula_spec",
]

FAMILIES = ("independence", "gaussian", "t", "frank", "gumbel", "clayton")

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class CopulaModel:
    """A family tag plus its parameter (rho or theta) and, for t, the df."""

    family: str
    param: float = 0.0
    nu: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown copula family {self.family!r}")
        p = float(self.param)
        if self.family in ("gaussian", "t") and not (-1.0 < p < 1.0):
            raise ValueError("correlation parameter must lie in (-1,1)")
        if self.family == "frank" and p == 0.0:
            raise ValueError("frank copula requires theta != 0")
        if self.family == "gumbel" and p < 1.0:
            raise ValueError("gumbel copula requires theta >= 1")
        if self.family == "clayton" and p <= 0.0:
            raise ValueError("clayton copula requires theta > 0")
        if self.family == "t":
            if self.nu is None or self.nu <= 0:
                raise ValueError("t copula requires nu > 0")
        elif self.nu is not None:
            raise ValueError("nu is only meaningful for the t family")
        object.__setattr__(self, "param", p)

    def spec(self) -> str:
        if self.family == "independence":
            return "independence"
        if self.family == "gaussian":
            return f"gaussian:rho={self.param:g}"
        if self.family == "t":
            return f"t:rho={self.param:g},nu={self.nu:g}"
        return f"{self.family}:theta={self.param:g}"


def parse_copula_spec(text: str) -> CopulaModel:
    """Parse strings like ``gaussian:rho=0.59`` or ``t:rho=0.31,nu=4``.

    ``tau=`` is accepted in place of the natural parameter and converted
    through ``tau_to_param``.
    """
    text = text.strip()
    if not text:
        raise ValueError("empty copula spec")
    family, _, rest = text.partition(":")
    family = family.strip().lower()
    if family not in FAMILIES:
        raise ValueError(f"unknown copula family {family!r}")
    kv = {}
    if rest.strip():
        for item in rest.split(","):
            key, _, value = item.partition("=")
            if not _:
                raise ValueError(f"malformed copula spec item {item!r}")
            kv[key.strip().lower()] = float(value)
    nu = kv.pop("nu", None)
    if "tau" in kv:
        param = tau_to_param(family, kv.pop("tau"))
    elif "rho" in kv:
        param = kv.pop("rho")
    elif "theta" in kv:
        param = kv.pop("theta")
    else:
        param = 0.0
    if kv:
        raise ValueError(f"unrecognised copula spec keys {sorted(kv)}")
    if family == "t":
        return CopulaModel(family, param, 4.0 if nu is None else nu)
    if nu is not None:
        raise ValueError("nu is only meaningful for the t family")
    return CopulaModel(family, param)


def _check_interior(u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(u <= 0.0) or np.any(u >= 1.0) or np.any(v <= 0.0) or np.any(v >= 1.0):
        raise ValueError("copula density is evaluated strictly inside (0,1)^2")
    return u, v


def _gaussian_density(rho, u, v):
    s = ndtri(u)
    t = ndtri(v)
    r2 = 1.0 - rho * rho
    expo = -(rho * rho * (s * s + t * t) - 2.0 * rho * s * t) / (2.0 * r2)
    return np.exp(expo) / np.sqrt(r2)


def _t_density(rho, nu, u, v):
    x = stdtrit(nu, u)
    y = stdtrit(nu, v)
    r2 = 1.0 - rho * rho
    q = (x * x - 2.0 * rho * x * y + y * y) / r2
    log_joint = (
        gammaln((nu + 2.0) / 2.0)
        - gammaln(nu / 2.0)
        - np.log(nu * np.pi)
        - 0.5 * np.log(r2)
        - (nu + 2.0) / 2.0 * np.log1p(q / nu)
    )
    log_t1 = (
        gammaln((nu + 1.0) / 2.0)
        - gammaln(nu / 2.0)
        - 0.5 * np.log(nu * np.pi)
    )
    log_marg = (
        2.0 * log_t1
        - (nu + 1.0) / 2.0 * (np.log1p(x * x / nu) + np.log1p(y * y / nu))
    )
    return np.exp(log_joint - log_marg)


def _frank_density(theta, u, v):
    # c = theta (1-e^{-theta}) e^{-theta(u+v)} / [(1-e^{-theta}) - (1-e^{-theta u})(1-e^{-theta v})]^2
    em = -np.expm1(-theta)
    eu = -np.expm1(-theta * u)
    ev = -np.expm1(-theta * v)
    denom = em - eu * ev
    return theta * em * np.exp(-theta * (u + v)) / (denom * denom)


def _gumbel_density(theta, u, v):
    if theta == 1.0:
        return np.ones(np.broadcast(u, v).shape)
    x = -np.log(u)
    y = -np.log(v)
    lx = np.log(x)
    ly = np.log(y)
    log_a = np.logaddexp(theta * lx, theta * ly)  # log(x^th + y^th)
    s = np.exp(log_a / theta)
    log_c = (
        -s
        + x
        + y
        + (theta - 1.0) * (lx + ly)
        + (1.0 / theta - 2.0) * log_a
        + np.log(s + theta - 1.0)
    )
    return np.exp(log_c)


def _clayton_density(theta, u, v):
    lu = np.log(u)
    lv = np.log(v)
    core = np.exp(-theta * lu) + np.exp(-theta * lv) - 1.0
    log_c = np.log1p(theta) - (theta + 1.0) * (lu + lv) - (2.0 + 1.0 / theta) * np.log(core)
    return np.exp(log_c)


def copula_density(model: CopulaModel, u, v):
    """Copula density c(u,v), vectorised over interior points of the square."""
    u, v = _check_interior(u, v)
    scalar = u.ndim == 0 and v.ndim == 0
    if model.family == "independence":
        out = np.ones(np.broadcast(u, v).shape)
    elif model.family == "gaussian":
        out = _gaussian_density(model.param, u, v)
    elif model.family == "t":
        out = _t_density(model.param, model.nu, u, v)
    elif model.family == "frank":
        out = _frank_density(model.param, u, v)
    elif model.family == "gumbel":
        out = _gumbel_density(model.param, u, v)
    else:
        out = _clayton_density(model.param, u, v)
    if scalar:
        return float(out)
    return out


def sample_copula(model: CopulaModel, n: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """Draw n pairs with uniform margins from the model, deterministically in seed.

    ``seed`` may be an integer or a ``numpy.random.Generator``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    fam = model.family
    if fam == "independence":
        return rng.random(n), rng.random(n)
    if fam == "gaussian":
        rho = model.param
        z1 = rng.standard_normal(n)
        z2 = rho * z1 + np.sqrt(1.0 - rho * rho) * rng.standard_normal(n)
        return ndtr(z1), ndtr(z2)
    if fam == "t":
        rho, nu = model.param, model.nu
        z1 = rng.standard_normal(n)
        z2 = rho * z1 + np.sqrt(1.0 - rho * rho) * rng.standard_normal(n)
        w = np.sqrt(rng.chisquare(nu, n) / nu)
        return stdtr(nu, z1 / w), stdtr(nu, z2 / w)
    if fam == "clayton":
        theta = model.param
        g = rng.gamma(1.0 / theta, 1.0, n)
        e = rng.exponential(size=(2, n))
        u = (1.0 + e[0] / g) ** (-1.0 / theta)
        v = (1.0 + e[1] / g) ** (-1.0 / theta)
        return u, v
    if fam == "gumbel":
        return _sample_gumbel(model.param, n, rng)
    if fam == "frank":
        return _sample_frank(model.param, n, rng)
    raise ValueError(f"no sampler for family {fam!r}")


def _sample_gumbel(theta, n, rng):
    # Positive-stable frailty: U_j = exp(-(E_j / M)^{1/theta}) with M ~ stable(1/theta).
    alpha = 1.0 / theta
    if theta == 1.0:
        return rng.random(n), rng.random(n)
    th = rng.uniform(0.0, np.pi, n)
    w = rng.exponential(size=n)
    m = (np.sin(alpha * th) / np.sin(th) ** (1.0 / alpha)) * (
        np.sin((1.0 - alpha) * th) / w
    ) ** ((1.0 - alpha) / alpha)
    e = rng.exponential(size=(2, n))
    u = np.exp(-((e[0] / m) ** alpha))
    v = np.exp(-((e[1] / m) ** alpha))
    return u, v


def _sample_frank(theta, n, rng):
    # Conditional inversion: solve dC/du = w for v given u.
    u = rng.random(n)
    w = rng.random(n)
    em = np.expm1(-theta)  # e^{-theta} - 1
    eu = np.exp(-theta * u)
    y = 1.0 + w * em / (eu - w * (eu - 1.0))
    v = -np.log(y) / theta
    return u, v


def _debye1(theta: float) -> float:
    """D1(theta) = (1/theta) * int_0^theta t/(e^t - 1) dt."""

    def integrand(t):
        if t < 1e-8:
            return 1.0 - t / 2.0
        return t / np.expm1(t)

    value, _ = quad(integrand, 0.0, theta, limit=200)
    return value / theta


def _frank_tau(theta: float) -> float:
    return 1.0 - (4.0 / theta) * (1.0 - _debye1(theta))


def tau_to_param(family: str, tau: float) -> float:
    """Invert Kendall's tau to the family's natural parameter."""
    if family not in FAMILIES:
        raise ValueError(f"unknown copula family {family!r}")
    if family == "independence":
        if tau != 0.0:
            raise ValueError("independence copula has tau = 0")
        return 0.0
    if family in ("gaussian", "t"):
        if not (-1.0 < tau < 1.0):
            raise ValueError("tau must lie in (-1,1)")
        return float(np.sin(np.pi * tau / 2.0))
    if family == "gumbel":
        if not (0.0 <= tau < 1.0):
            raise ValueError("gumbel copula needs tau in [0,1)")
        return 1.0 / (1.0 - tau)
    if family == "clayton":
        if not (0.0 < tau < 1.0):
            raise ValueError("clayton copula needs tau in (0,1)")
        return 2.0 * tau / (1.0 - tau)
    # frank: invert the Debye relation by bisection; theta is odd in tau
    if tau == 0.0:
        raise ValueError("frank copula requires tau != 0")
    sign = 1.0 if tau > 0 else -1.0
    target = abs(tau)
    lo, hi = 1e-6, 100.0
    if _frank_tau(hi) < target:
        raise ValueError("tau out of invertible range for frank copula")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _frank_tau(mid) < target:
            lo = mid
        else:
            hi = mid
        if abs(_frank_tau(mid) - target) <= 1e-8:
            return sign * mid
    return sign * 0.5 * (lo + hi)
