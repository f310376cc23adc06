"""Parametric bivariate copulas ("pair-copulas") with rotations.

Families
--------
``indep``, ``gaussian``, ``studentt`` (continuous pairs only), ``clayton``,
``gumbel``, ``frank`` and ``joe``.  The single-parameter Archimedean
families with asymmetric tail behaviour (``clayton``, ``gumbel``, ``joe``)
support rotations 0/90/180/270; ``frank`` and the elliptical families cover
negative dependence natively and are never rotated.

Rotation conventions (base copula ``C``)::

    C_90(u, v)  = v - C(1 - u, v)
    C_180(u, v) = u + v - 1 + C(1 - u, 1 - v)
    C_270(u, v) = u - C(u, 1 - v)

so rotations 90/270 mirror one axis (negating Kendall's tau) and 180 is the
survival copula.

Likelihood contributions for pairs with discrete components use CDF finite
differences: one-sided differences of the conditional CDF when one side is
discrete and rectangle probabilities when both are.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import integrate, optimize, stats
from scipy.special import gammaln, ndtr, ndtri, stdtr, stdtrit

from .bvn import bvn_cdf
from .errors import NoConvergence, TooFewObservations

#: Clamp applied to all copula arguments.
EPS = 1e-10

#: Floor for individual likelihood contributions before taking logs.
CONTRIB_FLOOR = 1e-300
LOG_FLOOR = math.log(CONTRIB_FLOOR)

FAMILIES = ("indep", "gaussian", "studentt", "clayton", "gumbel", "frank", "joe")
ROTATIONS = (0, 90, 180, 270)

#: Families that admit rotations (asymmetric, positive-dependence base form).
ROTATABLE = ("clayton", "gumbel", "joe")


def _clip(u):
    return np.clip(np.asarray(u, dtype=float), EPS, 1.0 - EPS)


# ---------------------------------------------------------------------------
# family primitives (base, unrotated parameterization)
#
# Each family namespace provides, on the clamped unit square:
#   logpdf(u, v, p)   log copula density
#   cdf(u, v, p)      C(u, v)
#   hfunc(x, y, p)    conditional CDF P(X <= x | Y = y) = dC/dy  (families
#                     here are exchangeable, so one direction suffices)
#   hinv(q, y, p)     inverse of hfunc in x, or None to use bisection
#   tau(p) / par_from_tau(tau)
# ---------------------------------------------------------------------------


class _Indep:
    name = "indep"
    npar = 0
    bounds = ()
    tau_range = (0.0, 0.0)

    @staticmethod
    def logpdf(u, v, p):
        return np.zeros(np.broadcast(u, v).shape)

    @staticmethod
    def cdf(u, v, p):
        return u * v

    @staticmethod
    def hfunc(x, y, p):
        return np.broadcast_to(x, np.broadcast(x, y).shape).astype(float)

    @staticmethod
    def hinv(q, y, p):
        return np.broadcast_to(q, np.broadcast(q, y).shape).astype(float)

    @staticmethod
    def tau(p):
        return 0.0

    @staticmethod
    def par_from_tau(tau):
        raise ValueError("independence copula has no parameter")


class _Gaussian:
    name = "gaussian"
    npar = 1
    bounds = ((-0.9999, 0.9999),)

    @staticmethod
    def logpdf(u, v, p):
        rho = p[0]
        x, y = ndtri(u), ndtri(v)
        r2 = 1.0 - rho * rho
        return -0.5 * math.log(r2) + (
            2.0 * rho * x * y - rho * rho * (x * x + y * y)
        ) / (2.0 * r2)

    @staticmethod
    def cdf(u, v, p):
        return bvn_cdf(ndtri(u), ndtri(v), p[0])

    @staticmethod
    def hfunc(x, y, p):
        rho = p[0]
        return ndtr((ndtri(x) - rho * ndtri(y)) / math.sqrt(1.0 - rho * rho))

    @staticmethod
    def hinv(q, y, p):
        rho = p[0]
        return ndtr(ndtri(q) * math.sqrt(1.0 - rho * rho) + rho * ndtri(y))

    @staticmethod
    def tau(p):
        return 2.0 / math.pi * math.asin(p[0])

    @staticmethod
    def par_from_tau(tau):
        return (math.sin(math.pi * tau / 2.0),)

    @classmethod
    def tau_range_fn(cls):
        r = 2.0 / math.pi * math.asin(cls.bounds[0][1])
        return (-r, r)


class _StudentT:
    name = "studentt"
    npar = 2
    bounds = ((-0.999, 0.999), (2.05, 30.0))

    @staticmethod
    def logpdf(u, v, p):
        rho, nu = p
        x, y = stdtrit(nu, u), stdtrit(nu, v)
        r2 = 1.0 - rho * rho
        quad_form = (x * x - 2.0 * rho * x * y + y * y) / (nu * r2)
        log_joint = (
            gammaln((nu + 2.0) / 2.0)
            + gammaln(nu / 2.0)
            - 2.0 * gammaln((nu + 1.0) / 2.0)
            - 0.5 * math.log(r2)
        )
        log_joint = log_joint - (nu + 2.0) / 2.0 * np.log1p(quad_form)
        log_margs = -(nu + 1.0) / 2.0 * (np.log1p(x * x / nu) + np.log1p(y * y / nu))
        return log_joint - log_margs

    @staticmethod
    def cdf(u, v, p):
        rho, nu = p
        u = np.atleast_1d(u)
        v = np.atleast_1d(v)
        out = np.empty(np.broadcast(u, v).shape)
        ub, vb = np.broadcast_arrays(u, v)
        scale = math.sqrt(1.0 - rho * rho)
        for i in np.ndindex(out.shape):
            xu = float(stdtrit(nu, ub[i]))
            yv = float(stdtrit(nu, vb[i]))

            def integrand(t):
                cond = (yv - rho * t) / (scale * math.sqrt((nu + t * t) / (nu + 1.0)))
                return stats.t.pdf(t, nu) * stdtr(nu + 1.0, cond)

            val, _ = integrate.quad(
                integrand, -np.inf, xu, epsabs=1e-12, epsrel=1e-10, limit=200
            )
            out[i] = val
        return out.reshape(np.broadcast(u, v).shape)

    @staticmethod
    def hfunc(x, y, p):
        rho, nu = p
        tx, ty = stdtrit(nu, x), stdtrit(nu, y)
        scale = np.sqrt((1.0 - rho * rho) * (nu + ty * ty) / (nu + 1.0))
        return stdtr(nu + 1.0, (tx - rho * ty) / scale)

    @staticmethod
    def hinv(q, y, p):
        rho, nu = p
        ty = stdtrit(nu, y)
        scale = np.sqrt((1.0 - rho * rho) * (nu + ty * ty) / (nu + 1.0))
        return stdtr(nu, stdtrit(nu + 1.0, q) * scale + rho * ty)

    @staticmethod
    def tau(p):
        return 2.0 / math.pi * math.asin(p[0])

    @staticmethod
    def par_from_tau(tau):
        # tau pins the association parameter; tail df starts at the
        # optimizer default
        return (math.sin(math.pi * tau / 2.0), 5.0)

    @classmethod
    def tau_range_fn(cls):
        r = 2.0 / math.pi * math.asin(cls.bounds[0][1])
        return (-r, r)


class _Clayton:
    name = "clayton"
    npar = 1
    bounds = ((1e-4, 28.0),)

    @staticmethod
    def _log_gen_sum(u, v, theta):
        # log(u^-theta + v^-theta - 1), stable for tiny u, v
        a = -theta * np.log(u)
        b = -theta * np.log(v)
        m = np.maximum(a, b)
        return m + np.log(np.exp(a - m) + np.exp(b - m) - np.exp(-m))

    @classmethod
    def logpdf(cls, u, v, p):
        theta = p[0]
        la = cls._log_gen_sum(u, v, theta)
        return (
            math.log1p(theta)
            - (theta + 1.0) * (np.log(u) + np.log(v))
            - (2.0 + 1.0 / theta) * la
        )

    @classmethod
    def cdf(cls, u, v, p):
        return np.exp(-cls._log_gen_sum(u, v, p[0]) / p[0])

    @classmethod
    def hfunc(cls, x, y, p):
        theta = p[0]
        la = cls._log_gen_sum(x, y, theta)
        return np.exp(-(theta + 1.0) * np.log(y) - (1.0 + 1.0 / theta) * la)

    @staticmethod
    def hinv(q, y, p):
        theta = p[0]
        log_qy = np.log(q) + (theta + 1.0) * np.log(y)
        gen = np.exp(-theta / (theta + 1.0) * log_qy) + 1.0 - np.exp(-theta * np.log(y))
        return np.exp(-np.log(gen) / theta)

    @staticmethod
    def tau(p):
        return p[0] / (p[0] + 2.0)

    @staticmethod
    def par_from_tau(tau):
        return (2.0 * tau / (1.0 - tau),)

    @classmethod
    def tau_range_fn(cls):
        lo, hi = cls.bounds[0]
        return (lo / (lo + 2.0), hi / (hi + 2.0))


class _Gumbel:
    name = "gumbel"
    npar = 1
    bounds = ((1.0, 20.0),)

    @staticmethod
    def _log_s(u, v, delta):
        # log((-log u)^delta + (-log v)^delta)
        a = delta * np.log(-np.log(u))
        b = delta * np.log(-np.log(v))
        m = np.maximum(a, b)
        return m + np.log1p(np.exp(np.minimum(a, b) - m))

    @classmethod
    def cdf(cls, u, v, p):
        return np.exp(-np.exp(cls._log_s(u, v, p[0]) / p[0]))

    @classmethod
    def logpdf(cls, u, v, p):
        delta = p[0]
        lx = np.log(-np.log(u))
        ly = np.log(-np.log(v))
        ls = cls._log_s(u, v, delta)
        s_pow = np.exp(ls / delta)
        return (
            -s_pow
            - np.log(u)
            - np.log(v)
            + (delta - 1.0) * (lx + ly)
            + (1.0 / delta - 2.0) * ls
            + np.log(s_pow + delta - 1.0)
        )

    @classmethod
    def hfunc(cls, x, y, p):
        delta = p[0]
        ls = cls._log_s(x, y, delta)
        log_h = (
            -np.exp(ls / delta)
            + (delta - 1.0) * np.log(-np.log(y))
            + (1.0 / delta - 1.0) * ls
            - np.log(y)
        )
        return np.exp(log_h)

    hinv = None

    @staticmethod
    def tau(p):
        return 1.0 - 1.0 / p[0]

    @staticmethod
    def par_from_tau(tau):
        return (1.0 / (1.0 - tau),)

    @classmethod
    def tau_range_fn(cls):
        return (0.0, 1.0 - 1.0 / cls.bounds[0][1])


class _Frank:
    name = "frank"
    npar = 1
    bounds = ((-35.0, 35.0),)

    @staticmethod
    def _g(x, theta):
        return np.expm1(-theta * x)

    @classmethod
    def cdf(cls, u, v, p):
        theta = p[0]
        gu, gv, g1 = cls._g(u, theta), cls._g(v, theta), cls._g(1.0, theta)
        return -np.log1p(gu * gv / g1) / theta

    @classmethod
    def logpdf(cls, u, v, p):
        theta = p[0]
        gu, gv, g1 = cls._g(u, theta), cls._g(v, theta), cls._g(1.0, theta)
        denom = -g1 - gu * gv
        num = -theta * g1 * np.exp(-theta * (u + v))
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log(num) - 2.0 * np.log(np.abs(denom))

    @classmethod
    def hfunc(cls, x, y, p):
        theta = p[0]
        gx, gy, g1 = cls._g(x, theta), cls._g(y, theta), cls._g(1.0, theta)
        return np.exp(-theta * y) * gx / (g1 + gx * gy)

    @classmethod
    def hinv(cls, q, y, p):
        theta = p[0]
        gy, g1 = cls._g(y, theta), cls._g(1.0, theta)
        gx = q * g1 / (np.exp(-theta * y) - q * gy)
        return -np.log1p(gx) / theta

    @staticmethod
    def tau(p):
        theta = p[0]
        return math.copysign(_frank_tau_abs(abs(theta)), theta)

    @staticmethod
    def par_from_tau(tau):
        return (math.copysign(_frank_theta_abs(abs(tau)), tau),)

    @classmethod
    def tau_range_fn(cls):
        r = _frank_tau_abs(cls.bounds[0][1])
        return (-r, r)


class _Joe:
    name = "joe"
    npar = 1
    bounds = ((1.0, 30.0),)

    @staticmethod
    def _log_t(u, v, delta):
        # log(ub^d + vb^d - ub^d * vb^d) with ub = 1-u, vb = 1-v
        a = delta * np.log1p(-u)
        b = delta * np.log1p(-v)
        m = np.maximum(a, b)
        return m + np.log(np.exp(a - m) + np.exp(b - m) - np.exp(a + b - m))

    @classmethod
    def cdf(cls, u, v, p):
        return 1.0 - np.exp(cls._log_t(u, v, p[0]) / p[0])

    @classmethod
    def logpdf(cls, u, v, p):
        delta = p[0]
        lt = cls._log_t(u, v, delta)
        return (
            (1.0 / delta - 2.0) * lt
            + (delta - 1.0) * (np.log1p(-u) + np.log1p(-v))
            + np.log(delta - 1.0 + np.exp(lt))
        )

    @classmethod
    def hfunc(cls, x, y, p):
        delta = p[0]
        lt = cls._log_t(x, y, delta)
        one_minus_xd = -np.expm1(delta * np.log1p(-x))
        with np.errstate(divide="ignore"):
            log_h = (
                (1.0 / delta - 1.0) * lt
                + (delta - 1.0) * np.log1p(-y)
                + np.log(one_minus_xd)
            )
        return np.exp(log_h)

    hinv = None

    @staticmethod
    def tau(p):
        return _joe_tau(p[0])

    @staticmethod
    def par_from_tau(tau):
        if tau <= 0.0:
            return (1.0,)
        lo, hi = _Joe.bounds[0]
        return (optimize.brentq(lambda d: _joe_tau(d) - tau, lo + 1e-9, hi, xtol=1e-10),)

    @classmethod
    def tau_range_fn(cls):
        return (0.0, _joe_tau(cls.bounds[0][1]))


@lru_cache(maxsize=512)
def _frank_tau_abs(theta: float) -> float:
    """Kendall tau of the Frank copula for theta > 0 (Debye-1 quadrature)."""
    if theta == 0.0:
        return 0.0
    debye, _ = integrate.quad(lambda t: t / math.expm1(t), 0.0, theta, limit=200)
    return 1.0 - 4.0 / theta * (1.0 - debye / theta)


@lru_cache(maxsize=512)
def _frank_theta_abs(tau: float) -> float:
    if tau <= 0.0:
        raise ValueError("frank copula needs a nonzero tau target")
    hi = _Frank.bounds[0][1]
    if tau >= _frank_tau_abs(hi):
        raise ValueError(f"tau {tau} not attainable by the frank copula")
    return optimize.brentq(lambda t: _frank_tau_abs(t) - tau, 1e-6, hi, xtol=1e-10)


@lru_cache(maxsize=512)
def _joe_tau(delta: float) -> float:
    """Kendall tau of the Joe copula via the Archimedean generator integral."""
    if delta <= 1.0:
        return 0.0
    expo = 2.0 / delta - 2.0

    def integrand(w):
        if w <= 0.0 or w >= 1.0:
            return 0.0
        return math.log1p(-w) * (1.0 - w) * w**expo

    val, _ = integrate.quad(
        integrand, 0.0, 1.0, points=[1e-6, 1e-4, 1e-2, 0.5], limit=500
    )
    return 1.0 + 4.0 * val / delta**2


_FAM = {
    f.name: f for f in (_Indep, _Gaussian, _StudentT, _Clayton, _Gumbel, _Frank, _Joe)
}


def family_tau_range(family: str) -> tuple[float, float]:
    """Attainable Kendall-tau interval of the base (unrotated) family."""
    fam = _FAM[family]
    if hasattr(fam, "tau_range_fn"):
        return fam.tau_range_fn()
    return fam.tau_range


# ---------------------------------------------------------------------------
# rotation-aware copula object
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Bicop:
    """A bivariate copula: family, rotation and parameter vector."""

    family: str
    rotation: int = 0
    params: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.family not in _FAM:
            raise ValueError(f"unknown copula family {self.family!r}")
        if self.rotation not in ROTATIONS:
            raise ValueError(f"rotation must be one of {ROTATIONS}")
        if self.rotation != 0 and self.family not in ROTATABLE:
            raise ValueError(f"family {self.family!r} does not support rotations")
        params = tuple(float(p) for p in self.params)
        object.__setattr__(self, "params", params)
        fam = _FAM[self.family]
        if len(params) != fam.npar:
            raise ValueError(
                f"{self.family} expects {fam.npar} parameter(s), got {len(params)}"
            )
        for p, (lo, hi) in zip(params, fam.bounds):
            if not lo <= p <= hi:
                raise ValueError(
                    f"{self.family} parameter {p} outside [{lo}, {hi}]"
                )
        if self.family == "frank" and params[0] == 0.0:
            raise ValueError("frank copula parameter must be nonzero")

    # -- core surface ------------------------------------------------------

    def cdf(self, u, v):
        u, v = _clip(u), _clip(v)
        fam = _FAM[self.family]
        if self.rotation == 0:
            return fam.cdf(u, v, self.params)
        if self.rotation == 90:
            return v - fam.cdf(1.0 - u, v, self.params)
        if self.rotation == 180:
            return u + v - 1.0 + fam.cdf(1.0 - u, 1.0 - v, self.params)
        return u - fam.cdf(u, 1.0 - v, self.params)

    def logpdf(self, u, v):
        u, v = _clip(u), _clip(v)
        fam = _FAM[self.family]
        if self.rotation == 90:
            u = 1.0 - u
        elif self.rotation == 180:
            u, v = 1.0 - u, 1.0 - v
        elif self.rotation == 270:
            v = 1.0 - v
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = fam.logpdf(u, v, self.params)
        return np.nan_to_num(out, nan=LOG_FLOOR, neginf=LOG_FLOOR, posinf=700.0)

    def pdf(self, u, v):
        return np.exp(self.logpdf(u, v))

    def hfunc(self, u, v, direction="1|2"):
        """Conditional CDF: ``1|2`` is P(U <= u | V = v), ``2|1`` the reverse."""
        u, v = _clip(u), _clip(v)
        fam = _FAM[self.family]
        h = fam.hfunc
        p = self.params
        if direction == "1|2":
            if self.rotation == 0:
                out = h(u, v, p)
            elif self.rotation == 90:
                out = 1.0 - h(1.0 - u, v, p)
            elif self.rotation == 180:
                out = 1.0 - h(1.0 - u, 1.0 - v, p)
            else:
                out = h(u, 1.0 - v, p)
        elif direction == "2|1":
            if self.rotation == 0:
                out = h(v, u, p)
            elif self.rotation == 90:
                out = h(v, 1.0 - u, p)
            elif self.rotation == 180:
                out = 1.0 - h(1.0 - v, 1.0 - u, p)
            else:
                out = 1.0 - h(1.0 - v, u, p)
        else:
            raise ValueError("direction must be '1|2' or '2|1'")
        return np.clip(out, 0.0, 1.0)

    def hinv(self, q, cond, direction="1|2"):
        """Inverse of :meth:`hfunc` in its first ("target") argument.

        For ``1|2`` returns the u with ``hfunc(u, cond) = q``; for ``2|1``
        the v with ``hfunc(cond, v, "2|1") = q``.
        """
        q, cond = _clip(q), _clip(cond)
        fam = _FAM[self.family]
        if fam.hinv is None:
            if direction == "1|2":
                fun = lambda x: self.hfunc(x, cond, "1|2")
            else:
                fun = lambda x: self.hfunc(cond, x, "2|1")
            return _bisect_monotone(fun, q)
        inv = fam.hinv
        p = self.params
        if direction == "1|2":
            if self.rotation == 0:
                out = inv(q, cond, p)
            elif self.rotation == 90:
                out = 1.0 - inv(1.0 - q, cond, p)
            elif self.rotation == 180:
                out = 1.0 - inv(1.0 - q, 1.0 - cond, p)
            else:
                out = inv(q, 1.0 - cond, p)
        elif direction == "2|1":
            if self.rotation == 0:
                out = inv(q, cond, p)
            elif self.rotation == 90:
                out = inv(q, 1.0 - cond, p)
            elif self.rotation == 180:
                out = 1.0 - inv(1.0 - q, 1.0 - cond, p)
            else:
                out = 1.0 - inv(1.0 - q, cond, p)
        else:
            raise ValueError("direction must be '1|2' or '2|1'")
        return _clip(out)

    @property
    def tau(self) -> float:
        """Kendall's tau implied by the parameters (sign follows rotation)."""
        base = _FAM[self.family].tau(self.params)
        return -base if self.rotation in (90, 270) else base

    @property
    def npar(self) -> int:
        return _FAM[self.family].npar

    def sample(self, n, rng):
        """Draw ``n`` pairs by conditional inversion."""
        w = rng.random((n, 2))
        u = w[:, 0]
        v = self.hinv(w[:, 1], u, "2|1")
        return np.column_stack([u, v])

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "rotation": self.rotation,
            "params": list(self.params),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Bicop":
        return cls(
            family=obj["family"],
            rotation=int(obj.get("rotation", 0)),
            params=tuple(obj.get("params", ())),
        )


INDEP = Bicop("indep")


def _bisect_monotone(fun, q, max_iter=200, tol=1e-13):
    """Solve fun(x) = q for x in (0, 1), fun increasing, elementwise."""
    q = np.asarray(q, dtype=float)
    lo = np.full(q.shape, EPS)
    hi = np.full(q.shape, 1.0 - EPS)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        above = fun(mid) > q
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
        if np.max(hi - lo) < tol:
            return 0.5 * (lo + hi)
    raise NoConvergence("h-function inversion did not converge in 200 bisections")


def tau_to_param(family: str, tau: float, rotation: int = 0) -> tuple:
    """Parameters whose Kendall tau matches ``tau`` under the given rotation.

    Raises
    ------
    ValueError
        If ``tau`` is not attainable by the family/rotation combination.
    """
    if family not in _FAM:
        raise ValueError(f"unknown copula family {family!r}")
    if family == "indep":
        raise ValueError("independence copula has no parameter")
    base_tau = -tau if rotation in (90, 270) else tau
    lo, hi = family_tau_range(family)
    if not lo <= base_tau <= hi:
        raise ValueError(
            f"tau {tau} (rotation {rotation}) not attainable by {family}; "
            f"base range is [{lo:.4f}, {hi:.4f}]"
        )
    return _FAM[family].par_from_tau(base_tau)


def param_to_tau(b: Bicop) -> float:
    return b.tau


# ---------------------------------------------------------------------------
# pseudo-observations and likelihood
# ---------------------------------------------------------------------------


@dataclass
class PairObs:
    """Paired pseudo-observations on the copula scale.

    For a discrete component the pair carries the CDF evaluated at the
    observed code (``*_plus``) and just below it (``*_minus``); for a
    continuous component the two coincide.
    """

    u_plus: np.ndarray
    v_plus: np.ndarray
    u_minus: Optional[np.ndarray] = None
    v_minus: Optional[np.ndarray] = None
    u_disc: bool = False
    v_disc: bool = False

    def __post_init__(self):
        self.u_plus = _clip(self.u_plus)
        self.v_plus = _clip(self.v_plus)
        self.u_minus = self.u_plus if self.u_minus is None else _clip(self.u_minus)
        self.v_minus = self.v_plus if self.v_minus is None else _clip(self.v_minus)

    @property
    def n(self) -> int:
        return self.u_plus.shape[0]

    @classmethod
    def continuous(cls, u, v) -> "PairObs":
        return cls(u_plus=np.asarray(u, float), v_plus=np.asarray(v, float))

    def midpoints(self):
        return 0.5 * (self.u_plus + self.u_minus), 0.5 * (self.v_plus + self.v_minus)

    def swapped(self) -> "PairObs":
        return PairObs(
            u_plus=self.v_plus,
            v_plus=self.u_plus,
            u_minus=self.v_minus,
            v_minus=self.u_minus,
            u_disc=self.v_disc,
            v_disc=self.u_disc,
        )


def bicop_contributions(cop: Bicop, obs: PairObs) -> np.ndarray:
    """Per-row log likelihood contributions of a pair-copula.

    Continuous x continuous pairs contribute the log density; pairs with a
    discrete side contribute log finite differences of the conditional CDF,
    and fully discrete pairs log rectangle probabilities.  Each contribution
    is floored at ``log(1e-300)``.
    """
    if not obs.u_disc and not obs.v_disc:
        return np.maximum(cop.logpdf(obs.u_plus, obs.v_plus), LOG_FLOOR)
    if obs.u_disc and not obs.v_disc:
        diff = cop.hfunc(obs.u_plus, obs.v_plus, "1|2") - cop.hfunc(
            obs.u_minus, obs.v_plus, "1|2"
        )
        return np.log(np.maximum(diff, CONTRIB_FLOOR))
    if not obs.u_disc and obs.v_disc:
        diff = cop.hfunc(obs.u_plus, obs.v_plus, "2|1") - cop.hfunc(
            obs.u_plus, obs.v_minus, "2|1"
        )
        return np.log(np.maximum(diff, CONTRIB_FLOOR))
    rect = (
        cop.cdf(obs.u_plus, obs.v_plus)
        - cop.cdf(obs.u_plus, obs.v_minus)
        - cop.cdf(obs.u_minus, obs.v_plus)
        + cop.cdf(obs.u_minus, obs.v_minus)
    )
    return np.log(np.maximum(rect, CONTRIB_FLOOR))


def bicop_loglik(cop: Bicop, obs: PairObs) -> float:
    return float(np.sum(bicop_contributions(cop, obs)))


def empirical_tau(obs: PairObs) -> float:
    """Kendall's tau-b of the pseudo-observation midpoints."""
    um, vm = obs.midpoints()
    tau = stats.kendalltau(um, vm).statistic
    return 0.0 if np.isnan(tau) else float(tau)


def _start_params(family: str, rotation: int, tau_emp: float):
    """Tau-inversion starting point, clipped into the attainable range."""
    lo, hi = family_tau_range(family)
    base_tau = -tau_emp if rotation in (90, 270) else tau_emp
    pad = 1e-3
    base_tau = min(max(base_tau, lo + pad), hi - pad)
    if family == "frank" and abs(base_tau) < 5e-3:
        base_tau = math.copysign(5e-3, base_tau if base_tau != 0.0 else 1.0)
    return _FAM[family].par_from_tau(base_tau)


def bicop_fit(
    family: str,
    rotation: int,
    obs: PairObs,
    min_obs: int = 10,
) -> Bicop:
    """Maximum-likelihood fit of one family/rotation to paired pseudo-obs.

    Single-parameter families use bounded Brent search, the Student-t uses
    Nelder-Mead over (rho, df).  Both start from the tau-inversion point and
    the fit never returns a likelihood below that starting point's.
    """
    if obs.n < min_obs:
        raise TooFewObservations(
            f"pair-copula fit needs at least {min_obs} observations, got {obs.n}"
        )
    if family == "indep":
        return INDEP
    fam = _FAM[family]
    start = _start_params(family, rotation, empirical_tau(obs))

    def neg_ll(params):
        try:
            cop = Bicop(family, rotation, tuple(np.atleast_1d(params)))
        except ValueError:
            return np.inf
        return -bicop_loglik(cop, obs)

    best_p = start
    best_val = neg_ll(start)
    if fam.npar == 1:
        res = optimize.minimize_scalar(
            lambda t: neg_ll((t,)), bounds=fam.bounds[0], method="bounded"
        )
        if res.fun < best_val:
            best_p, best_val = (float(res.x),), res.fun
    else:
        res = optimize.minimize(
            neg_ll,
            x0=np.asarray(start),
            method="Nelder-Mead",
            bounds=fam.bounds,
            options={"xatol": 1e-6, "fatol": 1e-8, "maxiter": 500},
        )
        if res.fun < best_val:
            best_p, best_val = tuple(res.x), res.fun
    return Bicop(family, rotation, best_p)
