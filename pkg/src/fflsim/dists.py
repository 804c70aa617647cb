"""Known generating distributions for the synthetic regression scenarios."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy import integrate
from scipy.special import ndtr
from scipy.stats import truncnorm


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True, eq=True)
class TruncNormal:
    mean: float
    sd: float
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"invalid truncation interval [{self.lo}, {self.hi}]")
        if not self.sd > 0:
            raise ValueError("sd must be positive")

    @property
    def _frozen(self):
        a, b = (self.lo - self.mean) / self.sd, (self.hi - self.mean) / self.sd
        return truncnorm(a, b, loc=self.mean, scale=self.sd)

    @cached_property
    def _mass(self) -> float:
        return float(ndtr((self.hi - self.mean) / self.sd) - ndtr((self.lo - self.mean) / self.sd))

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        z = (t - self.mean) / self.sd
        dens = np.exp(-0.5 * z * z) / (math.sqrt(2 * math.pi) * self.sd * self._mass)
        out = np.where((t >= self.lo) & (t <= self.hi), dens, 0.0)
        return float(out) if out.ndim == 0 else out

    def expected(self) -> float:
        return float(self._frozen.mean())

    def moment(self, m: int) -> float:
        """E[kappa^m] by adaptive quadrature."""
        val, err = integrate.quad(lambda t: t ** m * self.pdf(t), self.lo, self.hi,
                                  epsabs=1e-13, epsrel=1e-12, limit=200)
        if err > 1e-8:
            raise QuadratureError(f"noise moment {m} did not converge (err {err:.2e})")
        return val

    def total_mass(self) -> float:
        return self.moment(0)

    def to_dict(self) -> dict:
        return {"mean": self.mean, "sd": self.sd, "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class KnownDistribution:
    """x ~ U[x_lo, x_hi], y = slope*x + intercept + kappa, kappa ~ truncated normal."""

    noise: TruncNormal
    x_lo: float = 0.0
    x_hi: float = 1.0
    slope: float = -2.0
    intercept: float = 1.0

    def __post_init__(self):
        if not self.x_lo < self.x_hi:
            raise ValueError("empty x range")

    def pdf(self, x, y):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.x_lo) & (x <= self.x_hi)
        dens = self.noise.pdf(y - self.slope * x - self.intercept) / (self.x_hi - self.x_lo)
        return np.where(inside, dens, 0.0)

    def same_marginal(self, other: "KnownDistribution") -> bool:
        return (self.x_lo, self.x_hi, self.slope, self.intercept) == \
            (other.x_lo, other.x_hi, other.slope, other.intercept)

    def x_moment(self, m: int) -> float:
        # Gauss-Legendre is exact for these polynomial moments
        t, wts = np.polynomial.legendre.leggauss(8)
        x = 0.5 * (self.x_hi - self.x_lo) * t + 0.5 * (self.x_hi + self.x_lo)
        return float(0.5 * np.sum(wts * x ** m))

    @lru_cache(maxsize=None)
    def ridge_moments(self) -> "RidgeMoments":
        """E[x~ x~^T], E[x~ y], E[y^2] with x~ = (x, 1)."""
        ex, ex2 = self.x_moment(1), self.x_moment(2)
        ek, ek2 = self.noise.moment(1), self.noise.moment(2)
        s, c = self.slope, self.intercept
        M = np.array([[ex2, ex], [ex, 1.0]])
        lin_x = s * ex2 + c * ex          # E[x (s x + c)]
        lin = s * ex + c                  # E[s x + c]
        b = np.array([lin_x + ex * ek, lin + ek])
        yy = s * s * ex2 + 2 * s * c * ex + c * c + 2 * lin * ek + ek2
        return RidgeMoments(M, b, yy)

    def to_dict(self) -> dict:
        return {"noise": self.noise.to_dict(), "x_lo": self.x_lo, "x_hi": self.x_hi,
                "slope": self.slope, "intercept": self.intercept}

    @classmethod
    def from_dict(cls, d: dict) -> "KnownDistribution":
        d = dict(d)
        return cls(noise=TruncNormal(**d.pop("noise")), **d)


@dataclass
class RidgeMoments:
    M: np.ndarray
    b: np.ndarray
    yy: float

    def scaled(self, c: float) -> "RidgeMoments":
        return RidgeMoments(c * self.M, c * self.b, c * self.yy)

    def __add__(self, other: "RidgeMoments") -> "RidgeMoments":
        return RidgeMoments(self.M + other.M, self.b + other.b, self.yy + other.yy)


def combined_moments(dists, coeffs) -> tuple[RidgeMoments, float]:
    total = None
    for dist, c in zip(dists, coeffs):
        if c == 0:
            continue
        m = dist.ridge_moments().scaled(float(c))
        total = m if total is None else total + m
    if total is None:
        raise ValueError("no distribution with nonzero coefficient")
    return total, float(np.sum(coeffs))


def expected_ridge_risk(dists, coeffs, lam: float, w) -> float:
    """sum_j c_j E_j(w) for ridge loss 0.5(w.x~ - y)^2 + (lam/2)|w|^2."""
    mom, csum = combined_moments(dists, coeffs)
    w = np.asarray(w, dtype=float)
    return float(0.5 * (w @ mom.M @ w - 2 * mom.b @ w + mom.yy) + 0.5 * lam * csum * (w @ w))


def min_expected_ridge_risk(dists, coeffs, lam: float) -> tuple[np.ndarray, float]:
    mom, csum = combined_moments(dists, coeffs)
    w = np.linalg.solve(mom.M + lam * csum * np.eye(len(mom.b)), mom.b)
    return w, expected_ridge_risk(dists, coeffs, lam, w)


def _as_mixture(p):
    if isinstance(p, KnownDistribution):
        return [(1.0, p)]
    return [(float(a), dist) for a, dist in p]


def mixture(weights, dists) -> list:
    """Normalized mixture sum_j w_j P_j as a list of (weight, distribution)."""
    w = np.asarray(weights, dtype=float)
    if w.sum() <= 0:
        raise ValueError("mixture weights must have positive sum")
    return [(float(a), dist) for a, dist in zip(w / w.sum(), dists) if a != 0]


def l1_distance(p, q, tol: float = 1e-6) -> float:
    """Integral of |p - q| over (x, y); p, q are distributions or mixtures."""
    return _l1_cached(tuple(_as_mixture(p)), tuple(_as_mixture(q)), tol)


@lru_cache(maxsize=4096)
def _l1_cached(P, Q, tol):
    comps = [d for _, d in P + Q]
    ref = comps[0]
    if all(ref.same_marginal(d) for d in comps):
        # density difference depends on (x, y) only through the residual kappa
        def f(t):
            return abs(sum(a * d.noise.pdf(t) for a, d in P) - sum(a * d.noise.pdf(t) for a, d in Q))
        pts = sorted({d.noise.lo for d in comps} | {d.noise.hi for d in comps})
        val, err = 0.0, 0.0
        for lo, hi in zip(pts[:-1], pts[1:]):
            v, e = integrate.quad(f, lo, hi, epsabs=1e-11, epsrel=1e-10, limit=400)
            val, err = val + v, err + e
        if err > tol:
            raise QuadratureError(f"L1 quadrature error estimate {err:.2e} exceeds {tol}")
        return val

    def inner(x):
        def g(y):
            return abs(sum(a * d.pdf(x, y) for a, d in P) - sum(a * d.pdf(x, y) for a, d in Q))
        edges = sorted({d.slope * x + d.intercept + e for d in comps for e in (d.noise.lo, d.noise.hi)})
        v = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            v += integrate.quad(g, lo, hi, epsabs=1e-10, limit=200)[0]
        return v

    xs = sorted({d.x_lo for d in comps} | {d.x_hi for d in comps})
    val, err = 0.0, 0.0
    for lo, hi in zip(xs[:-1], xs[1:]):
        v, e = integrate.quad(inner, lo, hi, epsabs=1e-9, limit=200)
        val, err = val + v, err + e
    if err > tol:
        raise QuadratureError(f"L1 quadrature error estimate {err:.2e} exceeds {tol}")
    return val
