"""Regions of position space and Gaussian escape probabilities.

A region constrains only the positional coordinates of a state, selected by
``position_dims``. ``escape_probability`` returns the mass of a Gaussian
mixture outside the region: closed form for half-spaces and boxes, adaptive
quadrature for discs.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from scipy import integrate
from scipy.special import ndtr
from scipy.stats import multivariate_normal

from .errors import IntegrationFailure
from .mixture import GaussianMixture

DISC_RTOL = 1e-6
DISC_MAX_EVALS = 100_000
_GK21_EVALS = 21


def _dims(position_dims) -> Tuple[int, ...]:
    return tuple(int(i) for i in position_dims)


@dataclass(frozen=True)
class HalfSpace:
    """``{x : normal . x[position_dims] <= offset}``."""

    normal: Tuple[float, ...]
    offset: float
    position_dims: Tuple[int, ...] = (0,)

    def __post_init__(self):
        object.__setattr__(self, "normal", tuple(float(v) for v in self.normal))
        object.__setattr__(self, "position_dims", _dims(self.position_dims))
        if len(self.normal) != len(self.position_dims):
            raise ValueError("normal must match the positional dimensions")
        if not any(self.normal):
            raise ValueError("normal must be non-zero")

    def contains(self, points) -> np.ndarray:
        p = np.asarray(points, float)[..., list(self.position_dims)]
        return p @ np.asarray(self.normal) <= self.offset


@dataclass(frozen=True)
class AxisBox:
    """Closed box ``lower <= x[position_dims] <= upper``.

    ``lower == upper`` on some axis is allowed and gives a null box.
    """

    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    position_dims: Tuple[int, ...] = (0, 1)

    def __post_init__(self):
        object.__setattr__(self, "lower", tuple(float(v) for v in self.lower))
        object.__setattr__(self, "upper", tuple(float(v) for v in self.upper))
        object.__setattr__(self, "position_dims", _dims(self.position_dims))
        if not (len(self.lower) == len(self.upper) == len(self.position_dims)):
            raise ValueError("box bounds must match the positional dimensions")
        if any(lo > hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("box lower bound exceeds upper bound")

    @property
    def is_null(self) -> bool:
        return any(lo == hi for lo, hi in zip(self.lower, self.upper))

    def contains(self, points) -> np.ndarray:
        p = np.asarray(points, float)[..., list(self.position_dims)]
        return np.all((p >= self.lower) & (p <= self.upper), axis=-1)


@dataclass(frozen=True)
class Disc:
    """Closed disc of ``radius`` about ``center`` in a 2D position plane."""

    center: Tuple[float, float]
    radius: float
    position_dims: Tuple[int, int] = (0, 1)

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        object.__setattr__(self, "position_dims", _dims(self.position_dims))
        if len(self.center) != 2 or len(self.position_dims) != 2:
            raise ValueError("a disc lives in a 2D position plane")
        if not self.radius > 0:
            raise ValueError("disc radius must be positive")

    def contains(self, points) -> np.ndarray:
        p = np.asarray(points, float)[..., list(self.position_dims)]
        return np.sum((p - self.center) ** 2, axis=-1) <= self.radius**2


Region = Union[HalfSpace, AxisBox, Disc]


def escape_probability(gm: GaussianMixture, region: Region) -> float:
    """Mass of ``gm`` outside ``region``, clamped to [0, 1]."""
    marg = gm.marginal(region.position_dims)
    inside = 0.0
    for w, m, P in zip(marg.weights, marg.means, marg.covs):
        inside += w * _inside_mass(m, P, region)
    return float(min(1.0, max(0.0, 1.0 - inside)))


def _inside_mass(m, P, region) -> float:
    if isinstance(region, HalfSpace):
        n = np.asarray(region.normal)
        return float(ndtr((region.offset - n @ m) / math.sqrt(n @ P @ n)))
    if isinstance(region, AxisBox):
        return _box_mass(m, P, np.asarray(region.lower), np.asarray(region.upper),
                         region.is_null)
    if isinstance(region, Disc):
        c = np.asarray(region.center)
        # in 2D, P(|whitened x| > d) = exp(-d^2/2) exactly; past d = 9.2 the
        # disc mass is below 1e-18 and cannot move a void probability
        gap = math.hypot(*(c - m)) - region.radius
        if gap > 0 and gap * gap > 2 * 42.0 * np.linalg.eigvalsh(P)[-1]:
            return 0.0
        return disc_mass(m, P, c, region.radius)
    raise TypeError(f"unsupported region {region!r}")


def _box_mass(m, P, lo, hi, is_null) -> float:
    if is_null:
        return 0.0
    sd = np.sqrt(np.diag(P))
    off = P - np.diag(np.diag(P))
    if not np.any(off):
        return float(np.prod(ndtr((hi - m) / sd) - ndtr((lo - m) / sd)))
    if len(m) == 2:
        # integrate the first axis against the conditional CDF of the second
        rho_term = P[0, 1] / P[0, 0]
        cond_sd = math.sqrt(P[1, 1] - P[0, 1] * rho_term)

        def f(x0):
            mu1 = m[1] + rho_term * (x0 - m[0])
            dens = math.exp(-0.5 * ((x0 - m[0]) / sd[0]) ** 2) / (sd[0] * math.sqrt(2 * math.pi))
            return dens * (ndtr((hi[1] - mu1) / cond_sd) - ndtr((lo[1] - mu1) / cond_sd))

        a = max(lo[0], m[0] - 40 * sd[0])
        b = min(hi[0], m[0] + 40 * sd[0])
        if a >= b:
            return 0.0
        val, _ = integrate.quad(f, a, b, epsabs=1e-13, epsrel=1e-10, limit=200)
        return float(val)
    return float(multivariate_normal(m, P).cdf(hi, lower_limit=lo))


def disc_mass(m, P, center, radius, rtol: float = DISC_RTOL,
              max_evals: int = DISC_MAX_EVALS) -> float:
    """Probability that ``N(m, P)`` (2D) falls in the disc.

    In whitened coordinates ``y = L^-1 (x - m)`` the Gaussian is standard and
    the disc becomes an ellipse. Along each ray from the origin the radial
    integral of ``r exp(-r^2/2)`` is exact, leaving an adaptive quadrature
    over the ray angle. When the mean lies outside the disc only the cone of
    rays that hit it is integrated, so narrow angular supports are not missed.
    """
    L = np.linalg.cholesky(P)
    g = np.asarray(center, float) - np.asarray(m, float)
    gn2 = float(g @ g)
    c0 = gn2 - radius**2

    def radial(theta):
        u = np.array([math.cos(theta), math.sin(theta)])
        v = L @ u
        a = float(v @ v)
        b = float(v @ g)
        disc = b * b - a * c0
        if disc <= 0.0:
            return 0.0
        s = math.sqrt(disc)
        r_hi = (b + s) / a
        if r_hi <= 0.0:
            return 0.0
        # stable lower root: (b - s)/a = c0 / (b + s)
        r_lo = max(0.0, c0 / (b + s)) if b + s > 0 else 0.0
        return (math.exp(-0.5 * r_lo * r_lo) - math.exp(-0.5 * r_hi * r_hi)) / (2 * math.pi)

    limit = max(1, (max_evals // _GK21_EVALS + 1) // 2)
    if c0 < 0.0:
        lo, hi = 0.0, 2.0 * math.pi
    else:
        half = math.asin(min(1.0, radius / math.sqrt(gn2)))
        phi = math.atan2(g[1], g[0])
        Linv = np.linalg.inv(L)
        ends = []
        for ang in (phi - half, phi + half):
            w = Linv @ np.array([math.cos(ang), math.sin(ang)])
            ends.append(math.atan2(w[1], w[0]))
        lo, hi = ends
        # the cone image is narrower than pi, so unwrap hi just above lo
        while hi < lo:
            hi += 2.0 * math.pi
        while hi - lo > 2.0 * math.pi:
            hi -= 2.0 * math.pi
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err, info = integrate.quad(radial, lo, hi, epsabs=0.0, epsrel=rtol,
                                        limit=limit, full_output=True)[:3]
    if info["neval"] > max_evals or (err > rtol * abs(val) and err > 1e-15):
        raise IntegrationFailure(
            f"disc quadrature did not reach rtol={rtol} (estimate {val}, error {err})")
    return float(val)
