"""Poisson point processes with Gaussian-mixture intensities.

Used as an independent reference for void probabilities and the
Cauchy-Schwarz divergence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mixture import GaussianMixture, IntensityMixture, log_mixture_inner_product
from .regions import AxisBox, Region, escape_probability


@dataclass(frozen=True)
class PoissonProcess:
    intensity: IntensityMixture

    def superpose(self, other: "PoissonProcess") -> "PoissonProcess":
        a, b = self.intensity, other.intensity
        if a.mixture is None:
            return other
        if b.mixture is None:
            return self
        mass = a.mass + b.mass
        w = np.concatenate([a.mixture.weights * a.mass, b.mixture.weights * b.mass]) / mass
        gm = GaussianMixture(w / w.sum(),
                             np.concatenate([a.mixture.means, b.mixture.means]),
                             np.concatenate([a.mixture.covs, b.mixture.covs]))
        return PoissonProcess(IntensityMixture(mass, gm))

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        n = rng.poisson(self.intensity.mass)
        if n == 0 or self.intensity.mixture is None:
            d = self.intensity.mixture.dim if self.intensity.mixture else 1
            return np.empty((0, d))
        return self.intensity.mixture.sample(rng, n)


def poisson_void_probability(proc: PoissonProcess, region: Region) -> float:
    v = proc.intensity
    if v.mixture is None:
        return 1.0
    if isinstance(region, AxisBox) and region.is_null:
        return 1.0
    inside = 1.0 - escape_probability(v.mixture, region)
    return float(min(1.0, max(0.0, math.exp(-v.mass * inside))))


def _inner(a: IntensityMixture, b: IntensityMixture) -> float:
    if a.mixture is None or b.mixture is None:
        return 0.0
    return a.mass * b.mass * math.exp(log_mixture_inner_product(a.mixture, b.mixture))


def poisson_cs_divergence(a: PoissonProcess, b: PoissonProcess, K: float = 1.0) -> float:
    """``(K/2) * ||u - v||^2`` for intensities ``u`` and ``v``."""
    u, v = a.intensity, b.intensity
    sq = _inner(u, u) - 2.0 * _inner(u, v) + _inner(v, v)
    return max(0.0, 0.5 * K * sq)
