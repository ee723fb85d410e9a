"""Void probabilities of GLMB densities."""

from __future__ import annotations

import math
from typing import Dict, Tuple

import numpy as np

from .regions import Region, escape_probability
from .rfs import GlmbDensity, sample_realizations


def glmb_void_probability(density: GlmbDensity, region: Region) -> float:
    """Probability that no object of ``density`` lies in ``region``.

    Each component contributes its weight times the product over its labels
    of the label's escape probability. Escape probabilities are computed
    once per distinct single-object density.
    """
    density.require_normalized()
    cache: Dict[int, float] = {}
    terms = []
    for c in density.components:
        prod = 1.0
        for l in c.labels:
            gm = c.densities[l]
            q = cache.get(id(gm))
            if q is None:
                q = cache[id(gm)] = escape_probability(gm, region)
            prod *= q
        terms.append(c.weight * prod)
    return float(min(1.0, max(0.0, math.fsum(terms))))


def monte_carlo_void_probability(density: GlmbDensity, region: Region,
                                 rng: np.random.Generator,
                                 n: int = 100_000) -> Tuple[float, float]:
    """Fraction of ``n`` sampled realizations with no point in ``region``.

    Returns the estimate and its binomial standard error.
    """
    empty = 0
    for g in sample_realizations(density, rng, n):
        if g.states.shape[1] == 0:
            empty += g.states.shape[0]
            continue
        hit = region.contains(g.states).any(axis=1)
        empty += int(np.count_nonzero(~hit))
    p = empty / n
    return p, math.sqrt(max(p * (1 - p), 0.0) / n)
