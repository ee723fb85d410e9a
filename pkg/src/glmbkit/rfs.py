"""Labeled RFS data model: labels, GLMB densities and their statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .errors import EmptyDensity
from .mixture import GaussianMixture, IntensityMixture, log_sum_exp

NORM_TOL = 1e-9


class Label(NamedTuple):
    """Track label ``(birth_time, index)``; tuples give the lexicographic order."""

    birth_time: int
    index: int

    def __str__(self):
        return f"{self.birth_time}:{self.index}"


@dataclass(frozen=True, eq=False)
class GlmbComponent:
    history: int
    labels: Tuple[Label, ...]
    log_weight: float
    densities: Dict[Label, GaussianMixture]

    def __post_init__(self):
        labels = tuple(sorted(Label(*l) for l in self.labels))
        if len(set(labels)) != len(labels):
            raise ValueError("component labels must be distinct")
        if set(self.densities) != set(labels):
            raise ValueError("exactly one density per label is required")
        if not math.isfinite(self.log_weight):
            raise ValueError("component log-weight must be finite")
        object.__setattr__(self, "labels", labels)

    @property
    def key(self) -> Tuple[int, Tuple[Label, ...]]:
        return (self.history, self.labels)

    @property
    def weight(self) -> float:
        return math.exp(self.log_weight)

    def with_log_weight(self, log_weight: float) -> "GlmbComponent":
        if not math.isfinite(log_weight):
            raise ValueError("component log-weight must be finite")
        return GlmbComponent.trusted(self.history, self.labels, log_weight, self.densities)

    @classmethod
    def trusted(cls, history, labels, log_weight, densities) -> "GlmbComponent":
        """Construct without validation; ``labels`` must already be sorted,
        distinct and match ``densities``. For internal hot paths."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "history", history)
        object.__setattr__(obj, "labels", labels)
        object.__setattr__(obj, "log_weight", log_weight)
        object.__setattr__(obj, "densities", densities)
        return obj


@dataclass(frozen=True, eq=False)
class GlmbDensity:
    """A GLMB belief density as a list of weighted components.

    Weights are kept as logs. Construction checks key uniqueness and
    dimensions; normalization is checked by operations that require it.
    """

    components: Tuple[GlmbComponent, ...]
    state_dim: int
    hypervolume_unit: float = 1.0
    _log_total: float = field(init=False, repr=False)

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        if self.state_dim <= 0 or not self.hypervolume_unit > 0:
            raise ValueError("state_dim and hypervolume_unit must be positive")
        keys = set()
        for c in comps:
            if c.key in keys:
                raise ValueError(f"duplicate component key {c.key}")
            keys.add(c.key)
            for gm in c.densities.values():
                if gm.dim != self.state_dim:
                    raise ValueError("single-object density has wrong dimension")
        total = log_sum_exp([c.log_weight for c in comps]) if comps else -math.inf
        object.__setattr__(self, "_log_total", float(total))

    @classmethod
    def certain_empty(cls, state_dim: int, hypervolume_unit: float = 1.0) -> "GlmbDensity":
        return cls((GlmbComponent(0, (), 0.0, {}),), state_dim, hypervolume_unit)

    def __len__(self):
        return len(self.components)

    @property
    def is_normalized(self) -> bool:
        return abs(self._log_total) <= NORM_TOL

    def require_normalized(self):
        if not self.components:
            raise EmptyDensity("density has no components")
        if not self.is_normalized:
            raise ValueError("density is not normalized")

    def weights(self) -> np.ndarray:
        return np.exp([c.log_weight for c in self.components])

    def label_space(self) -> Tuple[Label, ...]:
        return tuple(sorted({l for c in self.components for l in c.labels}))

    def with_unit(self, hypervolume_unit: float) -> "GlmbDensity":
        return GlmbDensity(self.components, self.state_dim, hypervolume_unit)


class CardinalityDistribution(NamedTuple):
    pmf: np.ndarray

    def mean(self) -> float:
        return float(np.arange(len(self.pmf)) @ self.pmf)

    def map(self) -> int:
        # argmax returns the first maximum, so ties go to the smaller n
        return int(np.argmax(self.pmf))


def normalize(density: GlmbDensity) -> GlmbDensity:
    if not density.components:
        raise EmptyDensity("cannot normalize a density with no components")
    lt = density._log_total
    comps = tuple(c.with_log_weight(c.log_weight - lt) for c in density.components)
    return GlmbDensity(comps, density.state_dim, density.hypervolume_unit)


def cardinality_distribution(density: GlmbDensity) -> CardinalityDistribution:
    density.require_normalized()
    n_max = max(len(c.labels) for c in density.components)
    buckets: List[List[float]] = [[] for _ in range(n_max + 1)]
    for c in density.components:
        buckets[len(c.labels)].append(c.weight)
    return CardinalityDistribution(np.array([math.fsum(b) for b in buckets]))


def intensity_function(density: GlmbDensity, label: Label) -> IntensityMixture:
    """Labeled intensity ``v(., label)`` as an unnormalized mixture.

    Its mass is the existence probability of ``label``.
    """
    density.require_normalized()
    label = Label(*label)
    mass_by_density: Dict[int, List] = {}
    for c in density.components:
        gm = c.densities.get(label)
        if gm is None:
            continue
        entry = mass_by_density.setdefault(id(gm), [gm, []])
        entry[1].append(c.weight)
    if not mass_by_density:
        return IntensityMixture.zero()
    parts = [(gm, math.fsum(ws)) for gm, ws in mass_by_density.values()]
    mass = math.fsum(m for _, m in parts)
    w = np.concatenate([gm.weights * (m / mass) for gm, m in parts])
    mixture = GaussianMixture(w / w.sum(),
                              np.concatenate([gm.means for gm, _ in parts]),
                              np.concatenate([gm.covs for gm, _ in parts]))
    return IntensityMixture(mass, mixture)


def existence_probabilities(density: GlmbDensity) -> Dict[Label, float]:
    density.require_normalized()
    out: Dict[Label, List[float]] = {}
    for c in density.components:
        for l in c.labels:
            out.setdefault(l, []).append(c.weight)
    return {l: math.fsum(ws) for l, ws in sorted(out.items())}


def truncate(density: GlmbDensity, max_components: Optional[int] = None,
             min_weight: float = 0.0) -> Tuple[GlmbDensity, float]:
    """Keep the heaviest components; return the result and the L1 error.

    The L1 error is the total weight of the discarded components, which is
    exactly the L1 distance between the original and the unnormalized
    truncated density.
    """
    density.require_normalized()
    comps = density.components
    order = sorted(range(len(comps)), key=lambda i: -comps[i].log_weight)
    log_min = math.log(min_weight) if min_weight > 0 else -math.inf
    keep = [i for i in order if comps[i].log_weight >= log_min]
    if max_components is not None:
        keep = keep[:max_components]
    if not keep:
        raise EmptyDensity("truncation discarded every component")
    kept = set(keep)
    discarded = [comps[i].weight for i in range(len(comps)) if i not in kept]
    l1_error = math.fsum(discarded)
    out = GlmbDensity(tuple(comps[i] for i in sorted(kept)),
                      density.state_dim, density.hypervolume_unit)
    return normalize(out), l1_error


class RealizationGroup(NamedTuple):
    """``states[s, j]`` is the state of ``labels[j]`` in draw ``s``."""

    component: int
    labels: Tuple[Label, ...]
    states: np.ndarray


def sample_realizations(density: GlmbDensity, rng: np.random.Generator,
                        n: int) -> List[RealizationGroup]:
    """Draw ``n`` realizations, grouped by the component they came from."""
    density.require_normalized()
    w = density.weights()
    counts = rng.multinomial(n, w / w.sum())
    groups = []
    for ci, cnt in enumerate(counts):
        if cnt == 0:
            continue
        comp = density.components[ci]
        states = np.empty((cnt, len(comp.labels), density.state_dim))
        for j, l in enumerate(comp.labels):
            states[:, j, :] = comp.densities[l].sample(rng, cnt)
        groups.append(RealizationGroup(ci, comp.labels, states))
    return groups


def sample_realization(density: GlmbDensity,
                       rng: np.random.Generator) -> List[Tuple[Label, np.ndarray]]:
    (group,) = sample_realizations(density, rng, 1)
    return [(l, group.states[0, j]) for j, l in enumerate(group.labels)]


def make_density(entries: Sequence[Tuple[Sequence[Label], float, Dict[Label, GaussianMixture]]],
                 state_dim: int, hypervolume_unit: float = 1.0) -> GlmbDensity:
    """Normalized density from ``(labels, weight, densities)`` triples.

    Histories are the entry positions; convenient for fixtures and tests.
    """
    comps = [GlmbComponent(i, tuple(labels), math.log(w), dict(dens))
             for i, (labels, w, dens) in enumerate(entries)]
    return normalize(GlmbDensity(tuple(comps), state_dim, hypervolume_unit))


def independent_union(a: GlmbDensity, b: GlmbDensity) -> GlmbDensity:
    """Density of the union of two independent GLMBs with disjoint labels.

    Every pair of components combines into one with the product weight and
    the union of labels and densities.
    """
    if a.state_dim != b.state_dim:
        raise ValueError("densities have different state dimensions")
    if set(a.label_space()) & set(b.label_space()):
        raise ValueError("label spaces must be disjoint")
    a.require_normalized()
    b.require_normalized()
    comps = []
    for ca in a.components:
        for cb in b.components:
            dens = {**ca.densities, **cb.densities}
            comps.append(GlmbComponent(hash((ca.key, cb.key)) & ((1 << 63) - 1),
                                       tuple(dens), ca.log_weight + cb.log_weight, dens))
    return normalize(GlmbDensity(tuple(comps), a.state_dim, a.hypervolume_unit))
