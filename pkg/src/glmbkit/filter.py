"""GLMB Bayes recursion: prediction, update and state extraction.

Single-object densities are Gaussian mixtures shared by reference between
components, so per-density work (propagation, linearized likelihoods,
Kalman updates) is done once per distinct density and cached by identity.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .assignment import ranked_assignments, ranked_bernoulli_subsets
from .errors import CapExceededWarning, FilterDivergence, LabelClash
from .mixture import LOG_2PI, GaussianMixture, log_sum_exp, reduce_mixture
from .models import BirthModel, MotionModel
from .rfs import (CardinalityDistribution, GlmbComponent, GlmbDensity, Label,
                  cardinality_distribution, normalize, truncate)

_HASH_MASK = (1 << 63) - 1


@dataclass(frozen=True)
class FilterCaps:
    """Truncation limits. ``None`` everywhere means exact recursion."""

    max_components: Optional[int] = None
    min_weight: float = 0.0
    # cap after prediction; kept separate because birth hypotheses need the
    # next update to gain weight before they can compete
    max_predicted: Optional[int] = None
    # survival/birth outcomes kept per prior component, and how far below the
    # best outcome (in log probability) enumeration continues
    max_subsets: Optional[int] = None
    subset_log_ratio: float = -math.inf
    # total association maps shared out over components by sqrt(weight)
    hypothesis_budget: Optional[int] = None
    exhaustive_limit: int = 256
    # Mahalanobis gate on the linearized innovation; None disables gating
    gate: Optional[float] = 6.0
    # collapse components sharing a label set after each update, then reduce
    # the per-label mixtures (merge threshold is a squared Mahalanobis distance)
    marginalize: bool = False
    max_gaussians: Optional[int] = None
    merge_threshold: float = 0.0


EXACT = FilterCaps(gate=None)


@dataclass
class UpdateStats:
    pruned_components: int = 0
    l1_error: float = 0.0


def _truncate(density: GlmbDensity, caps: FilterCaps) -> Tuple[GlmbDensity, float]:
    if caps.max_components is None and caps.min_weight <= 0:
        return density, 0.0
    return truncate(density, caps.max_components, caps.min_weight)


def predict(prior: GlmbDensity, motion: MotionModel, birth: BirthModel,
            step: int, caps: FilterCaps = EXACT) -> GlmbDensity:
    """Chapman-Kolmogorov prediction with labeled multi-Bernoulli birth.

    Birth labels are ``(step, i)``. Each prior component with labels ``I``
    spawns components ``L = S ∪ B`` with ``S ⊆ I`` surviving and ``B`` the
    born labels, weighted by the survival and birth outcome probabilities.
    """
    prior.require_normalized()
    birth_labels = birth.labels(step)
    existing = set(prior.label_space())
    if existing & set(birth_labels):
        raise LabelClash("birth labels collide with existing labels")
    ps = motion.survival_probability
    log_ps = math.log(ps)
    log_qs = math.log1p(-ps) if ps < 1.0 else -math.inf
    r = np.asarray(birth.existence_probabilities, dtype=float)
    b_on, b_off = np.log(r), np.log1p(-r)

    propagated: Dict[int, GaussianMixture] = {}

    def prop(gm):
        out = propagated.get(id(gm))
        if out is None:
            out = propagated[id(gm)] = motion.propagate(gm)
        return out

    comps: List[GlmbComponent] = []
    for c in prior.components:
        n = len(c.labels)
        # children of different parents must not share a key
        hist = _history(c.history, c.labels)
        log_on = np.concatenate([np.full(n, log_ps), b_on])
        log_off = np.concatenate([np.full(n, log_qs), b_off])
        items = c.labels + birth_labels
        for lp, mask in ranked_bernoulli_subsets(log_on, log_off, caps.max_subsets,
                                                 caps.subset_log_ratio):
            dens = {}
            for j, on in enumerate(mask):
                if on:
                    l = items[j]
                    dens[l] = prop(c.densities[l]) if j < n else birth.densities[j - n]
            labels = tuple(dens)
            lw = c.log_weight + lp
            if math.isfinite(lw) and all(a < b for a, b in zip(labels, labels[1:])):
                comps.append(GlmbComponent.trusted(hist, labels, lw, dens))
            else:
                comps.append(GlmbComponent(hist, labels, lw, dens))
    out = normalize(GlmbDensity(tuple(comps), prior.state_dim, prior.hypervolume_unit))
    if caps.max_predicted is not None:
        out = truncate(out, caps.max_predicted)[0]
    return out


class _Track:
    """Measurement quantities for one predicted single-object density.

    Built in batches by ``_build_tracks``; posteriors are formed on demand.
    """

    __slots__ = ("gm", "log_miss", "log_det", "gated", "gain", "post_covs", "nu",
                 "posteriors", "_logq")

    def posterior(self, j: int) -> GaussianMixture:
        out = self.posteriors.get(j)
        if out is not None:
            return out
        means = self.gm.means + (self.gain @ self.nu[:, j, :, None])[..., 0]
        lw = self._logq[:, j]
        w = np.exp(lw - log_sum_exp(lw))
        out = GaussianMixture.trusted(w / w.sum(), means, self.post_covs)
        self.posteriors[j] = out
        return out


def _build_tracks(gms: List[GaussianMixture], Z: np.ndarray, sensor, log_kappa: float,
                  gate: Optional[float]) -> List[_Track]:
    """Linearized likelihoods, gains and Joseph-form covariances for every
    Gaussian of every density in one vectorized pass. None of these depend
    on which measurement is assigned, so they are computed once per update."""
    m = Z.shape[0]
    if not gms:
        return []
    centers = np.array([g.mean() for g in gms])
    pd = np.asarray(sensor.detection_probabilities(centers), dtype=float)
    tracks = []
    for g, p in zip(gms, pd):
        t = _Track()
        t.gm = g
        t.log_miss = math.log1p(-p) if p < 1.0 else -math.inf
        t.posteriors = {}
        t.log_det = np.full(m, -math.inf)
        t.gated = np.zeros(m, dtype=bool)
        tracks.append(t)
    active = [i for i, p in enumerate(pd) if p > 0.0]
    if m == 0 or not active:
        return tracks
    sel = [gms[i] for i in active]
    sizes = [g.size for g in sel]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    X = np.concatenate([g.means for g in sel])
    P = np.concatenate([g.covs for g in sel])
    zhat, H, R = sensor.linearize_batch(X)
    HP = H @ P
    S = HP @ np.swapaxes(H, 1, 2) + R
    L = np.linalg.cholesky(S)
    nu = sensor.residual(np.broadcast_to(Z, (len(X), *Z.shape)).copy(), zhat[:, None, :])
    sol = np.linalg.solve(L, np.swapaxes(nu, 1, 2))
    maha = np.sum(sol * sol, axis=1)
    logdet = 2.0 * np.sum(np.log(np.diagonal(L, axis1=1, axis2=2)), axis=1)
    logq = -0.5 * (maha + logdet[:, None] + zhat.shape[1] * LOG_2PI)
    K = np.swapaxes(np.linalg.solve(S, HP), 1, 2)
    A = np.eye(P.shape[1]) - K @ H
    covs = A @ P @ np.swapaxes(A, 1, 2) + K @ R @ np.swapaxes(K, 1, 2)
    covs = 0.5 * (covs + np.swapaxes(covs, 1, 2))
    with np.errstate(divide="ignore"):
        logw = np.log(np.concatenate([g.weights for g in sel]))
    lw = logw[:, None] + logq
    inside = maha <= (gate * gate if gate is not None else np.inf)
    for k, i in enumerate(active):
        a, b = offsets[k], offsets[k + 1]
        t = tracks[i]
        t.gain, t.post_covs, t.nu, t._logq = K[a:b], covs[a:b], nu[a:b], lw[a:b]
        t.gated = np.any(inside[a:b], axis=0)
        det = math.log(pd[i]) + log_sum_exp(lw[a:b], axis=0) - log_kappa
        det[~t.gated] = -math.inf
        t.log_det = det
    return tracks


def _history(parent: int, theta: Tuple[int, ...]) -> int:
    return hash((parent, theta)) & _HASH_MASK


def update(predicted: GlmbDensity, measurements, sensor,
           caps: FilterCaps = EXACT, stats: Optional[UpdateStats] = None) -> GlmbDensity:
    """Bayes update against one measurement set.

    For every component, association maps (each label missed or assigned to a
    distinct measurement) are enumerated best first. Weights take the product
    of per-label likelihood ratios and are normalized jointly.
    """
    predicted.require_normalized()
    Z = np.asarray(measurements, dtype=float)
    Z = Z.reshape(len(Z), -1) if Z.size else np.empty((0, 1))
    log_kappa = sensor.log_clutter_intensity()
    distinct: Dict[int, GaussianMixture] = {}
    for c in predicted.components:
        for gm in c.densities.values():
            distinct.setdefault(id(gm), gm)
    built = _build_tracks(list(distinct.values()), Z, sensor, log_kappa, caps.gate)
    tracks: Dict[int, _Track] = dict(zip(distinct, built))

    comps = predicted.components
    if caps.hypothesis_budget is None:
        quota = [None] * len(comps)
    else:
        sq = np.exp(0.5 * np.array([c.log_weight for c in comps]))
        quota = [max(1, int(math.ceil(caps.hypothesis_budget * s / sq.sum()))) for s in sq]

    out: List[GlmbComponent] = []
    pruned = 0
    for c, k in zip(comps, quota):
        n = len(c.labels)
        if n == 0:
            out.append(GlmbComponent(_history(c.history, ()), (), c.log_weight, {}))
            continue
        ts = [tracks[id(c.densities[l])] for l in c.labels]
        cols = np.flatnonzero(np.any([t.gated for t in ts], axis=0)) if len(Z) else np.empty(0, int)
        m = len(cols)
        cost = np.full((n, m + n), np.inf)
        for i, t in enumerate(ts):
            cost[i, :m] = -t.log_det[cols]
            cost[i, m + i] = -t.log_miss
        limit = k if k is not None else 10**9
        sols, cut = ranked_assignments(cost, limit, caps.exhaustive_limit)
        pruned += int(cut)
        for total, assign in sols:
            theta = tuple(int(cols[a]) + 1 if a < m else 0 for a in assign)
            dens = {}
            for l, t, th in zip(c.labels, ts, theta):
                dens[l] = t.gm if th == 0 else t.posterior(th - 1)
            out.append(GlmbComponent.trusted(_history(c.history, theta), c.labels,
                                             c.log_weight - total, dens))
    if not out:
        raise FilterDivergence("no association map has non-zero weight")
    if pruned:
        warnings.warn(f"{pruned} component(s) had association maps pruned by the cap",
                      CapExceededWarning, stacklevel=2)
    post = normalize(GlmbDensity(tuple(out), predicted.state_dim, predicted.hypervolume_unit))
    if caps.marginalize:
        post = marginalize(post, caps.max_gaussians, caps.merge_threshold)
    post, l1 = _truncate(post, caps)
    if stats is not None:
        stats.pruned_components += pruned
        stats.l1_error += l1
    return post


def marginalize(density: GlmbDensity, max_gaussians: Optional[int] = None,
                merge_threshold: float = 0.0) -> GlmbDensity:
    """Collapse all components with the same label set into one.

    The merged weight is the sum of the weights and each label's density is
    the weight-averaged mixture of its densities. Cardinality distribution
    and intensity are preserved exactly; correlations between association
    histories are not. Mixtures are then reduced by ``reduce_mixture``.
    """
    groups: Dict[Tuple[Label, ...], List[GlmbComponent]] = {}
    for c in density.components:
        groups.setdefault(c.labels, []).append(c)
    comps = []
    for labels, members in groups.items():
        lw = np.array([c.log_weight for c in members])
        total = float(log_sum_exp(lw))
        if len(members) == 1:
            comps.append(GlmbComponent(_history(0, labels), labels, total, members[0].densities))
            continue
        rel = np.exp(lw - total)
        dens = {}
        for l in labels:
            gms = [c.densities[l] for c in members]
            w = np.concatenate([r * g.weights for r, g in zip(rel, gms)])
            dens[l] = reduce_mixture(w, np.concatenate([g.means for g in gms]),
                                     np.concatenate([g.covs for g in gms]),
                                     max_gaussians, merge_threshold)
        comps.append(GlmbComponent(_history(0, labels), labels, total, dens))
    return GlmbDensity(tuple(comps), density.state_dim, density.hypervolume_unit)


def estimate_state(posterior: GlmbDensity) -> List[Tuple[Label, np.ndarray]]:
    """MAP-cardinality estimate from the best component of that cardinality."""
    card: CardinalityDistribution = cardinality_distribution(posterior)
    n_star = card.map()
    best = None
    for c in posterior.components:
        if len(c.labels) == n_star and (best is None or c.log_weight > best.log_weight):
            best = c
    if best is None:
        return []
    return [(l, best.densities[l].best_mean().copy()) for l in best.labels]
