"""Cauchy-Schwarz divergence between GLMB densities.

The closed form pairs only components with identical label sets, so the
components of one density are bucketed by label set before pairing. Every
sum is taken in the log domain. ``set_integral_inner_product`` is a
brute-force quadrature of the defining set integral, kept as a test oracle.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatch, TooLarge, UnitMismatch
from .mixture import GaussianMixture, log_product_kernel, log_sum_exp
from .rfs import GlmbComponent, GlmbDensity, Label


def _sorted_logsumexp(values) -> float:
    # sorting first makes the sum independent of argument order
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if v.size == 0:
        return -math.inf
    return float(log_sum_exp(v))


def log_gaussian_mixture_inner_product(a: GaussianMixture, b: GaussianMixture,
                                       K: float = 1.0) -> float:
    if a.dim != b.dim:
        raise DimensionMismatch(f"dimensions {a.dim} and {b.dim} differ")
    kern = log_product_kernel(a, b)
    lw = np.log(a.weights)[:, None] + np.log(b.weights)[None, :]
    return math.log(K) + _sorted_logsumexp(kern + lw)


def gaussian_mixture_inner_product(a: GaussianMixture, b: GaussianMixture,
                                   K: float = 1.0) -> float:
    """``K * sum_ij w_i w_j N(m_i; m_j, P_i + P_j)``; dimensionless."""
    return math.exp(log_gaussian_mixture_inner_product(a, b, K))


@dataclass(frozen=True)
class GlmbInnerProduct:
    log_value: float
    is_zero: bool

    @property
    def value(self) -> float:
        return 0.0 if self.is_zero else math.exp(self.log_value)


def _bucket(density: GlmbDensity) -> Dict[Tuple[Label, ...], List[GlmbComponent]]:
    out: Dict[Tuple[Label, ...], List[GlmbComponent]] = {}
    for c in density.components:
        out.setdefault(c.labels, []).append(c)
    return out


def glmb_inner_product(phi: GlmbDensity, psi: GlmbDensity) -> GlmbInnerProduct:
    if phi.state_dim != psi.state_dim:
        raise DimensionMismatch("densities have different state dimensions")
    if phi.hypervolume_unit != psi.hypervolume_unit:
        raise UnitMismatch("densities use different hyper-volume units")
    log_K = math.log(phi.hypervolume_unit)
    gamma: Dict[Tuple[int, int], float] = {}

    def log_gamma(a: GaussianMixture, b: GaussianMixture) -> float:
        key = (id(a), id(b)) if id(a) <= id(b) else (id(b), id(a))
        val = gamma.get(key)
        if val is None:
            if key[0] == id(a):
                val = log_gaussian_mixture_inner_product(a, b)
            else:
                val = log_gaussian_mixture_inner_product(b, a)
            gamma[key] = val
        return val

    buckets = _bucket(psi)
    terms = []
    for c in phi.components:
        for d in buckets.get(c.labels, ()):
            t = (c.log_weight + d.log_weight) + len(c.labels) * log_K
            t += math.fsum(log_gamma(c.densities[l], d.densities[l]) for l in c.labels)
            terms.append(t)
    if not terms:
        return GlmbInnerProduct(-math.inf, True)
    return GlmbInnerProduct(_sorted_logsumexp(terms), False)


def cs_divergence(phi: GlmbDensity, psi: GlmbDensity) -> float:
    """Cauchy-Schwarz divergence; ``inf`` for orthogonal label supports."""
    phi.require_normalized()
    psi.require_normalized()
    cross = glmb_inner_product(phi, psi)
    if cross.is_zero:
        return math.inf
    if phi is psi:
        return 0.0
    aa = glmb_inner_product(phi, phi).log_value
    bb = glmb_inner_product(psi, psi).log_value
    return -(cross.log_value - (0.5 * aa + 0.5 * bb))


# --- brute-force set-integral oracle (1D states, tiny label spaces) ----------

MAX_ORACLE_LABELS = 3
MAX_ORACLE_POINTS = 30_000_000


def _gl_grid(densities: Sequence[GaussianMixture], n_labels: int,
             tail_sd: float = 12.0, nodes_per_panel: int = 16):
    means = np.concatenate([gm.means[:, 0] for gm in densities])
    sds = np.sqrt(np.concatenate([gm.covs[:, 0, 0] for gm in densities]))
    lo = float(np.min(means - tail_sd * sds))
    hi = float(np.max(means + tail_sd * sds))
    width = float(np.min(sds))
    n_panels = max(1, int(math.ceil((hi - lo) / width)))
    n_nodes = n_panels * nodes_per_panel
    if n_nodes ** max(n_labels, 1) > MAX_ORACLE_POINTS:
        # fall back to fewer, wider panels before giving up
        n_nodes = int(MAX_ORACLE_POINTS ** (1.0 / n_labels))
        n_panels = max(1, n_nodes // nodes_per_panel)
        if (hi - lo) / n_panels > 4.0 * width:
            raise TooLarge("quadrature grid needed for the oracle is too large")
    x, w = np.polynomial.legendre.leggauss(nodes_per_panel)
    edges = np.linspace(lo, hi, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _set_function_on_grid(components: Sequence[Tuple[float, Dict[Label, GaussianMixture]]],
                          labels: Tuple[Label, ...], nodes: np.ndarray) -> np.ndarray:
    """``sum_c w_c prod_j p_c(x_j, labels[j])`` on the tensor grid."""
    n = len(labels)
    total = np.zeros((nodes.size,) * n) if n else np.zeros(())
    pts = nodes[:, None]
    for w, dens in components:
        term = np.asarray(w, dtype=float)
        for j, l in enumerate(labels):
            vals = dens[l].pdf(pts)
            shape = [1] * n
            shape[j] = nodes.size
            term = term * vals.reshape(shape)
        total = total + term
    return total


def _integrate_grid(values: np.ndarray, weights: np.ndarray) -> float:
    out = values
    for _ in range(values.ndim):
        out = out @ weights
    return float(out)


def _groups(components, labels):
    return [(w, dens) for (lbls, w, dens) in components if lbls == labels]


def _check_oracle(label_space, state_dim):
    if state_dim != 1:
        raise TooLarge("the set-integral oracle handles 1D states only")
    if len(label_space) > MAX_ORACLE_LABELS:
        raise TooLarge(f"the set-integral oracle handles at most {MAX_ORACLE_LABELS} labels")


def _linear(density: GlmbDensity):
    return [(c.labels, c.weight, c.densities) for c in density.components]


def set_integral_inner_product(phi: GlmbDensity, psi: GlmbDensity) -> float:
    """``∫ K^|X| phi(X) psi(X) δX`` by subset enumeration and tensor quadrature.

    Cost is exponential in the number of labels; test use only.
    """
    if phi.hypervolume_unit != psi.hypervolume_unit:
        raise UnitMismatch("densities use different hyper-volume units")
    space = tuple(sorted(set(phi.label_space()) | set(psi.label_space())))
    _check_oracle(space, phi.state_dim)
    _check_oracle(space, psi.state_dim)
    K = phi.hypervolume_unit
    a, b = _linear(phi), _linear(psi)
    total = []
    for n in range(len(space) + 1):
        for L in itertools.combinations(space, n):
            ga, gb = _groups(a, L), _groups(b, L)
            if not ga or not gb:
                continue
            if n == 0:
                total.append(math.fsum(w for w, _ in ga) * math.fsum(w for w, _ in gb))
                continue
            dens = [d[l] for _, d in ga + gb for l in L]
            nodes, weights = _gl_grid(dens, n)
            f = _set_function_on_grid(ga, L, nodes)
            g = _set_function_on_grid(gb, L, nodes)
            total.append(K**n * _integrate_grid(f * g, weights))
    return math.fsum(total)


def set_integral_l1_distance(f, g, state_dim: int = 1) -> float:
    """``∫ |f(X) - g(X)| δX`` for unnormalized GLMBs given as component triples.

    ``f`` and ``g`` are sequences of ``(labels, weight, densities)``.
    """
    space = tuple(sorted({l for lbls, _, _ in list(f) + list(g) for l in lbls}))
    _check_oracle(space, state_dim)
    total = []
    for n in range(len(space) + 1):
        for L in itertools.combinations(space, n):
            gf, gg = _groups(f, L), _groups(g, L)
            if not gf and not gg:
                continue
            if n == 0:
                total.append(abs(math.fsum(w for w, _ in gf) - math.fsum(w for w, _ in gg)))
                continue
            dens = [d[l] for _, d in gf + gg for l in L]
            nodes, weights = _gl_grid(dens, n)
            diff = _set_function_on_grid(gf, L, nodes) - _set_function_on_grid(gg, L, nodes)
            total.append(_integrate_grid(np.abs(diff), weights))
    return math.fsum(total)
