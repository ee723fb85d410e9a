"""Randomized oracle suites comparing closed forms against independent references.

Each suite draws its cases from a seeded generator and returns an
``OracleReport``. They back the ``oracle`` CLI subcommand and the
acceptance tests.
"""

from __future__ import annotations

import itertools
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from .divergence import (_gl_grid, _integrate_grid, cs_divergence, set_integral_inner_product,
                         set_integral_l1_distance)
from .errors import CapExceededWarning
from .filter import EXACT, FilterCaps, predict, update
from .mixture import GaussianMixture, IntensityMixture
from .models import BirthModel, LinearGaussianSensor, MotionModel, SensorModel
from .poisson import PoissonProcess, poisson_cs_divergence
from .regions import AxisBox, Disc, HalfSpace
from .rfs import (GlmbComponent, GlmbDensity, Label, independent_union, normalize,
                  truncate)
from .scenario import ospa
from .void import glmb_void_probability, monte_carlo_void_probability


@dataclass
class OracleReport:
    suite: str
    passed: int
    total: int
    required: int
    elapsed: float
    worst: float = 0.0
    failures: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.passed >= self.required

    def summary(self) -> str:
        return (f"{self.suite}: {self.passed}/{self.total} agreements "
                f"(need {self.required}), worst discrepancy {self.worst:.3g}, "
                f"{self.elapsed:.1f} s")


# --- random instances ----------------------------------------------------------------

def random_mixture(rng: np.random.Generator, dim: int, max_components: int = 3,
                   mean_range: float = 2.0, sd_range=(0.5, 1.5)) -> GaussianMixture:
    n = int(rng.integers(1, max_components + 1))
    w = rng.dirichlet(np.ones(n))
    means = rng.uniform(-mean_range, mean_range, (n, dim))
    covs = np.empty((n, dim, dim))
    for i in range(n):
        sd = rng.uniform(*sd_range, dim)
        if dim > 1:
            Q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
            covs[i] = Q @ np.diag(sd**2) @ Q.T
        else:
            covs[i] = np.diag(sd**2)
    return GaussianMixture(w, means, covs)


def random_glmb(rng: np.random.Generator, dim: int, max_labels: int = 2,
                max_components: int = 3, max_gaussians: int = 3,
                labels: Optional[List[Label]] = None, hypervolume_unit: float = 1.0,
                **mixture_kw) -> GlmbDensity:
    """Random normalized GLMB; label sets may repeat across components."""
    if labels is None:
        labels = [Label(0, i) for i in range(int(rng.integers(1, max_labels + 1)))]
    n = int(rng.integers(1, max_components + 1))
    w = rng.dirichlet(np.ones(n))
    comps = []
    for h in range(n):
        k = int(rng.integers(0, len(labels) + 1))
        chosen = sorted(rng.choice(len(labels), size=k, replace=False))
        dens = {labels[j]: random_mixture(rng, dim, max_gaussians, **mixture_kw) for j in chosen}
        comps.append(GlmbComponent(h, tuple(dens), math.log(w[h]), dens))
    return normalize(GlmbDensity(tuple(comps), dim, hypervolume_unit))


def random_region(rng: np.random.Generator):
    kind = int(rng.integers(3))
    if kind == 0:
        return Disc(tuple(rng.uniform(-2, 2, 2)), float(rng.uniform(0.3, 2.5)))
    if kind == 1:
        lo = rng.uniform(-3, 1, 2)
        return AxisBox(tuple(lo), tuple(lo + rng.uniform(0.3, 3, 2)))
    n = rng.standard_normal(2)
    return HalfSpace(tuple(n / np.linalg.norm(n)), float(rng.uniform(-2, 2)), (0, 1))


# --- suites -----------------------------------------------------------------------

def _divergence_from(ip_ab: float, ip_aa: float, ip_bb: float) -> float:
    if ip_ab <= 0:
        return math.inf
    return -(math.log(ip_ab) - 0.5 * (math.log(ip_aa) + math.log(ip_bb)))


def cs_divergence_suite(cases: int = 100, seed: int = 0, tol: float = 1e-6) -> OracleReport:
    """Closed-form CS divergence against set-integral quadrature (1D)."""
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    rep = OracleReport("cs-divergence", 0, cases, cases, 0.0)
    labels = [Label(0, 0), Label(0, 1)]
    for i in range(cases):
        a = random_glmb(rng, 1, labels=labels)
        b = random_glmb(rng, 1, labels=labels)
        closed = cs_divergence(a, b)
        ref = _divergence_from(set_integral_inner_product(a, b),
                               set_integral_inner_product(a, a),
                               set_integral_inner_product(b, b))
        if math.isinf(closed) or math.isinf(ref):
            err = 0.0 if closed == ref else math.inf
        else:
            err = abs(closed - ref)
        rep.worst = max(rep.worst, err)
        if err <= tol:
            rep.passed += 1
        else:
            rep.failures.append(f"case {i}: closed {closed!r} quadrature {ref!r}")
    rep.elapsed = time.perf_counter() - t0
    return rep


def void_probability_suite(cases: int = 200, seed: int = 0, samples: int = 100_000,
                           n_se: float = 3.0, required_fraction: float = 0.95) -> OracleReport:
    """Closed-form void probability against Monte Carlo realizations (2D)."""
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    rep = OracleReport("void-prob", 0, cases, math.ceil(required_fraction * cases), 0.0)
    for i in range(cases):
        labels = [Label(0, j) for j in range(int(rng.integers(1, 5)))]
        dens = random_glmb(rng, 2, labels=labels)
        region = random_region(rng)
        q = glmb_void_probability(dens, region)
        p, _ = monte_carlo_void_probability(dens, region, rng, samples)
        se = math.sqrt(max(q * (1 - q), 0.0) / samples)
        z = abs(p - q) / se if se > 0 else (0.0 if abs(p - q) < 1.0 / samples else math.inf)
        rep.worst = max(rep.worst, z)
        if z <= n_se:
            rep.passed += 1
        else:
            rep.failures.append(f"case {i}: closed {q!r} monte carlo {p!r} ({z:.2f} se)")
    rep.elapsed = time.perf_counter() - t0
    return rep


def k_invariance_suite(cases: int = 20, seed: int = 0, tol: float = 1e-9) -> OracleReport:
    """D_CS unchanged when state units change and K changes to match."""
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    rep = OracleReport("k-invariance", 0, cases, cases, 0.0)
    dim = 2
    for i in range(cases):
        labels = [Label(0, j) for j in range(int(rng.integers(1, 4)))]
        a = random_glmb(rng, dim, labels=labels)
        b = random_glmb(rng, dim, labels=labels)
        base = cs_divergence(a, b)
        worst = 0.0
        for K in (1e-3, 1.0, 1e3):
            s = K ** (1.0 / dim)
            d = cs_divergence(_rescaled(a, s, K), _rescaled(b, s, K))
            worst = max(worst, 0.0 if d == base else abs(d - base))
        rep.worst = max(rep.worst, worst)
        if worst < tol:
            rep.passed += 1
        else:
            rep.failures.append(f"case {i}: spread {worst!r}")
    rep.elapsed = time.perf_counter() - t0
    return rep


def _rescaled(d: GlmbDensity, s: float, K: float) -> GlmbDensity:
    cache: Dict[int, GaussianMixture] = {}

    def sc(gm):
        if id(gm) not in cache:
            cache[id(gm)] = gm.scaled(s)
        return cache[id(gm)]

    comps = tuple(GlmbComponent(c.history, c.labels, c.log_weight,
                                {l: sc(g) for l, g in c.densities.items()})
                  for c in d.components)
    return GlmbDensity(comps, d.state_dim, K)


def product_rule_suite(cases: int = 20, seed: int = 0, regions: int = 5,
                       tol: float = 1e-10) -> OracleReport:
    """Void probability of an independent union equals the product."""
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    rep = OracleReport("product-rule", 0, cases * regions, cases * regions, 0.0)
    for i in range(cases):
        a = random_glmb(rng, 2, labels=[Label(0, j) for j in range(int(rng.integers(1, 3)))])
        b = random_glmb(rng, 2, labels=[Label(1, j) for j in range(int(rng.integers(1, 3)))])
        u = independent_union(a, b)
        for r in range(regions):
            reg = random_region(rng)
            lhs = glmb_void_probability(u, reg)
            rhs = glmb_void_probability(a, reg) * glmb_void_probability(b, reg)
            err = abs(lhs - rhs)
            rep.worst = max(rep.worst, err)
            if err <= tol:
                rep.passed += 1
            else:
                rep.failures.append(f"case {i} region {r}: {lhs!r} vs {rhs!r}")
    rep.elapsed = time.perf_counter() - t0
    return rep


def poisson_suite(cases: int = 20, seed: int = 0, tol: float = 1e-9) -> OracleReport:
    """Poisson CS divergence against half the squared L2 distance by quadrature."""
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    rep = OracleReport("poisson", 0, cases, cases, 0.0)
    for i in range(cases):
        u = IntensityMixture(float(rng.uniform(0.5, 5)), random_mixture(rng, 1))
        v = IntensityMixture(float(rng.uniform(0.5, 5)), random_mixture(rng, 1))
        closed = poisson_cs_divergence(PoissonProcess(u), PoissonProcess(v))
        nodes, weights = _gl_grid([u.mixture, v.mixture], 1)
        diff = u.pdf(nodes[:, None]) - v.pdf(nodes[:, None])
        ref = 0.5 * _integrate_grid(diff * diff, weights)
        err = abs(closed - ref)
        rep.worst = max(rep.worst, err)
        if err <= tol:
            rep.passed += 1
        else:
            rep.failures.append(f"case {i}: closed {closed!r} quadrature {ref!r}")
    rep.elapsed = time.perf_counter() - t0
    return rep


def truncation_suite(cases: int = 50, seed: int = 0, quadrature_cases: int = 10) -> OracleReport:
    """Reported L1 error equals the discarded weight, checked two ways.

    Every case compares against an independent sum of the discarded weights
    (to a few ulps); the first ``quadrature_cases`` also integrate
    ``|f - f_kept|`` by set-integral quadrature.
    """
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    rep = OracleReport("truncation", 0, cases, cases, 0.0)
    eps = np.finfo(float).eps
    for i in range(cases):
        labels = [Label(0, j) for j in range(int(rng.integers(1, 4)))]
        d = random_glmb(rng, 1, labels=labels, max_components=8)
        keep = int(rng.integers(1, len(d) + 1))
        out, l1 = truncate(d, keep)
        order = sorted(range(len(d)), key=lambda j: -d.components[j].log_weight)
        dropped = [d.components[j].weight for j in order[keep:]]
        ref = math.fsum(dropped)
        err = abs(l1 - ref)
        ok = err <= 4 * eps
        if i < quadrature_cases:
            f = [(c.labels, c.weight, c.densities) for c in d.components]
            g = [(c.labels, c.weight, c.densities) for j, c in enumerate(d.components)
                 if j in set(order[:keep])]
            quad = set_integral_l1_distance(f, g)
            ok = ok and abs(quad - l1) <= 1e-9
            err = max(err, abs(quad - l1))
        rep.worst = max(rep.worst, err)
        if ok:
            rep.passed += 1
        else:
            rep.failures.append(f"case {i}: reported {l1!r} reference {ref!r}")
    rep.elapsed = time.perf_counter() - t0
    return rep


def _check_invariants(d: GlmbDensity, allowed_labels=None) -> Optional[str]:
    if not d.components:
        return "no components"
    if not d.is_normalized:
        return "not normalized"
    keys = set()
    for c in d.components:
        if c.key in keys:
            return "duplicate key"
        keys.add(c.key)
        if len(set(c.labels)) != len(c.labels) or list(c.labels) != sorted(c.labels):
            return "labels not distinct and sorted"
        if set(c.densities) != set(c.labels):
            return "densities do not match labels"
        if not math.isfinite(c.log_weight):
            return "non-finite weight"
        if allowed_labels is not None and not set(c.labels) <= allowed_labels:
            return "unexpected label"
    return None


def filter_suite(cases: int = 1000, seed: int = 0, tol: float = 1e-9) -> OracleReport:
    """Predict/update outputs are valid GLMBs; one-label linear case is a Kalman filter."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CapExceededWarning)
        return _filter_suite(cases, seed, tol)


def _filter_suite(cases: int, seed: int, tol: float) -> OracleReport:
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    rep = OracleReport("filter", 0, cases + 1, cases + 1, 0.0)
    box = AxisBox((-5000, -5000), (5000, 5000), (0, 2))
    H = np.array([[1.0, 0, 0, 0], [0, 0, 1.0, 0]])
    caps = FilterCaps(max_components=30, hypothesis_budget=40, gate=None)
    dens = GlmbDensity.certain_empty(4)
    for i in range(cases):
        if i % 25 == 0:
            dens = GlmbDensity.certain_empty(4)
        ps = float(rng.uniform(0.5, 0.999))
        motion = MotionModel.constant_velocity(float(rng.uniform(1, 10)), 0.5, ps)
        nb = int(rng.integers(0, 3))
        birth = BirthModel(tuple(rng.uniform(0.05, 0.5, nb)),
                           tuple(GaussianMixture.single([*rng.uniform(-2000, 2000, 1), 0,
                                                         *rng.uniform(-2000, 2000, 1), 0],
                                                        np.diag([500.0**2, 10**2, 500.0**2, 10**2]))
                                 for _ in range(nb)))
        err = None
        try:
            pred = predict(dens, motion, birth, i + 1, caps)
            err = _check_invariants(pred)
            births = {l for l in pred.label_space() if l.birth_time == i + 1}
            if err is None and not births <= set(birth.labels(i + 1)):
                err = "birth label with wrong time"
            if err is None:
                if i % 2:
                    sensor = LinearGaussianSensor(H, np.diag([50.0**2, 50.0**2]),
                                                  float(rng.uniform(0.3, 0.99)), 1e-8)
                    Z = rng.uniform(-3000, 3000, (int(rng.integers(0, 5)), 2))
                else:
                    sensor = SensorModel(math.radians(2), 0.1, 1000, 10000, 20000,
                                         float(rng.uniform(0, 5)), box)
                    nz = int(rng.integers(0, 5))
                    Z = np.column_stack([rng.uniform(-math.pi, math.pi, nz),
                                         rng.uniform(100, 7000, nz)])
                post = update(pred, Z, sensor, caps)
                err = _check_invariants(post, set(pred.label_space()))
                dens = post
        except Exception as e:  # any exception is a failed case
            err = f"{type(e).__name__}: {e}"
        if err is None:
            rep.passed += 1
        else:
            rep.failures.append(f"step {i}: {err}")
            dens = GlmbDensity.certain_empty(4)
    err = kalman_discrepancy(rng)
    rep.worst = err
    if err <= tol:
        rep.passed += 1
    else:
        rep.failures.append(f"kalman discrepancy {err!r}")
    rep.elapsed = time.perf_counter() - t0
    return rep


def kalman_discrepancy(rng: np.random.Generator, steps: int = 20) -> float:
    """Largest mean/covariance gap between a one-label GLMB with a linear
    sensor (p_D = 1, no clutter) and a textbook Kalman filter."""
    motion = MotionModel.constant_velocity(1.0, 0.3, 1.0)
    H = np.array([[1.0, 0, 0, 0], [0, 0, 1.0, 0]])
    R = np.diag([0.5, 0.8])
    sensor = LinearGaussianSensor(H, R, 1.0, 1e-300)
    m = rng.standard_normal(4)
    P = np.diag(rng.uniform(0.5, 2.0, 4))
    label = Label(0, 0)
    dens = GlmbDensity((GlmbComponent(0, (label,), 0.0, {label: GaussianMixture.single(m, P)}),), 4)
    x = m.copy()
    worst = 0.0
    for k in range(steps):
        x = motion.sample(x[None], rng)[0]
        z = H @ x + rng.multivariate_normal(np.zeros(2), R)
        dens = update(predict(dens, motion, BirthModel.none(), k + 1, EXACT), z[None], sensor, EXACT)
        m = motion.F @ m
        P = motion.F @ P @ motion.F.T + motion.Q
        S = H @ P @ H.T + R
        K = P @ H.T @ np.linalg.inv(S)
        m = m + K @ (z - H @ m)
        P = (np.eye(4) - K @ H) @ P
        best = max(dens.components, key=lambda c: c.log_weight)
        gm = best.densities[label]
        scale = max(1.0, np.abs(m).max())
        worst = max(worst, np.abs(gm.means[0] - m).max() / scale,
                    np.abs(gm.covs[0] - P).max() / max(1.0, np.abs(P).max()))
    return float(worst)


def brute_force_ospa(X, Y, c: float, p: float) -> float:
    X = np.asarray(X, float).reshape(-1, 2)
    Y = np.asarray(Y, float).reshape(-1, 2)
    if len(X) > len(Y):
        X, Y = Y, X
    m, n = len(X), len(Y)
    if n == 0:
        return 0.0
    best = math.inf
    for perm in itertools.permutations(range(n), m):
        s = sum(min(c, float(np.linalg.norm(X[i] - Y[j]))) ** p for i, j in enumerate(perm))
        best = min(best, s)
    return ((best + c**p * (n - m)) / n) ** (1.0 / p)


def ospa_suite(cases: int = 200, seed: int = 0, tol: float = 1e-12) -> OracleReport:
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    rep = OracleReport("ospa", 0, cases + 2, cases + 2, 0.0)
    for i in range(cases):
        m, n = (int(v) for v in rng.integers(0, 6, 2))
        X = rng.uniform(0, 500, (m, 2))
        Y = rng.uniform(0, 500, (n, 2))
        c = float(rng.uniform(50, 300))
        p = float(rng.choice([1.0, 2.0, 3.0]))
        got = ospa(X, Y, c, p).distance
        ref = brute_force_ospa(X, Y, c, p)
        err = abs(got - ref)
        rep.worst = max(rep.worst, err)
        if err <= tol:
            rep.passed += 1
        else:
            rep.failures.append(f"case {i}: {got!r} vs {ref!r}")
    X = rng.uniform(0, 500, (4, 2))
    for got, want in ((ospa(X, X, 200.0, 2.0).distance, 0.0),
                      (ospa(np.empty((0, 2)), X[:1], 200.0, 2.0).distance, 200.0)):
        if got == want:
            rep.passed += 1
        else:
            rep.failures.append(f"boundary case gave {got!r}, expected {want!r}")
    rep.elapsed = time.perf_counter() - t0
    return rep


SUITES: Dict[str, Callable[..., OracleReport]] = {
    "cs-divergence": cs_divergence_suite,
    "void-prob": void_probability_suite,
    "k-invariance": k_invariance_suite,
    "product-rule": product_rule_suite,
    "poisson": poisson_suite,
    "truncation": truncation_suite,
    "filter": filter_suite,
    "ospa": ospa_suite,
}
