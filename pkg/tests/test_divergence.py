import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from glmbkit.divergence import (cs_divergence, gaussian_mixture_inner_product,
                                glmb_inner_product, set_integral_inner_product)
from glmbkit.errors import TooLarge, UnitMismatch
from glmbkit.oracles import cs_divergence_suite, k_invariance_suite, random_glmb
from glmbkit.rfs import GlmbDensity, Label, make_density

from conftest import L1, L2, L3, gauss


def test_orthogonal_supports_give_infinity():
    a = make_density([((L1,), 1.0, {L1: gauss(0.0)})], 1)
    b = make_density([((L2,), 1.0, {L2: gauss(0.0)})], 1)
    assert glmb_inner_product(a, b).is_zero
    assert cs_divergence(a, b) == math.inf


def test_certain_empty_inner_product():
    e = GlmbDensity.certain_empty(1)
    assert glmb_inner_product(e, e).value == 1.0
    assert set_integral_inner_product(e, e) == 1.0
    assert cs_divergence(e, e) == 0.0


def test_single_label_inner_product():
    a = make_density([((L1,), 1.0, {L1: gauss(0.0)})], 1)
    b = make_density([((L1,), 1.0, {L1: gauss(0.5, 2.0)})], 1)
    ref = gaussian_mixture_inner_product(gauss(0.0), gauss(0.5, 2.0))
    assert set_integral_inner_product(a, b) == pytest.approx(ref, rel=1e-12)
    assert glmb_inner_product(a, b).value == pytest.approx(ref, rel=1e-12)


def test_inner_product_matches_oracle(rng):
    for _ in range(10):
        a = random_glmb(rng, 1, labels=[L1, L2])
        b = random_glmb(rng, 1, labels=[L1, L2])
        ref = set_integral_inner_product(a, b)
        got = glmb_inner_product(a, b)
        assert (0.0 if got.is_zero else got.value) == pytest.approx(ref, rel=1e-8, abs=1e-300)


def test_inner_product_matches_importance_sampling():
    """Two-label instance against a 1e7-sample importance-sampling estimate."""
    rng = np.random.default_rng(21)
    a = random_glmb(rng, 1, labels=[L1, L2], max_components=3)
    b = random_glmb(rng, 1, labels=[L1, L2], max_components=3)
    exact = set_integral_inner_product(a, b)
    n = 10**7
    total = []
    for n_lab, labels in ((0, ()), (1, (L1,)), (1, (L2,)), (2, (L1, L2))):
        fa = [(c.weight, c.densities) for c in a.components if c.labels == labels]
        fb = [(c.weight, c.densities) for c in b.components if c.labels == labels]
        if not fa or not fb:
            continue
        if n_lab == 0:
            total.append((sum(w for w, _ in fa) * sum(w for w, _ in fb), 0.0))
            continue
        x = rng.normal(0.0, 3.0, (n // 4, n_lab))
        proposal = np.prod(np.exp(-x**2 / 18.0) / math.sqrt(18.0 * math.pi), axis=1)

        def f(group):
            out = np.zeros(len(x))
            for w, dens in group:
                term = np.full(len(x), w)
                for j, l in enumerate(labels):
                    term *= dens[l].pdf(x[:, j:j + 1])
                out += term
            return out
        vals = f(fa) * f(fb) / proposal
        total.append((vals.mean(), vals.std() / math.sqrt(len(vals))))
    est = sum(m for m, _ in total)
    se = math.sqrt(sum(s * s for _, s in total))
    assert abs(est - exact) <= 3 * se + 1e-12


def test_self_divergence_is_zero(rng):
    for _ in range(10):
        d = random_glmb(rng, 2, labels=[L1, L2, L3])
        assert abs(cs_divergence(d, d)) <= 1e-12


def test_unit_mismatch_rejected(rng):
    a = random_glmb(rng, 1)
    with pytest.raises(UnitMismatch):
        cs_divergence(a, a.with_unit(2.0))


def test_oracle_rejects_large_label_spaces(rng):
    labels = [Label(0, i) for i in range(4)]
    d = random_glmb(rng, 1, labels=labels, max_components=1)
    d = make_density([(tuple(labels), 1.0, {l: gauss(0.0) for l in labels})], 1)
    with pytest.raises(TooLarge):
        set_integral_inner_product(d, d)


def test_oracle_suites_small():
    assert cs_divergence_suite(cases=10, seed=1).ok
    assert k_invariance_suite(cases=5, seed=1).ok


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_symmetric_and_non_negative(seed):
    rng = np.random.default_rng(seed)
    a = random_glmb(rng, 2, labels=[L1, L2])
    b = random_glmb(rng, 2, labels=[L1, L2])
    d1, d2 = cs_divergence(a, b), cs_divergence(b, a)
    assert d1 == d2 or abs(d1 - d2) <= 1e-12
    assert d1 >= -1e-12
