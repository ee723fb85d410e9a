import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from glmbkit.errors import EmptyDensity
from glmbkit.oracles import random_glmb
from glmbkit.rfs import (GlmbComponent, GlmbDensity, Label, cardinality_distribution,
                         existence_probabilities, independent_union, intensity_function,
                         make_density, normalize, sample_realization, sample_realizations,
                         truncate)

from conftest import L1, L2, L3, gauss


def test_label_order_is_lexicographic():
    assert Label(0, 5) < Label(1, 0) < Label(1, 1)
    assert sorted([Label(2, 0), Label(0, 3), Label(0, 1)]) == [Label(0, 1), Label(0, 3), Label(2, 0)]


def test_normalize_single_component():
    comp = GlmbComponent(0, (L1,), -3.0, {L1: gauss(0.0)})
    dens = normalize(_raw([comp]))
    assert dens.components[0].log_weight == 0.0


def _raw(comps, dim=1):
    return GlmbDensity(tuple(comps), dim)


def test_normalize_two_components():
    comps = [GlmbComponent(0, (), math.log(0.2), {}),
             GlmbComponent(1, (L1,), math.log(0.6), {L1: gauss(0.0)})]
    w = normalize(_raw(comps)).weights()
    assert w == pytest.approx([0.25, 0.75], abs=1e-15)


def test_normalize_tiny_weights_no_underflow():
    lw = math.log(1e-320)
    comps = [GlmbComponent(0, (), lw, {}), GlmbComponent(1, (L1,), lw, {L1: gauss(0.0)})]
    w = normalize(_raw(comps)).weights()
    assert w == pytest.approx([0.5, 0.5], rel=1e-12)


def test_invalid_components_rejected():
    with pytest.raises(ValueError):
        GlmbComponent(0, (L1, L2), 0.0, {L1: gauss(0.0)})
    with pytest.raises(ValueError):
        GlmbComponent(0, (L1,), math.inf, {L1: gauss(0.0)})
    with pytest.raises(ValueError):
        _raw([GlmbComponent(0, (), 0.0, {}), GlmbComponent(0, (), 0.0, {})])


def test_cardinality_examples():
    assert list(cardinality_distribution(GlmbDensity.certain_empty(1)).pmf) == [1.0]
    d = make_density([((), 0.3, {}), ((L1,), 0.5, {L1: gauss(0.0)}),
                      ((L1, L2), 0.2, {L1: gauss(0.0), L2: gauss(1.0)})], 1)
    assert cardinality_distribution(d).pmf == pytest.approx([0.3, 0.5, 0.2], abs=1e-15)


def test_cardinality_matches_sampling(rng):
    labels = [Label(0, i) for i in range(4)]
    d = random_glmb(rng, 1, labels=labels, max_components=10)
    n = 10**6
    counts = np.zeros(len(labels) + 1)
    for g in sample_realizations(d, rng, n):
        counts[len(g.labels)] += g.states.shape[0]
    pmf = cardinality_distribution(d).pmf
    se = np.sqrt(pmf * (1 - pmf) / n) + 1e-12
    assert np.all(np.abs(counts[:len(pmf)] / n - pmf) <= 3 * se + 1e-9)


def test_intensity_examples(rng):
    d = make_density([((L1,), 1.0, {L1: gauss(2.0)})], 1)
    v = intensity_function(d, L1)
    assert v.mass == 1.0
    assert v.mixture.means[0, 0] == 2.0
    assert intensity_function(d, L2).mass == 0.0


def test_label_mass_matches_sampling(rng):
    d = random_glmb(rng, 1, labels=[L1, L2, L3], max_components=5)
    n = 10**6
    seen = {l: 0 for l in (L1, L2, L3)}
    for g in sample_realizations(d, rng, n):
        for l in g.labels:
            seen[l] += g.states.shape[0]
    for l, r in existence_probabilities(d).items():
        assert intensity_function(d, l).mass == pytest.approx(r, abs=1e-12)
        assert abs(seen[l] / n - r) <= 3 * math.sqrt(r * (1 - r) / n) + 1e-9


def test_truncate_identity_and_discarded_sum():
    d = make_density([((), 0.5, {}), ((L1,), 0.3, {L1: gauss(0.0)}),
                      ((L2,), 0.2, {L2: gauss(0.0)})], 1)
    same, err = truncate(d, 5)
    assert err == 0.0
    assert [c.key for c in same.components] == [c.key for c in d.components]
    kept, err = truncate(d, 2)
    assert err == pytest.approx(0.2, abs=1e-15)
    assert [c.labels for c in kept.components] == [(), (L1,)]
    with pytest.raises(EmptyDensity):
        truncate(d, min_weight=0.9)


def test_truncate_matches_set_integral():
    from glmbkit.divergence import set_integral_l1_distance
    rng = np.random.default_rng(3)
    comps = []
    w = rng.dirichlet(np.ones(50))
    for h in range(50):
        labels = (L1,) if h % 2 else ()
        comps.append(GlmbComponent(h, labels, math.log(w[h]),
                                   {L1: gauss(rng.uniform(-2, 2), rng.uniform(0.5, 2))} if labels else {}))
    d = _raw(comps)
    kept, err = truncate(d, 10)
    keep = sorted(range(50), key=lambda i: -w[i])[:10]
    f = [(c.labels, c.weight, c.densities) for c in d.components]
    g = [f[i] for i in sorted(keep)]
    assert set_integral_l1_distance(f, g) == pytest.approx(err, abs=1e-6)


def test_sample_realization_examples(rng):
    assert sample_realization(GlmbDensity.certain_empty(2), rng) == []
    m = np.array([3.0, -1.0])
    d = make_density([((L1,), 1.0, {L1: gauss(m, 1e-12)})], 2)
    (lbl, x), = sample_realization(d, rng)
    assert lbl == L1 and np.max(np.abs(x - m)) < 1e-4


def test_independent_union_rejects_overlap(rng):
    a = random_glmb(rng, 1, labels=[L1])
    with pytest.raises(ValueError):
        independent_union(a, a)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_normalization_invariants(seed):
    rng = np.random.default_rng(seed)
    d = random_glmb(rng, 2, labels=[L1, L2, L3], max_components=6)
    assert abs(math.fsum(d.weights()) - 1.0) <= 1e-9
    assert abs(cardinality_distribution(d).pmf.sum() - 1.0) <= 1e-9
    assert len({c.key for c in d.components}) == len(d.components)
