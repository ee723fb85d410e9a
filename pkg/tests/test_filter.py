import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from glmbkit.errors import CapExceededWarning, LabelClash
from glmbkit.filter import (EXACT, FilterCaps, UpdateStats, estimate_state, marginalize,
                            predict, update)
from glmbkit.mixture import GaussianMixture
from glmbkit.models import BirthModel, LinearGaussianSensor, MotionModel
from glmbkit.oracles import filter_suite, kalman_discrepancy, random_glmb
from glmbkit.rfs import (GlmbDensity, Label, cardinality_distribution, existence_probabilities,
                         intensity_function, make_density)

from conftest import L1, L2, L3, gauss, paper_sensor

IDENTITY_1D = MotionModel(np.eye(1), np.zeros((1, 1)), 1.0)


def _by_labels(d):
    return {c.labels: c for c in d.components}


def test_predict_identity_keeps_everything():
    d = make_density([((), 0.4, {}), ((L1,), 0.6, {L1: gauss(1.5, 2.0)})], 1)
    out = predict(d, IDENTITY_1D, BirthModel.none(), 1)
    got = _by_labels(out)
    assert got[()].weight == pytest.approx(0.4, abs=1e-15)
    assert got[(L1,)].weight == pytest.approx(0.6, abs=1e-15)
    assert np.array_equal(got[(L1,)].densities[L1].means, [[1.5]])


def test_predict_bernoulli_survival():
    d = make_density([((L1,), 1.0, {L1: gauss(0.0)})], 1)
    motion = MotionModel(np.eye(1), np.zeros((1, 1)), 0.5)
    got = _by_labels(predict(d, motion, BirthModel.none(), 1))
    assert set(got) == {(), (L1,)}
    assert got[()].weight == pytest.approx(0.5, abs=1e-15)
    assert got[(L1,)].weight == pytest.approx(0.5, abs=1e-15)


def test_predict_enumerates_survival_and_birth():
    d = make_density([((L1, L2), 1.0, {L1: gauss(0.0), L2: gauss(5.0)})], 1)
    motion = MotionModel(np.eye(1), np.zeros((1, 1)), 0.9)
    birth = BirthModel((0.1,), (gauss(10.0),))
    out = predict(d, motion, birth, 4)
    B = Label(4, 0)
    assert len(out) == 8
    got = _by_labels(out)
    for s1, s2, b in itertools.product([0, 1], repeat=3):
        labels = tuple(l for l, on in ((L1, s1), (L2, s2), (B, b)) if on)
        w = (0.9 if s1 else 0.1) * (0.9 if s2 else 0.1) * (0.1 if b else 0.9)
        assert got[labels].weight == pytest.approx(w, abs=1e-12)


def test_predict_rejects_label_clash():
    d = make_density([((Label(2, 0),), 1.0, {Label(2, 0): gauss(0.0)})], 1)
    with pytest.raises(LabelClash):
        predict(d, IDENTITY_1D, BirthModel((0.1,), (gauss(0.0),)), 2)


def test_update_without_detection_returns_prediction():
    d = make_density([((), 0.3, {}), ((L1,), 0.7, {L1: gauss([0.0, 0.0, 0.0, 0.0])})], 4)
    sensor = paper_sensor(detection_override=0.0)
    post = update(d, np.empty((0, 2)), sensor)
    assert sorted(c.weight for c in post.components) == pytest.approx([0.3, 0.7], abs=1e-15)
    for c in post.components:
        for l in c.labels:
            assert c.densities[l] is d.components[1].densities[L1]


def test_measurement_at_prediction_raises_existence():
    x = np.array([3000.0, 0.0, 4000.0, 0.0])
    d = make_density([((), 0.5, {}), ((L1,), 0.5,
                                      {L1: GaussianMixture.single(x, np.diag([100.0, 1.0, 100.0, 1.0]))})], 4)
    sensor = paper_sensor(clutter_rate=1.0)
    z = sensor.h(x)
    post = update(d, z, sensor)
    assert existence_probabilities(post)[L1] > 0.5


def test_three_hypothesis_update():
    m, P, R, pd, kappa = 0.5, 2.0, 0.5, 0.8, 0.05
    z = np.array([[1.0], [-2.0]])
    d = make_density([((L1,), 1.0, {L1: gauss(m, P)})], 1)
    sensor = LinearGaussianSensor(np.eye(1), R * np.eye(1), pd, kappa)
    post = update(d, z, sensor)
    S = P + R
    lik = [math.exp(-0.5 * (zj - m) ** 2 / S) / math.sqrt(2 * math.pi * S) for zj in z[:, 0]]
    raw = [1 - pd, pd * lik[0] / kappa, pd * lik[1] / kappa]
    expect = [r / sum(raw) for r in raw]
    got = {}
    for c in post.components:
        mean = float(c.densities[L1].means[0, 0])
        if mean == m:
            got[0] = c.weight
        else:
            j = int(np.argmin([abs(mean - (m + P / S * (zj - m))) for zj in z[:, 0]]))
            got[j + 1] = c.weight
    assert [got[i] for i in range(3)] == pytest.approx(expect, abs=1e-12)


def test_kalman_stub():
    assert kalman_discrepancy(np.random.default_rng(4)) <= 1e-9


def test_estimate_state_examples():
    assert estimate_state(GlmbDensity.certain_empty(2)) == []
    d = make_density([((L1,), 1.0, {L1: gauss([1.0, 2.0])})], 2)
    (lbl, x), = estimate_state(d)
    assert lbl == L1 and np.array_equal(x, [1.0, 2.0])
    d = make_density([((), 0.1, {}), ((L1,), 0.25, {L1: gauss([0.0, 0.0])}),
                      ((L2,), 0.35, {L2: gauss([5.0, 5.0])}),
                      ((L1, L2), 0.3, {L1: gauss([0.0, 0.0]), L2: gauss([5.0, 5.0])})], 2)
    (lbl, x), = estimate_state(d)
    assert lbl == L2


def test_truncation_caps_and_stats(rng):
    d = make_density([((L1, L2), 1.0, {L1: gauss([0, 0, 0, 0.0]), L2: gauss([100, 0, 100, 0.0])})], 4)
    sensor = LinearGaussianSensor(np.array([[1.0, 0, 0, 0], [0, 0, 1.0, 0]]), np.eye(2), 0.9, 1e-3)
    z = rng.normal(0, 1, (4, 2))
    stats = UpdateStats()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CapExceededWarning)
        post = update(d, z, sensor, FilterCaps(max_components=3, gate=None), stats)
    assert len(post) <= 3
    assert 0.0 < stats.l1_error < 1.0


def test_marginalize_preserves_cardinality_and_intensity(rng):
    comps = []
    w = rng.dirichlet(np.ones(6))
    for h in range(6):
        labels = [(), (L1,), (L1, L2)][h % 3]
        comps.append((labels, w[h], {l: gauss(rng.normal(size=2), rng.uniform(0.5, 2)) for l in labels}))
    from glmbkit.rfs import GlmbComponent
    d = GlmbDensity(tuple(GlmbComponent(i, tuple(l), math.log(x), dd)
                          for i, (l, x, dd) in enumerate(comps)), 2)
    m = marginalize(d)
    assert len(m) == 3
    assert cardinality_distribution(m).pmf == pytest.approx(cardinality_distribution(d).pmf, abs=1e-14)
    pts = rng.normal(size=(20, 2))
    for l in (L1, L2):
        a, b = intensity_function(d, l), intensity_function(m, l)
        assert a.mass == pytest.approx(b.mass, abs=1e-14)
        assert np.allclose(a.pdf(pts), b.pdf(pts), atol=1e-14)


def test_filter_invariant_suite_small():
    rep = filter_suite(cases=100, seed=9)
    assert rep.ok, rep.failures[:3]


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_update_is_normalized_with_labels_from_prediction(seed):
    rng = np.random.default_rng(seed)
    d = random_glmb(rng, 4, labels=[L1, L2, L3], mean_range=50.0, sd_range=(5.0, 20.0))
    sensor = LinearGaussianSensor(np.array([[1.0, 0, 0, 0], [0, 0, 1.0, 0]]),
                                  25.0 * np.eye(2), float(rng.uniform(0.2, 0.99)), 1e-4)
    z = rng.uniform(-60, 60, (int(rng.integers(0, 4)), 2))
    post = update(d, z, sensor)
    assert post.is_normalized
    assert set(post.label_space()) <= set(d.label_space())
    assert len({c.key for c in post.components}) == len(post)
