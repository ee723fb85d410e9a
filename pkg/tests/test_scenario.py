import copy
import math
import os

import numpy as np
import pytest
import yaml
from hypothesis import given, settings, strategies as st

from glmbkit.errors import ConfigError
from glmbkit.oracles import brute_force_ospa
from glmbkit.scenario import (apply_overrides, config_from_dict, config_to_dict, load_config,
                              load_config_dict, ospa, simulate_measurements, simulate_truth)

from conftest import paper_sensor

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DESK = os.path.join(ROOT, "scenarios", "scenario1_desk.yaml")
SHIPPED = ["scenario1.yaml", "scenario1_desk.yaml", "scenario2.yaml"]


def desk_dict():
    return load_config_dict(DESK)


@pytest.mark.parametrize("name", SHIPPED)
def test_shipped_scenarios_load(name):
    cfg = load_config(os.path.join(ROOT, "scenarios", name))
    assert cfg.sensor.bearing_sd_deg == 2.0 and cfg.control.sample_count == 50
    assert cfg.control.horizon == 5 and cfg.control.step_deg == 20
    assert (cfg.ospa.cutoff, cfg.ospa.order) == (200.0, 2.0)


def test_second_scenario_has_eight_targets_and_corner_start():
    cfg = load_config(os.path.join(ROOT, "scenarios", "scenario2.yaml"))
    assert len(cfg.targets) == 8
    x, y = cfg.platform.position
    assert x > 0.9 * cfg.region.upper[0] and y > 0.9 * cfg.region.upper[1]


def test_desk_truth_cardinality_follows_schedule():
    cfg = load_config(DESK)
    truth = simulate_truth(cfg, np.random.default_rng(0))
    trace = [len(s) for s in truth]
    births = sorted(t.birth for t in cfg.targets)
    assert len(births) == 7
    assert sum(b < 250 + 1e-9 for b in births) == 6 and births[-1] == 1700
    ends = sorted(t.death for t in cfg.targets if t.death < cfg.duration)
    assert len(ends) == 3 and all(1300 <= e <= 1600 for e in ends)
    expect = [sum(t.birth <= k * 10.0 < t.death for t in cfg.targets) for k in range(1, 201)]
    assert trace == expect
    assert max(trace[:25]) == 6 and trace[-1] == 4


def test_zero_process_noise_gives_straight_lines():
    data = apply_overrides(desk_dict(), ["motion.sigma_v=0.0"])
    cfg = config_from_dict(data)
    truth = simulate_truth(cfg, np.random.default_rng(1))
    tracks = {}
    for k, step in enumerate(truth, start=1):
        for tid, x in step:
            tracks.setdefault(tid, []).append((k, x))
    for tid, seq in tracks.items():
        k0, x0 = seq[0]
        for k, x in seq:
            dt = (k - k0) * 10.0
            assert np.allclose(x, [x0[0] + dt * x0[1], x0[1], x0[2] + dt * x0[3], x0[3]],
                               rtol=0, atol=1e-8)


def test_process_noise_moments():
    data = desk_dict()
    data.update(duration=100000.0, targets=[{"birth": 0, "death": 200000, "state": [0, 1, 0, -1]}])
    data = apply_overrides(data, ["motion.sigma_v=0.5"])
    cfg = config_from_dict(data)
    truth = simulate_truth(cfg, np.random.default_rng(2))
    X = np.array([s[0][1] for s in truth])
    assert len(X) == 10**4
    F = cfg.motion_model().F
    W = X[1:] - X[:-1] @ F.T
    emp = np.cov(W.T)
    Q = cfg.motion_model().Q
    for i, j in [(0, 0), (1, 1), (2, 2), (3, 3), (0, 1)]:
        assert emp[i, j] == pytest.approx(Q[i, j], rel=0.05)


def test_range_noise_at_R1(rng):
    s = paper_sensor().at((0.0, 0.0))
    states = np.tile([1000.0, 0.0, 0.0, 0.0], (10**5, 1))
    Z = simulate_measurements(states, s, rng)
    assert s.range_sd(1000.0) == 100.0
    assert np.std(Z[:, 1]) == pytest.approx(100.0, rel=0.02)


def test_detection_frequency_at_sigma_D(rng):
    s = paper_sensor(region=((-30000.0, -30000.0), (30000.0, 30000.0))).at((0.0, 0.0))
    n = 10**5
    Z = simulate_measurements(np.tile([20000.0, 0.0, 0.0, 0.0], (n, 1)), s, rng)
    p = math.exp(-0.5)
    assert abs(len(Z) / n - p) <= 3 * math.sqrt(p * (1 - p) / n)
    assert s.detection_probability(0.0) == 1.0


def test_clutter_count_and_window(rng):
    s = paper_sensor(clutter_rate=30.0).at((2000.0, 3000.0))
    counts = [len(simulate_measurements(np.empty((0, 4)), s, rng)) for _ in range(2000)]
    assert np.mean(counts) == pytest.approx(30.0, rel=0.03)
    Z = simulate_measurements(np.empty((0, 4)), s, rng)
    assert np.all(np.abs(Z[:, 0]) <= math.pi) and np.all((Z[:, 1] >= 0) & (Z[:, 1] <= s.max_range))


def test_ospa_examples(rng):
    X = rng.uniform(0, 100, (3, 2))
    assert ospa(X, X).distance == 0.0
    assert ospa(np.empty((0, 2)), X[:1]).distance == 200.0
    Y = rng.uniform(0, 100, (3, 2))
    assert ospa(X, Y).distance == pytest.approx(brute_force_ospa(X, Y, 200.0, 2.0), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ospa_metric_properties(seed):
    rng = np.random.default_rng(seed)
    X, Y, Z = (rng.uniform(0, 400, (int(rng.integers(0, 5)), 2)) for _ in range(3))
    c = 200.0
    d = ospa(X, Y, c, 2.0).distance
    assert 0.0 <= d <= c + 1e-12
    assert d == pytest.approx(ospa(Y, X, c, 2.0).distance, abs=1e-12)
    d1 = lambda a, b: ospa(a, b, c, 1.0).distance
    assert d1(X, Z) <= d1(X, Y) + d1(Y, Z) + 1e-9


def test_overrides_and_round_trip():
    data = apply_overrides(desk_dict(), ["sensor.eta=0.2", "control.lookahead.max_components=3",
                                         "monte_carlo_runs=2"])
    cfg = config_from_dict(data)
    assert cfg.sensor.eta == 0.2 and cfg.control.lookahead.max_components == 3
    again = config_from_dict(yaml.safe_load(yaml.safe_dump(config_to_dict(cfg))))
    assert again == cfg


@pytest.mark.parametrize("override", ["sensor.bogus=1", "control.horizon=0", "ospa.cutoff=-1",
                                      "filter_interval=7", "controllers=[greedy]",
                                      "sensor.eta=abc"])
def test_invalid_configs_are_rejected(override):
    with pytest.raises(ConfigError):
        config_from_dict(apply_overrides(desk_dict(), [override]))


def test_schema_version_and_targets_checked():
    data = desk_dict()
    data["schema_version"] = 2
    with pytest.raises(ConfigError):
        config_from_dict(data)
    data = desk_dict()
    data["targets"] = [{"birth": 100, "death": 50, "state": [0, 0, 0, 0]}]
    with pytest.raises(ConfigError):
        config_from_dict(data)
    with pytest.raises(ConfigError):
        apply_overrides(desk_dict(), ["no_equals_sign"])
