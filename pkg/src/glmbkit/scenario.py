"""Scenario configuration, ground truth, measurement simulation and OSPA.

Scenario files are YAML documents with a ``schema_version`` header. Every
section maps onto a dataclass below; unknown keys are rejected so typos do
not silently fall back to defaults.
"""

from __future__ import annotations

import copy
import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml
from scipy.optimize import linear_sum_assignment

from .control import ActionSpace, ControlConfig, PlanningModels
from .errors import ConfigError
from .filter import FilterCaps
from .mixture import GaussianMixture
from .models import POSITION_DIMS, BirthModel, MotionModel, SensorModel
from .regions import AxisBox

SCHEMA_VERSION = 1
CONTROLLERS = ("csd", "random", "stationary")


@dataclass(frozen=True)
class TargetSpec:
    birth: float
    death: float
    state: Tuple[float, float, float, float]


@dataclass(frozen=True)
class MotionSection:
    sigma_v: float = 0.01
    survival_probability: float = 0.99


@dataclass(frozen=True)
class BirthSection:
    existence_probability: float = 0.02
    sites: Tuple[Tuple[float, float], ...] = ()
    position_sd: float = 500.0
    velocity_sd: float = 5.0


@dataclass(frozen=True)
class SensorSection:
    bearing_sd_deg: float = 2.0
    eta: float = 0.1
    R1: float = 1000.0
    R2: float = 10000.0
    sigma_D: float = 20000.0
    clutter_rate: float = 100.0


@dataclass(frozen=True)
class PlatformSection:
    position: Tuple[float, float] = (0.0, 0.0)
    heading_deg: float = 0.0
    speed: float = 7.0
    # moving controllers leave at this time on the initial heading, or at
    # their first decision if that comes earlier
    start_time: float = 400.0


@dataclass(frozen=True)
class CapsSection:
    max_components: Optional[int] = None
    min_weight: float = 0.0
    max_predicted: Optional[int] = None
    max_subsets: Optional[int] = None
    subset_log_ratio: float = -math.inf
    hypothesis_budget: Optional[int] = None
    exhaustive_limit: int = 256
    gate: Optional[float] = 6.0
    marginalize: bool = False
    max_gaussians: Optional[int] = None
    merge_threshold: float = 0.0

    def caps(self) -> FilterCaps:
        return FilterCaps(**dataclasses.asdict(self))


@dataclass(frozen=True)
class ControlSection:
    first_decision: float = 400.0
    decision_interval: float = 400.0
    step_interval: float = 80.0
    horizon: int = 5
    step_deg: float = 20.0
    sample_count: int = 50
    exclusion_radius: float = 1000.0
    void_threshold: float = 0.95
    reward_clamp: float = 1e6
    lookahead_birth: bool = False
    planning_components: Optional[int] = None
    lookahead: CapsSection = CapsSection()


@dataclass(frozen=True)
class OspaSection:
    cutoff: float = 200.0
    order: float = 2.0


@dataclass(frozen=True)
class HeatmapSection:
    bins: Tuple[int, int] = (40, 40)


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    duration: float
    targets: Tuple[TargetSpec, ...]
    region: AxisBox
    filter_interval: float = 10.0
    monte_carlo_runs: int = 1
    controllers: Tuple[str, ...] = CONTROLLERS
    seed: int = 0
    motion: MotionSection = MotionSection()
    birth: BirthSection = BirthSection()
    sensor: SensorSection = SensorSection()
    platform: PlatformSection = PlatformSection()
    filter: CapsSection = CapsSection()
    control: ControlSection = ControlSection()
    ospa: OspaSection = OspaSection()
    heatmap: HeatmapSection = HeatmapSection()

    @property
    def num_steps(self) -> int:
        return int(round(self.duration / self.filter_interval))

    def step_time(self, k: int) -> float:
        return k * self.filter_interval

    def decision_steps(self) -> List[int]:
        c = self.control
        out = []
        t = c.first_decision
        while t < self.duration - 1e-9:
            out.append(int(round(t / self.filter_interval)))
            t += c.decision_interval
        return out

    # --- model construction ---

    def motion_model(self, dt: Optional[float] = None) -> MotionModel:
        dt = self.filter_interval if dt is None else dt
        ps = self.motion.survival_probability ** (dt / self.filter_interval)
        return MotionModel.constant_velocity(dt, self.motion.sigma_v, ps)

    def sensor_model(self) -> SensorModel:
        s = self.sensor
        return SensorModel(math.radians(s.bearing_sd_deg), s.eta, s.R1, s.R2, s.sigma_D,
                           s.clutter_rate, self.region, self.platform.position)

    def birth_model(self) -> BirthModel:
        b = self.birth
        cov = np.diag([b.position_sd**2, b.velocity_sd**2, b.position_sd**2, b.velocity_sd**2])
        dens = tuple(GaussianMixture.single([x, 0.0, y, 0.0], cov) for x, y in b.sites)
        return BirthModel((b.existence_probability,) * len(dens), dens)

    def action_space(self) -> ActionSpace:
        c = self.control
        return ActionSpace.grid(c.step_deg, self.platform.speed, c.step_interval, c.horizon)

    def control_config(self, seed: int) -> ControlConfig:
        c = self.control
        return ControlConfig(c.sample_count, c.exclusion_radius, c.void_threshold, seed,
                             c.reward_clamp, c.lookahead_birth, c.planning_components,
                             c.lookahead.caps())

    def planning_models(self) -> PlanningModels:
        return PlanningModels(self.motion_model(self.control.step_interval), self.sensor_model(),
                              self.birth_model())


# --- loading, overrides and validation ---------------------------------------

_NESTED = {
    "motion": MotionSection, "birth": BirthSection, "sensor": SensorSection,
    "platform": PlatformSection, "filter": CapsSection, "control": ControlSection,
    "ospa": OspaSection, "heatmap": HeatmapSection,
}


def _tuplify(v):
    if isinstance(v, list):
        return tuple(_tuplify(x) for x in v)
    return v


def _coerce(annotation: str, v, path: str):
    # YAML 1.1 reads "1.0e6" and "-inf" as strings
    if isinstance(v, str) and "float" in str(annotation):
        try:
            return float(v)
        except ValueError:
            raise ConfigError(f"{path}: expected a number, got {v!r}") from None
    return _tuplify(v)


def _section(cls, data, path: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(names)
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {sorted(unknown)}")
    kw = {}
    for k, v in data.items():
        if cls is ControlSection and k == "lookahead":
            kw[k] = _section(CapsSection, v, f"{path}.{k}")
        else:
            kw[k] = _coerce(names[k].type, v, f"{path}.{k}")
    try:
        return cls(**kw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{path}: {e}") from None


def config_from_dict(data: Dict[str, Any]) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("scenario file must be a mapping")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    data = dict(data)
    data.pop("schema_version")
    top = {"name", "duration", "targets", "region", "filter_interval", "monte_carlo_runs",
           "controllers", "seed", *_NESTED}
    unknown = set(data) - top
    if unknown:
        raise ConfigError(f"unknown top-level key(s) {sorted(unknown)}")
    for key in ("name", "duration", "targets", "region"):
        if key not in data:
            raise ConfigError(f"missing required key {key!r}")
    try:
        targets = tuple(TargetSpec(float(t["birth"]), float(t["death"]),
                                   tuple(float(v) for v in t["state"]))
                        for t in data.pop("targets"))
        reg = data.pop("region")
        region = AxisBox(tuple(reg["lower"]), tuple(reg["upper"]), position_dims=POSITION_DIMS)
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"targets/region: {e}") from None
    kw = {k: _section(cls, data.pop(k, None), k) for k, cls in _NESTED.items()}
    if "controllers" in data:
        data["controllers"] = tuple(data["controllers"])
    cfg = ScenarioConfig(targets=targets, region=region, **kw, **data)
    validate(cfg)
    return cfg


def apply_overrides(data: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """Apply ``a.b.c=value`` overrides; values are parsed as YAML scalars."""
    data = copy.deepcopy(data)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        node = data
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a non-mapping")
        node[parts[-1]] = yaml.safe_load(raw)
    return data


def load_config_dict(path: str, overrides: Sequence[str] = ()) -> Dict[str, Any]:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"{path}: {e}") from None
    return apply_overrides(data, overrides)


def load_config(path: str, overrides: Sequence[str] = ()) -> ScenarioConfig:
    return config_from_dict(load_config_dict(path, overrides))


def validate(cfg: ScenarioConfig) -> None:
    def ratio_ok(a, b):
        r = a / b
        return abs(r - round(r)) < 1e-9

    if cfg.duration <= 0 or cfg.filter_interval <= 0:
        raise ConfigError("duration and filter_interval must be positive")
    if not ratio_ok(cfg.duration, cfg.filter_interval):
        raise ConfigError("filter_interval must divide duration")
    c = cfg.control
    for name in ("first_decision", "decision_interval", "step_interval"):
        v = getattr(c, name)
        if v <= 0 or not ratio_ok(v, cfg.filter_interval):
            raise ConfigError(f"control.{name} must be a positive multiple of filter_interval")
    if cfg.platform.start_time < 0 or not ratio_ok(cfg.platform.start_time, cfg.filter_interval):
        raise ConfigError("platform.start_time must be a non-negative multiple of filter_interval")
    for i, t in enumerate(cfg.targets):
        if not t.death > t.birth:
            raise ConfigError(f"target {i}: death must be after birth")
        if len(t.state) != 4:
            raise ConfigError(f"target {i}: state must have 4 entries [x, vx, y, vy]")
    if cfg.monte_carlo_runs < 1:
        raise ConfigError("monte_carlo_runs must be at least 1")
    bad = [c for c in cfg.controllers if c not in CONTROLLERS]
    if bad or not cfg.controllers:
        raise ConfigError(f"controllers must be drawn from {CONTROLLERS}")
    if cfg.ospa.cutoff <= 0 or cfg.ospa.order < 1:
        raise ConfigError("ospa needs cutoff > 0 and order >= 1")
    if cfg.region.is_null:
        raise ConfigError("region must have positive area")
    try:
        cfg.sensor_model()
        cfg.birth_model()
        cfg.motion_model()
        cfg.action_space()
        cfg.control_config(0)
    except (ValueError, TypeError) as e:
        raise ConfigError(str(e)) from None


def config_to_dict(cfg: ScenarioConfig) -> Dict[str, Any]:
    """Plain-data form of a config, loadable by ``config_from_dict``."""

    def plain(v):
        if dataclasses.is_dataclass(v):
            return {f.name: plain(getattr(v, f.name)) for f in dataclasses.fields(v)}
        if isinstance(v, (tuple, list)):
            return [plain(x) for x in v]
        if isinstance(v, float) and math.isinf(v):
            return "-inf" if v < 0 else "inf"
        return v

    out: Dict[str, Any] = {"schema_version": SCHEMA_VERSION}
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if f.name == "region":
            out["region"] = {"lower": list(v.lower), "upper": list(v.upper)}
        else:
            out[f.name] = plain(v)
    return out


# --- ground truth and measurements --------------------------------------------

def simulate_truth(cfg: ScenarioConfig, rng: np.random.Generator
                   ) -> List[List[Tuple[int, np.ndarray]]]:
    """Target ``(id, state)`` lists for filter steps ``1..K`` (time ``k T``).

    A target exists at step ``k`` when ``birth <= kT < death``. It starts from
    its configured state at the first step it exists and then follows the
    constant-velocity model with process noise.
    """
    motion = cfg.motion_model()
    K = cfg.num_steps
    out: List[List[Tuple[int, np.ndarray]]] = [[] for _ in range(K)]
    for tid, t in enumerate(cfg.targets):
        x = np.asarray(t.state, dtype=float)
        started = False
        for k in range(1, K + 1):
            time = cfg.step_time(k)
            if not t.birth <= time + 1e-9 < t.death:
                continue
            if started:
                x = motion.sample(x[None, :], rng)[0]
            started = True
            out[k - 1].append((tid, x.copy()))
    return out


def simulate_measurements(states: np.ndarray, sensor: SensorModel,
                          rng: np.random.Generator) -> np.ndarray:
    """Detections with range-dependent noise plus Poisson clutter, shuffled."""
    return sensor.simulate(states, rng)


# --- OSPA ----------------------------------------------------------------------

@dataclass(frozen=True)
class OspaResult:
    distance: float
    localization: float
    cardinality: float


def ospa(estimates, truth, c: float = 200.0, p: float = 2.0) -> OspaResult:
    """OSPA distance between two finite point sets (rows are points)."""
    if c <= 0 or p < 1:
        raise ValueError("ospa needs c > 0 and p >= 1")
    X = np.asarray(estimates, dtype=float).reshape(len(estimates), -1) if len(estimates) else np.empty((0, 0))
    Y = np.asarray(truth, dtype=float).reshape(len(truth), -1) if len(truth) else np.empty((0, 0))
    m, n = len(X), len(Y)
    if m == 0 and n == 0:
        return OspaResult(0.0, 0.0, 0.0)
    if m > n:
        X, Y, m, n = Y, X, n, m
    if m == 0:
        return OspaResult(float(c), 0.0, float(c))
    d = np.sqrt(((X[:, None, :] - Y[None, :, :]) ** 2).sum(-1))
    cost = np.minimum(d, c) ** p
    rows, cols = linear_sum_assignment(cost)
    loc = float(cost[rows, cols].sum())
    card = float(c**p * (n - m))
    return OspaResult(((loc + card) / n) ** (1.0 / p), (loc / n) ** (1.0 / p),
                      (card / n) ** (1.0 / p))
