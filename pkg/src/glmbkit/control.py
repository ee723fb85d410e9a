"""Constrained myopic sensor control.

For each candidate course change the controller

* predicts the posterior over the horizon without measurements and checks
  that the void probability of the exclusion disc around the sensor stays
  above the threshold at every step, and
* estimates the expected Cauchy-Schwarz divergence between the
  measurement-free prediction and the posterior after simulated
  measurements, by Monte Carlo over trajectories drawn from the posterior.

Trajectory samples are shared by all actions (common random numbers).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .divergence import cs_divergence
from .errors import CapExceededWarning, GlmbError, NoActions
from .filter import FilterCaps, predict, update
from .models import POSITION_DIMS, BirthModel, MotionModel, SensorModel, wrap_angle
from .regions import Disc
from .rfs import GlmbDensity, sample_realizations, truncate
from .void import glmb_void_probability

TIE_TOL = 1e-12


@dataclass(frozen=True)
class ActionSpace:
    """Course changes (radians) applied at constant speed.

    ``step_interval`` is the duration of one lookahead step and ``horizon``
    the number of steps.
    """

    course_changes: Tuple[float, ...]
    speed: float
    step_interval: float
    horizon: int

    def __post_init__(self):
        cc = tuple(sorted(float(a) for a in self.course_changes))
        object.__setattr__(self, "course_changes", cc)
        if any(abs(a) > math.pi + 1e-12 for a in cc):
            raise ValueError("course changes must lie in [-pi, pi]")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")

    @classmethod
    def grid(cls, step_deg: float = 20.0, speed: float = 7.0,
             step_interval: float = 80.0, horizon: int = 5,
             max_deg: float = 180.0) -> "ActionSpace":
        n = int(round(max_deg / step_deg))
        angles = [math.radians(i * step_deg) for i in range(-n, n + 1)]
        return cls(tuple(angles), speed, step_interval, horizon)


@dataclass(frozen=True)
class ControlConfig:
    sample_count: int = 50
    exclusion_radius: float = 1000.0
    void_threshold: float = 0.95
    seed: int = 0
    # infinite sample rewards (orthogonal label supports) are clamped to this
    reward_clamp: float = 1e6
    lookahead_birth: bool = False
    # posterior components kept for planning, and truncation inside rollouts
    planning_components: Optional[int] = None
    lookahead_caps: FilterCaps = FilterCaps()
    max_failure_fraction: float = 0.2

    def __post_init__(self):
        if self.sample_count < 1:
            raise ValueError("sample_count must be at least 1")
        if not 0.0 <= self.void_threshold < 1.0:
            raise ValueError("void_threshold must lie in [0, 1)")


@dataclass(frozen=True)
class PlanningModels:
    """Models at the lookahead step interval."""

    motion: MotionModel
    sensor: SensorModel
    birth: BirthModel = BirthModel.none()


@dataclass(frozen=True)
class Platform:
    position: Tuple[float, float]
    heading: float


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    void_probabilities: Tuple[float, ...]

    @property
    def min_void(self) -> float:
        return min(self.void_probabilities)


@dataclass(frozen=True)
class RewardEstimate:
    mean: float
    stderr: float
    samples: Tuple[float, ...]
    failed: int = 0


@dataclass
class Decision:
    action: float
    relaxed: bool
    actions: Tuple[float, ...]
    feasibility: List[Feasibility]
    rewards: List[Optional[RewardEstimate]] = field(default_factory=list)


def sensor_path(platform: Platform, action: float, space: ActionSpace) -> np.ndarray:
    """Sensor positions at lookahead steps 1..H after applying ``action``."""
    heading = platform.heading + action
    step = space.speed * space.step_interval
    i = np.arange(1, space.horizon + 1)[:, None]
    return np.asarray(platform.position) + i * step * np.array([math.cos(heading), math.sin(heading)])


def planning_prior(posterior: GlmbDensity, cfg: ControlConfig) -> GlmbDensity:
    if cfg.planning_components is None:
        return posterior
    return truncate(posterior, cfg.planning_components)[0]


def predicted_sequence(posterior: GlmbDensity, models: PlanningModels, space: ActionSpace,
                       cfg: ControlConfig, step0: int = 0) -> List[GlmbDensity]:
    """Measurement-free predictions for lookahead steps 1..H."""
    birth = models.birth if cfg.lookahead_birth else BirthModel.none()
    out = []
    dens = planning_prior(posterior, cfg)
    for i in range(1, space.horizon + 1):
        dens = predict(dens, models.motion, birth, step0 + i, cfg.lookahead_caps)
        out.append(dens)
    return out


def feasible(action: float, posterior: GlmbDensity, models: PlanningModels,
             space: ActionSpace, cfg: ControlConfig, platform: Platform,
             predictions: Optional[Sequence[GlmbDensity]] = None) -> Feasibility:
    """Void probability of the exclusion disc at every lookahead step."""
    if predictions is None:
        predictions = predicted_sequence(posterior, models, space, cfg)
    path = sensor_path(platform, action, space)
    q = tuple(glmb_void_probability(d, Disc(tuple(u), cfg.exclusion_radius, POSITION_DIMS))
              for d, u in zip(predictions, path))
    return Feasibility(min(q) > cfg.void_threshold, q)


def _stream(cfg: ControlConfig, *key: int) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, *key])


def sample_trajectories(posterior: GlmbDensity, motion: MotionModel, horizon: int,
                        rng: np.random.Generator) -> List[np.ndarray]:
    """One multi-target trajectory: alive states at lookahead steps 1..H."""
    (group,) = sample_realizations(posterior, rng, 1)
    x = group.states[0]
    out = []
    for _ in range(horizon):
        alive = rng.random(len(x)) < motion.survival_probability
        x = x[alive]
        if len(x):
            x = motion.sample(x, rng)
        out.append(x)
    return out


def _rollout(prior: GlmbDensity, first_prediction: GlmbDensity, truth: List[np.ndarray],
             path: np.ndarray, models: PlanningModels, cfg: ControlConfig,
             rng: np.random.Generator, target: GlmbDensity, step0: int) -> float:
    birth = models.birth if cfg.lookahead_birth else BirthModel.none()
    dens = first_prediction
    for i, (states, u) in enumerate(zip(truth, path)):
        if i > 0:
            dens = predict(dens, models.motion, birth, step0 + i + 1, cfg.lookahead_caps)
        sensor = models.sensor.at(u)
        Z = sensor.simulate(states, rng)
        dens = update(dens, Z, sensor, cfg.lookahead_caps)
    return cs_divergence(target, dens)


def expected_reward(action: float, posterior: GlmbDensity, models: PlanningModels,
                    space: ActionSpace, cfg: ControlConfig, platform: Platform,
                    predictions: Optional[Sequence[GlmbDensity]] = None,
                    decision: int = 0, action_index: int = 0,
                    step0: int = 0) -> RewardEstimate:
    """Monte Carlo mean and standard error of the sample rewards."""
    prior = planning_prior(posterior, cfg)
    if predictions is None:
        predictions = predicted_sequence(posterior, models, space, cfg, step0)
    target = predictions[-1]
    path = sensor_path(platform, action, space)
    rewards = []
    failed = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CapExceededWarning)
        for s in range(cfg.sample_count):
            truth = sample_trajectories(prior, models.motion, space.horizon,
                                        _stream(cfg, decision, 0, s))
            rng = _stream(cfg, decision, 1, action_index, s)
            try:
                r = _rollout(prior, predictions[0], truth, path, models, cfg, rng,
                             target, step0)
            except GlmbError:
                failed += 1
                continue
            rewards.append(min(r, cfg.reward_clamp))
    if failed > cfg.max_failure_fraction * cfg.sample_count or not rewards:
        raise GlmbError(f"{failed} of {cfg.sample_count} reward samples failed")
    arr = np.asarray(rewards)
    se = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return RewardEstimate(math.fsum(rewards) / len(rewards), se, tuple(rewards), failed)


def _canonical(actions: Sequence[float], platform: Platform) -> List[int]:
    """Index of the first action with the same resulting heading."""
    seen = {}
    out = []
    for i, a in enumerate(actions):
        key = round(float(wrap_angle(platform.heading + a)), 12)
        out.append(seen.setdefault(key, i))
    return out


def _tie_key(a: float) -> Tuple[float, int]:
    return (abs(round(a, 12)), 1 if a < 0 else 0)


def _relaxed_choice(actions, feas) -> int:
    best = max(f.min_void for f in feas)
    cands = [i for i, f in enumerate(feas) if f.min_void >= best - TIE_TOL]
    return min(cands, key=lambda i: _tie_key(actions[i]))


def evaluate_feasibility(posterior: GlmbDensity, models: PlanningModels, space: ActionSpace,
                         cfg: ControlConfig, platform: Platform, step0: int = 0
                         ) -> Tuple[List[Feasibility], List[GlmbDensity]]:
    preds = predicted_sequence(posterior, models, space, cfg, step0)
    actions = space.course_changes
    canon = _canonical(actions, platform)
    feas: List[Optional[Feasibility]] = [None] * len(actions)
    for i, a in enumerate(actions):
        j = canon[i]
        feas[i] = feas[j] if j != i else feasible(a, posterior, models, space, cfg,
                                                 platform, preds)
    return feas, preds


def select_action(posterior: GlmbDensity, models: PlanningModels, space: ActionSpace,
                  cfg: ControlConfig, platform: Platform, decision: int = 0,
                  step0: int = 0) -> Decision:
    """Feasible action with the largest expected reward.

    Ties within 1e-12 go to the smallest course change, positive first. If
    no action is feasible the one with the largest minimum void probability
    is returned with ``relaxed`` set.
    """
    actions = space.course_changes
    if not actions:
        raise NoActions("the action space is empty")
    feas, preds = evaluate_feasibility(posterior, models, space, cfg, platform, step0)
    rewards: List[Optional[RewardEstimate]] = [None] * len(actions)
    if len(actions) == 1:
        return Decision(actions[0], not feas[0].feasible, actions, feas, rewards)
    ok = [i for i, f in enumerate(feas) if f.feasible]
    if not ok:
        i = _relaxed_choice(actions, feas)
        return Decision(actions[i], True, actions, feas, rewards)
    canon = _canonical(actions, platform)
    for i in ok:
        j = canon[i]
        if rewards[j] is None:
            rewards[j] = expected_reward(actions[j], posterior, models, space, cfg,
                                         platform, preds, decision, j, step0)
        rewards[i] = rewards[j]
    best = max(rewards[i].mean for i in ok)
    cands = [i for i in ok if rewards[i].mean >= best - TIE_TOL]
    i = min(cands, key=lambda i: _tie_key(actions[i]))
    return Decision(actions[i], False, actions, feas, rewards)


def random_action(posterior: GlmbDensity, models: PlanningModels, space: ActionSpace,
                  cfg: ControlConfig, platform: Platform, rng: np.random.Generator,
                  step0: int = 0) -> Decision:
    """Uniformly random feasible course change (baseline controller)."""
    actions = space.course_changes
    if not actions:
        raise NoActions("the action space is empty")
    feas, _ = evaluate_feasibility(posterior, models, space, cfg, platform, step0)
    ok = [i for i, f in enumerate(feas) if f.feasible]
    if not ok:
        i = _relaxed_choice(actions, feas)
        return Decision(actions[i], True, actions, feas)
    i = ok[int(rng.integers(len(ok)))]
    return Decision(actions[i], False, actions, feas)
