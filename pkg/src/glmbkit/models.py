"""Motion, birth and bearing/range sensor models."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from .mixture import GaussianMixture
from .regions import AxisBox
from .rfs import Label

# state layout: [x, vx, y, vy]
POSITION_DIMS = (0, 2)
# stands in for zero clutter so detection likelihood ratios stay finite
MIN_CLUTTER_RATE = 1e-12


def wrap_angle(a):
    """Wrap angles to (-pi, pi]."""
    w = np.mod(np.asarray(a, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    w = np.where(w == -np.pi, np.pi, w)
    return w if np.ndim(w) else float(w)


def cv_matrices(T: float, sigma_v: float) -> Tuple[np.ndarray, np.ndarray]:
    """Transition matrix and process noise of the white-noise acceleration model."""
    F1 = np.array([[1.0, T], [0.0, 1.0]])
    G1 = np.array([[T * T / 2.0], [T]])
    F = np.kron(np.eye(2), F1)
    G = np.kron(np.eye(2), G1)
    Q = G @ (sigma_v**2 * np.eye(2)) @ G.T
    return F, Q


@dataclass(frozen=True)
class MotionModel:
    """Affine-Gaussian transition with constant survival probability."""

    F: np.ndarray
    Q: np.ndarray
    survival_probability: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.survival_probability <= 1.0:
            raise ValueError("survival probability must be in (0, 1]")
        if np.min(np.linalg.eigvalsh(0.5 * (self.Q + self.Q.T))) < -1e-9 * max(1.0, np.abs(self.Q).max()):
            raise ValueError("process noise must be positive semidefinite")

    @classmethod
    def constant_velocity(cls, T: float, sigma_v: float,
                          survival_probability: float = 1.0) -> "MotionModel":
        F, Q = cv_matrices(T, sigma_v)
        return cls(F, Q, survival_probability)

    def propagate(self, gm: GaussianMixture) -> GaussianMixture:
        means = gm.means @ self.F.T
        covs = self.F @ gm.covs @ self.F.T + self.Q
        return GaussianMixture.trusted(gm.weights, means, 0.5 * (covs + np.swapaxes(covs, 1, 2)))

    def sample(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Propagate states of shape (n, d) with process noise."""
        n = x.shape[0]
        noise = rng.multivariate_normal(np.zeros(self.F.shape[0]), self.Q, size=n,
                                        method="eigh")
        return x @ self.F.T + noise


@dataclass(frozen=True)
class BirthModel:
    """Labeled multi-Bernoulli birth: independent existence per birth label."""

    existence_probabilities: Tuple[float, ...]
    densities: Tuple[GaussianMixture, ...]

    def __post_init__(self):
        object.__setattr__(self, "existence_probabilities",
                           tuple(float(r) for r in self.existence_probabilities))
        object.__setattr__(self, "densities", tuple(self.densities))
        if len(self.existence_probabilities) != len(self.densities):
            raise ValueError("one density per birth label is required")
        if any(not 0.0 < r < 1.0 for r in self.existence_probabilities):
            raise ValueError("birth existence probabilities must lie in (0, 1)")

    def labels(self, step: int) -> Tuple[Label, ...]:
        return tuple(Label(step, i) for i in range(len(self.densities)))

    @classmethod
    def none(cls) -> "BirthModel":
        return cls((), ())


@dataclass(frozen=True)
class SensorModel:
    """Bearing/range sensor with range-dependent noise and detection.

    Range noise sd is ``eta * D`` clipped to ``[eta * R1, eta * R2]``;
    detection probability is ``exp(-D^2 / (2 sigma_D^2))``. Clutter is
    Poisson with ``clutter_rate`` points per scan, uniform in bearing over
    (-pi, pi] and in range over ``[0, max_range]``, where ``max_range`` is the
    distance from the sensor to the farthest corner of ``clutter_region``.
    """

    bearing_sd: float
    eta: float
    R1: float
    R2: float
    sigma_D: float
    clutter_rate: float
    clutter_region: AxisBox
    position: Tuple[float, float] = (0.0, 0.0)
    detection_override: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))
        if not (self.eta > 0 and 0 < self.R1 < self.R2 and self.sigma_D > 0
                and self.clutter_rate >= 0 and self.bearing_sd > 0):
            raise ValueError("invalid sensor parameters")

    def at(self, position) -> "SensorModel":
        return replace(self, position=tuple(float(v) for v in position))

    def distance(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        return np.hypot(x[:, 0] - self.position[0], x[:, 2] - self.position[1])

    def range_sd(self, distance) -> np.ndarray:
        return self.eta * np.clip(distance, self.R1, self.R2)

    def detection_probability(self, distance) -> np.ndarray:
        d = np.asarray(distance, dtype=float)
        if self.detection_override is not None:
            return np.full(d.shape, float(self.detection_override))
        return np.exp(-0.5 * (d / self.sigma_D) ** 2)

    def h(self, x: np.ndarray) -> np.ndarray:
        """Noise-free bearing and range for states of shape (n, 4)."""
        x = np.atleast_2d(x)
        dx = x[:, 0] - self.position[0]
        dy = x[:, 2] - self.position[1]
        return np.column_stack([np.arctan2(dy, dx), np.hypot(dx, dy)])

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        dx = x[0] - self.position[0]
        dy = x[2] - self.position[1]
        r2 = max(dx * dx + dy * dy, 1e-12)
        r = math.sqrt(r2)
        return np.array([[-dy / r2, 0.0, dx / r2, 0.0],
                         [dx / r, 0.0, dy / r, 0.0]])

    @property
    def max_range(self) -> float:
        box = self.clutter_region
        corners = [(x, y) for x in (box.lower[0], box.upper[0])
                   for y in (box.lower[1], box.upper[1])]
        return max(math.hypot(x - self.position[0], y - self.position[1]) for x, y in corners)

    def log_clutter_intensity(self) -> float:
        """log of the clutter intensity per unit (rad * m), floored for zero clutter."""
        rate = max(self.clutter_rate, MIN_CLUTTER_RATE)
        return math.log(rate) - math.log(2.0 * math.pi * self.max_range)

    def detection_probability_at(self, x: np.ndarray) -> float:
        return float(self.detection_probability(self.distance(x))[0])

    def detection_probabilities(self, X: np.ndarray) -> np.ndarray:
        return self.detection_probability(self.distance(X))

    def linearize(self, x: np.ndarray):
        """Predicted measurement, Jacobian and noise covariance about ``x``."""
        zhat = self.h(x)[0]
        R = np.diag([self.bearing_sd**2, float(self.range_sd(zhat[1])) ** 2])
        return zhat, self.jacobian(x), R

    def linearize_batch(self, X: np.ndarray):
        """``linearize`` for states of shape (n, 4): arrays (n, 2), (n, 2, 4), (n, 2, 2)."""
        dx = X[:, 0] - self.position[0]
        dy = X[:, 2] - self.position[1]
        r2 = np.maximum(dx * dx + dy * dy, 1e-12)
        r = np.sqrt(r2)
        n = len(X)
        zhat = np.column_stack([np.arctan2(dy, dx), np.hypot(dx, dy)])
        H = np.zeros((n, 2, 4))
        H[:, 0, 0] = -dy / r2
        H[:, 0, 2] = dx / r2
        H[:, 1, 0] = dx / r
        H[:, 1, 2] = dy / r
        R = np.zeros((n, 2, 2))
        R[:, 0, 0] = self.bearing_sd**2
        R[:, 1, 1] = self.range_sd(zhat[:, 1]) ** 2
        return zhat, H, R

    def residual(self, z: np.ndarray, zhat: np.ndarray) -> np.ndarray:
        nu = z - zhat
        nu[..., 0] = wrap_angle(nu[..., 0])
        return nu

    def simulate(self, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Measurement set (m, 2) for target states (n, 4): detections and clutter,
        in random order."""
        states = np.asarray(states, dtype=float).reshape(-1, 4)
        d = self.distance(states) if len(states) else np.empty(0)
        detected = rng.random(len(states)) < self.detection_probability(d)
        det = states[detected]
        z = self.h(det) if len(det) else np.empty((0, 2))
        if len(det):
            noise = rng.standard_normal((len(det), 2))
            z[:, 0] = wrap_angle(z[:, 0] + self.bearing_sd * noise[:, 0])
            z[:, 1] = z[:, 1] + self.range_sd(d[detected]) * noise[:, 1]
        n_c = rng.poisson(self.clutter_rate) if self.clutter_rate > 0 else 0
        clutter = np.column_stack([rng.uniform(-np.pi, np.pi, n_c),
                                   rng.uniform(0.0, self.max_range, n_c)])
        out = np.vstack([z, clutter])
        return out[rng.permutation(len(out))]


@dataclass(frozen=True)
class LinearGaussianSensor:
    """Linear sensor ``z = H x + w`` with constant detection probability.

    Clutter intensity is ``clutter_intensity`` per unit measurement volume.
    """

    H: np.ndarray
    R: np.ndarray
    detection: float = 1.0
    clutter_intensity: float = 1e-12

    def log_clutter_intensity(self) -> float:
        return math.log(self.clutter_intensity)

    def detection_probability_at(self, x: np.ndarray) -> float:
        return float(self.detection)

    def detection_probabilities(self, X: np.ndarray) -> np.ndarray:
        return np.full(len(X), float(self.detection))

    def linearize(self, x: np.ndarray):
        return self.H @ x, self.H, self.R

    def linearize_batch(self, X: np.ndarray):
        n = len(X)
        return (X @ self.H.T, np.broadcast_to(self.H, (n, *self.H.shape)),
                np.broadcast_to(self.R, (n, *self.R.shape)))

    def residual(self, z: np.ndarray, zhat: np.ndarray) -> np.ndarray:
        return z - zhat

    def simulate(self, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        states = np.atleast_2d(states)
        keep = rng.random(len(states)) < self.detection
        z = states[keep] @ self.H.T
        return z + rng.multivariate_normal(np.zeros(len(self.R)), self.R, size=len(z))
