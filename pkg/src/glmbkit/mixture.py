"""Gaussian mixtures and the Gaussian product kernel shared by every inner product."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, InvalidCovariance

LOG_2PI = float(np.log(2.0 * np.pi))
WEIGHT_TOL = 1e-9


def log_sum_exp(a, axis=None):
    """``log(sum(exp(a)))``; a lean stand-in for scipy's version on hot paths."""
    a = np.asarray(a, dtype=float)
    if axis is None and a.size:
        m = a.max()
        if not math.isfinite(m):
            return float(m) if m > 0 or m != m else -math.inf
        return float(m + math.log(np.exp(a - m).sum()))
    if a.size == 0:
        return -np.inf if axis is None else np.full(np.delete(a.shape, axis), -np.inf)
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    out = np.squeeze(out, axis=axis) if axis is not None else out.reshape(())
    return float(out) if out.ndim == 0 else out


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


def _checked_covariances(covs: np.ndarray) -> np.ndarray:
    """Symmetrize and verify positive definiteness, jittering once on failure."""
    covs = 0.5 * (covs + np.swapaxes(covs, -1, -2))
    try:
        np.linalg.cholesky(covs)
        return covs
    except np.linalg.LinAlgError:
        pass
    d = covs.shape[-1]
    tr = np.trace(covs, axis1=-2, axis2=-1)
    jitter = 1e-12 * np.maximum(np.abs(tr), 1e-300) / d
    covs = covs + jitter[:, None, None] * np.eye(d)
    try:
        np.linalg.cholesky(covs)
    except np.linalg.LinAlgError as exc:
        raise InvalidCovariance("covariance is not positive definite") from exc
    return covs


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    """Normalized mixture of Gaussians.

    ``weights`` has shape (n,), ``means`` (n, d) and ``covs`` (n, d, d).
    Instances are immutable and are shared by reference between GLMB
    components, so identity doubles as a cache key.
    """

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        m = np.asarray(self.means, dtype=float)
        if m.ndim == 1:
            m = m[None, :]
        P = np.asarray(self.covs, dtype=float)
        if P.ndim == 2:
            P = P[None, :, :]
        n, d = m.shape
        if w.shape != (n,) or P.shape != (n, d, d):
            raise DimensionMismatch(
                f"inconsistent mixture shapes {w.shape}, {m.shape}, {P.shape}")
        if n == 0:
            raise ValueError("mixture needs at least one component")
        if not np.all(w > 0) or abs(w.sum() - 1.0) > WEIGHT_TOL:
            raise ValueError("mixture weights must be positive and sum to 1")
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "means", _frozen(m))
        object.__setattr__(self, "covs", _frozen(_checked_covariances(P)))

    @classmethod
    def trusted(cls, weights, means, covs) -> "GaussianMixture":
        """Construct without validation, for internal results that are valid
        by construction (normalized weights, symmetric positive definite
        covariances of matching shapes)."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "weights", _frozen(weights))
        object.__setattr__(obj, "means", _frozen(means))
        object.__setattr__(obj, "covs", _frozen(covs))
        return obj

    @classmethod
    def single(cls, mean, cov) -> "GaussianMixture":
        return cls(np.ones(1), np.asarray(mean, float)[None, :],
                   np.asarray(cov, float)[None, :, :])

    @classmethod
    def from_log_weights(cls, log_weights, means, covs) -> "GaussianMixture":
        lw = np.asarray(log_weights, dtype=float)
        return cls(np.exp(lw - log_sum_exp(lw)), means, covs)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    def mean(self) -> np.ndarray:
        return self.weights @ self.means

    def best_mean(self) -> np.ndarray:
        """Mean of the highest-weight Gaussian."""
        return self.means[int(np.argmax(self.weights))]

    def marginal(self, dims) -> "GaussianMixture":
        idx = np.asarray(dims, dtype=int)
        return GaussianMixture(self.weights, self.means[:, idx],
                               self.covs[:, idx[:, None], idx[None, :]])

    def pdf(self, x) -> np.ndarray:
        """Density at points ``x`` of shape (..., d)."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1])
        for w, m, P in zip(self.weights, self.means, self.covs):
            out += w * np.exp(gaussian_logpdf(x, m, P))
        return out

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.size == 1:
            comp = np.zeros(n, dtype=int)
        else:
            comp = rng.choice(self.size, size=n, p=self.weights)
        L = np.linalg.cholesky(self.covs)
        z = rng.standard_normal((n, self.dim))
        return self.means[comp] + np.einsum("nij,nj->ni", L[comp], z)

    def scaled(self, factor: float) -> "GaussianMixture":
        """The same mixture with state coordinates multiplied by ``factor``."""
        return GaussianMixture(self.weights, self.means * factor,
                               self.covs * factor**2)


@dataclass(frozen=True, eq=False)
class IntensityMixture:
    """Unnormalized Gaussian mixture ``mass * mixture``.

    ``mixture`` is None exactly when ``mass`` is zero.
    """

    mass: float
    mixture: Optional[GaussianMixture]

    def __post_init__(self):
        if not np.isfinite(self.mass) or self.mass < 0:
            raise ValueError("intensity mass must be finite and non-negative")
        if (self.mixture is None) != (self.mass == 0):
            raise ValueError("a zero-mass intensity has no mixture and vice versa")

    @classmethod
    def zero(cls) -> "IntensityMixture":
        return cls(0.0, None)

    def pdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.mixture is None:
            return np.zeros(x.shape[:-1])
        return self.mass * self.mixture.pdf(x)


def gaussian_logpdf(x, mean, cov) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    d = mean.shape[0]
    L = np.linalg.cholesky(cov)
    diff = (x - mean).reshape(-1, d)
    sol = np.linalg.solve(L, diff.T)
    maha = np.sum(sol**2, axis=0)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    return (-0.5 * (maha + logdet + d * LOG_2PI)).reshape(x.shape[:-1])


def log_product_kernel(a: GaussianMixture, b: GaussianMixture) -> np.ndarray:
    """Matrix of ``log N(m_i; m_j, P_i + P_j)`` over component pairs."""
    if a.dim != b.dim:
        raise DimensionMismatch(f"dimensions {a.dim} and {b.dim} differ")
    diff = a.means[:, None, :] - b.means[None, :, :]
    S = a.covs[:, None, :, :] + b.covs[None, :, :, :]
    L = np.linalg.cholesky(S)
    sol = np.linalg.solve(L, diff[..., None])[..., 0]
    maha = np.sum(sol**2, axis=-1)
    logdet = 2.0 * np.sum(np.log(np.diagonal(L, axis1=-2, axis2=-1)), axis=-1)
    return -0.5 * (maha + logdet + a.dim * LOG_2PI)


def log_mixture_inner_product(a: GaussianMixture, b: GaussianMixture) -> float:
    """``log ∫ a(x) b(x) dx`` evaluated in closed form."""
    K = log_product_kernel(a, b)
    return float(log_sum_exp(K + np.log(a.weights)[:, None] + np.log(b.weights)[None, :]))


def reduce_mixture(weights, means, covs, max_components: Optional[int] = None,
                   merge_threshold: float = 0.0) -> GaussianMixture:
    """Greedy moment-matched merging followed by a cap on the component count.

    ``weights`` need not be normalized. Starting from the heaviest remaining
    Gaussian, every Gaussian within squared Mahalanobis distance
    ``merge_threshold`` (under its own covariance) is merged into it. The
    heaviest ``max_components`` survivors are kept and renormalized.
    """
    w = np.asarray(weights, dtype=float)
    m = np.asarray(means, dtype=float)
    P = np.asarray(covs, dtype=float)
    pos = w > 0
    if not pos.all() and pos.any():
        # underflowed Gaussians would form zero-weight merge groups
        w, m, P = w[pos], m[pos], P[pos]
    if max_components == 1 and len(w) > 1:
        return GaussianMixture.trusted(np.ones(1), *_moment_match(w, m, P))
    if merge_threshold > 0 and len(w) > 1:
        remaining = np.argsort(-w, kind="stable")
        out_w, out_m, out_P = [], [], []
        Pinv = np.linalg.inv(P)
        while remaining.size:
            j = remaining[0]
            diff = m[remaining] - m[j]
            d2 = np.einsum("ni,nij,nj->n", diff, Pinv[remaining], diff)
            grp = remaining[d2 <= merge_threshold]
            tot = w[grp].sum()
            mean, cov = _moment_match(w[grp], m[grp], P[grp])
            out_w.append(tot)
            out_m.append(mean[0])
            out_P.append(cov[0])
            remaining = remaining[d2 > merge_threshold]
        w, m, P = np.array(out_w), np.array(out_m), np.array(out_P)
    if max_components is not None and len(w) > max_components:
        keep = np.sort(np.argsort(-w, kind="stable")[:max_components])
        w, m, P = w[keep], m[keep], P[keep]
    return GaussianMixture.trusted(w / w.sum(), m, P)


def _moment_match(w, m, P):
    tot = w.sum()
    mean = w @ m / tot
    dm = m - mean
    cov = (np.einsum("n,nij->ij", w, P) + np.einsum("n,ni,nj->ij", w, dm, dm)) / tot
    return mean[None, :], 0.5 * (cov + cov.T)[None, :, :]
