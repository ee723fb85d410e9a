import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from glmbkit.divergence import gaussian_mixture_inner_product, log_gaussian_mixture_inner_product
from glmbkit.errors import DimensionMismatch, InvalidCovariance
from glmbkit.mixture import GaussianMixture, log_sum_exp, reduce_mixture
from glmbkit.oracles import random_mixture

from conftest import gauss, gl_grid_2d


def test_validation():
    with pytest.raises(ValueError):
        GaussianMixture(np.array([0.5, 0.4]), np.zeros((2, 1)), np.ones((2, 1, 1)))
    with pytest.raises(DimensionMismatch):
        GaussianMixture(np.ones(1), np.zeros((1, 2)), np.ones((1, 1, 1)))
    with pytest.raises((InvalidCovariance, ValueError)):
        GaussianMixture.single([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])


def test_log_sum_exp_matches_scipy(rng):
    from scipy.special import logsumexp
    a = rng.normal(size=(5, 7)) * 50
    assert log_sum_exp(a) == pytest.approx(logsumexp(a), abs=1e-12)
    assert log_sum_exp(a, axis=0) == pytest.approx(logsumexp(a, axis=0), abs=1e-12)
    assert log_sum_exp(np.array([-np.inf, -np.inf])) == -np.inf


def test_inner_product_zero_separation():
    v = gaussian_mixture_inner_product(gauss(0.0), gauss(0.0))
    assert v == pytest.approx(1.0 / (2.0 * math.sqrt(math.pi)), abs=1e-15)
    assert gaussian_mixture_inner_product(gauss(0.0), gauss(0.0), K=3.0) == pytest.approx(3 * v)


def test_inner_product_far_apart_stays_finite_in_logs():
    lv = log_gaussian_mixture_inner_product(gauss(0.0), gauss(100.0))
    assert math.isfinite(lv) and lv < math.log(1e-300)
    assert lv == pytest.approx(-0.5 * math.log(4 * math.pi) - 100.0**2 / 4.0, abs=1e-9)


def test_inner_product_matches_quadrature():
    rng = np.random.default_rng(5)
    pts, w = gl_grid_2d()
    for _ in range(3):
        a = random_mixture(rng, 2, 3)
        b = random_mixture(rng, 2, 2)
        ref = float(w @ (a.pdf(pts) * b.pdf(pts)))
        assert gaussian_mixture_inner_product(a, b) == pytest.approx(ref, rel=1e-9)


def test_scaled_changes_density_units():
    g = gauss([1.0, 2.0], 4.0)
    s = g.scaled(10.0)
    assert np.allclose(s.means, [[10.0, 20.0]])
    assert np.allclose(s.covs, 400.0 * np.eye(2))
    assert s.pdf(np.array([10.0, 20.0])) == pytest.approx(g.pdf(np.array([1.0, 2.0])) / 100.0)


def test_reduce_mixture_preserves_moments(rng):
    g = random_mixture(rng, 2, 3)
    one = reduce_mixture(g.weights, g.means, g.covs, max_components=1)
    assert one.size == 1
    assert np.allclose(one.means[0], g.mean())
    second = sum(w * (P + np.outer(m, m)) for w, m, P in zip(g.weights, g.means, g.covs))
    assert np.allclose(one.covs[0] + np.outer(one.means[0], one.means[0]), second)


def test_reduce_mixture_merges_close_and_keeps_far():
    w = np.array([0.4, 0.4, 0.2])
    m = np.array([[0.0], [0.1], [50.0]])
    P = np.ones((3, 1, 1))
    out = reduce_mixture(w, m, P, merge_threshold=4.0)
    assert out.size == 2
    assert sorted(out.weights) == pytest.approx([0.2, 0.8])


def test_reduce_mixture_ignores_underflowed_weights():
    w = np.array([1.0, 0.0, 0.0])
    m = np.array([[0.0], [30.0], [30.1]])
    out = reduce_mixture(w, m, np.ones((3, 1, 1)), max_components=2, merge_threshold=4.0)
    assert np.all(np.isfinite(out.means)) and out.size == 1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_inner_product_symmetric_and_cauchy_schwarz(seed):
    rng = np.random.default_rng(seed)
    a, b = random_mixture(rng, 2), random_mixture(rng, 2)
    ab = log_gaussian_mixture_inner_product(a, b)
    assert ab == pytest.approx(log_gaussian_mixture_inner_product(b, a), abs=1e-12)
    aa = log_gaussian_mixture_inner_product(a, a)
    bb = log_gaussian_mixture_inner_product(b, b)
    assert ab <= 0.5 * (aa + bb) + 1e-12
