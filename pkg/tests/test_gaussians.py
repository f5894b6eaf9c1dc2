import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from hiersearch.errors import DimensionError, ValidationError
from hiersearch.gaussians import (
    COVARIANCE_ABS_FLOOR,
    ClassGaussian,
    bhattacharyya_coefficient,
    bhattacharyya_distance,
    fit_gaussian,
    mahalanobis,
)


def gaussian_1d(mu, var, class_id=0):
    sigma = np.array([[var]], dtype=np.float64)
    chol = np.linalg.cholesky(sigma)
    return ClassGaussian(
        class_id=class_id,
        mu=np.array([mu], dtype=np.float64),
        sigma=sigma,
        chol=chol,
        log_det=2.0 * float(np.log(chol[0, 0])),
        count=1,
    )


def gaussian_nd(mu, sigma, class_id=0):
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    chol = np.linalg.cholesky(sigma)
    return ClassGaussian(
        class_id=class_id,
        mu=mu,
        sigma=sigma,
        chol=chol,
        log_det=2.0 * float(np.sum(np.log(np.diag(chol)))),
        count=1,
    )


def overlap_by_quadrature(a: ClassGaussian, b: ClassGaussian) -> float:
    """Independent 1-D oracle: integrate sqrt(p_a * p_b) numerically."""
    mu_a, var_a = float(a.mu[0]), float(a.sigma[0, 0])
    mu_b, var_b = float(b.mu[0]), float(b.sigma[0, 0])

    def integrand(x):
        pa = math.exp(-0.5 * (x - mu_a) ** 2 / var_a) / math.sqrt(2 * math.pi * var_a)
        pb = math.exp(-0.5 * (x - mu_b) ** 2 / var_b) / math.sqrt(2 * math.pi * var_b)
        return math.sqrt(pa * pb)

    lo = min(mu_a - 12 * math.sqrt(var_a), mu_b - 12 * math.sqrt(var_b))
    hi = max(mu_a + 12 * math.sqrt(var_a), mu_b + 12 * math.sqrt(var_b))
    value, _ = quad(integrand, lo, hi, limit=200)
    return value


class TestFitGaussian:
    def test_single_vector_floor_covariance(self):
        v = np.array([2.0, -1.0])
        g = fit_gaussian(v[None, :], reg_epsilon=1e-3, class_id=5)
        np.testing.assert_array_equal(g.mu, v)
        expected = 1e-3 * COVARIANCE_ABS_FLOOR * np.eye(2)
        np.testing.assert_allclose(g.sigma, expected)
        assert g.count == 1 and g.class_id == 5

    def test_symmetric_square_gives_identity_covariance(self):
        pts = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [2.0, 2.0]])
        g = fit_gaussian(pts, reg_epsilon=0.0)
        np.testing.assert_allclose(g.mu, [1.0, 1.0])
        np.testing.assert_allclose(g.sigma, np.eye(2), atol=1e-12)

    def test_monte_carlo_recovery(self):
        rng = np.random.default_rng(123)
        true_mu = np.array([1.0, -2.0])
        true_sigma = np.array([[2.0, 0.6], [0.6, 1.0]])
        samples = rng.multivariate_normal(true_mu, true_sigma, size=10_000)
        g = fit_gaussian(samples, reg_epsilon=0.0)
        assert np.linalg.norm(g.mu - true_mu) < 0.05
        assert np.linalg.norm(g.sigma - true_sigma, "fro") < 0.1

    def test_population_divisor(self):
        pts = np.array([[0.0], [2.0]])
        g = fit_gaussian(pts, reg_epsilon=0.0)
        # divisor n: var = ((1)^2 + (1)^2) / 2 = 1
        assert g.sigma[0, 0] == pytest.approx(1.0)

    def test_empty_input_rejected(self):
        with pytest.raises(ValidationError):
            fit_gaussian(np.empty((0, 3)))

    def test_cholesky_consistency(self):
        rng = np.random.default_rng(7)
        g = fit_gaussian(rng.normal(size=(40, 6)))
        np.testing.assert_allclose(g.chol @ g.chol.T, g.sigma, rtol=1e-7)
        assert g.log_det == pytest.approx(
            2.0 * np.sum(np.log(np.diag(g.chol)))
        )


class TestBhattacharyyaDistance:
    def test_identical_distributions_give_zero(self):
        g = gaussian_nd([1.0, 2.0], [[2.0, 0.3], [0.3, 1.0]])
        assert bhattacharyya_distance(g, g) == 0.0

    def test_unit_variance_mean_shift(self):
        a = gaussian_1d(0.0, 1.0)
        b = gaussian_1d(1.0, 1.0)
        assert bhattacharyya_distance(a, b) == pytest.approx(0.125, abs=1e-12)

    def test_pure_covariance_mismatch(self):
        a = gaussian_nd([0.0, 0.0], np.eye(2))
        b = gaussian_nd([0.0, 0.0], 2.0 * np.eye(2))
        expected = 0.5 * math.log(2.25 / 2.0)
        assert bhattacharyya_distance(a, b) == pytest.approx(expected, abs=1e-12)

    def test_1d_closed_form_matches_quadrature(self):
        rng = np.random.default_rng(2024)
        for _ in range(100):
            a = gaussian_1d(rng.uniform(-3, 3), rng.uniform(0.1, 4.0))
            b = gaussian_1d(rng.uniform(-3, 3), rng.uniform(0.1, 4.0))
            closed = bhattacharyya_distance(a, b)
            oracle = -math.log(overlap_by_quadrature(a, b))
            assert closed == pytest.approx(oracle, abs=1e-6)

    @settings(max_examples=100, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2**31))
    def test_symmetry(self, seed):
        rng = np.random.default_rng(seed)
        dim = int(rng.integers(1, 6))
        a = fit_gaussian(rng.normal(size=(30, dim)), class_id=0)
        b = fit_gaussian(rng.normal(scale=2.0, size=(30, dim)), class_id=1)
        assert bhattacharyya_distance(a, b) == pytest.approx(
            bhattacharyya_distance(b, a), abs=1e-10
        )

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(DimensionError):
            bhattacharyya_distance(gaussian_1d(0, 1), gaussian_nd([0, 0], np.eye(2)))


class TestBhattacharyyaCoefficient:
    def test_full_overlap_is_one(self):
        g = gaussian_nd([0.5, -0.5], [[1.0, 0.2], [0.2, 0.8]])
        assert bhattacharyya_coefficient(g, g) == 1.0

    def test_unit_shift_value(self):
        a = gaussian_1d(0.0, 1.0)
        b = gaussian_1d(1.0, 1.0)
        assert bhattacharyya_coefficient(a, b) == pytest.approx(
            math.exp(-0.125), abs=1e-9
        )

    def test_widely_separated_classes_underflow_to_zero(self):
        a = gaussian_1d(0.0, 0.01)
        b = gaussian_1d(9.9, 0.01)
        # mean term alone is 9.9^2 / (8 * 0.01) ~ 1225.1
        assert bhattacharyya_distance(a, b) == pytest.approx(1225.125, abs=1e-6)
        assert bhattacharyya_coefficient(a, b) == 0.0

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2**31))
    def test_coefficient_in_unit_interval(self, seed):
        rng = np.random.default_rng(seed)
        dim = int(rng.integers(1, 5))
        a = fit_gaussian(rng.normal(size=(20, dim)), class_id=0)
        b = fit_gaussian(rng.normal(loc=1.0, size=(20, dim)), class_id=1)
        bc = bhattacharyya_coefficient(a, b)
        assert 0.0 <= bc <= 1.0


class TestMahalanobis:
    def test_zero_at_mean(self):
        g = gaussian_nd([3.0, -1.0], [[2.0, 0.1], [0.1, 0.5]])
        assert mahalanobis(g, g.mu) == 0.0

    def test_identity_covariance_is_euclidean(self):
        g = gaussian_nd([0.0, 0.0], np.eye(2))
        assert mahalanobis(g, np.array([3.0, 4.0])) == pytest.approx(5.0)

    def test_axis_scaling(self):
        g = gaussian_nd([0.0, 0.0], np.diag([4.0, 1.0]))
        assert mahalanobis(g, np.array([2.0, 0.0])) == pytest.approx(1.0)

    def test_batch_matches_single(self):
        rng = np.random.default_rng(11)
        g = fit_gaussian(rng.normal(size=(50, 4)))
        xs = rng.normal(size=(10, 4))
        batch = mahalanobis(g, xs)
        singles = np.array([mahalanobis(g, x) for x in xs])
        np.testing.assert_allclose(batch, singles, rtol=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2**31))
    def test_whitening_identity(self, seed):
        rng = np.random.default_rng(seed)
        g = fit_gaussian(rng.normal(size=(40, 3)))
        z = rng.normal(size=3)
        x = g.mu + g.chol @ z
        assert mahalanobis(g, x) == pytest.approx(np.linalg.norm(z), abs=1e-8)

    def test_dimension_mismatch_rejected(self):
        g = gaussian_nd([0.0, 0.0], np.eye(2))
        with pytest.raises(DimensionError):
            mahalanobis(g, np.zeros(3))
