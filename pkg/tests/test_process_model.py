import math
import unittest

import numpy as np
import pytest
from scipy.stats import poisson

from src.config import Settings
from src.errors import DomainError, RangeError
from src.large_deviations import gradient_at_zero, lambda_limit
from src.models import LatticePoint, ModelParams
from src.oracles import brute_force_mass, brute_force_mean, brute_force_mgf, finite_difference_hessian
from src.process_model import (
    conditional_multinomial_log_pmf,
    covariance_matrix_C,
    joint_log_pmf,
    joint_log_pmf_direct,
    lattice_points,
    log_mgf,
    log_weight_function,
    marginal_sum_log_pmf,
    mean_vector,
    mean_vector_generalized,
    mgf,
    truncation_bound,
    weight_function,
)


class TestPmf(unittest.TestCase):
    def setUp(self):
        """Set up the processes shared by the pmf checks"""
        self.params = ModelParams(nu=0.7, lambdas=(0.6, 0.9))
        self.poisson = ModelParams(nu=1.0, lambdas=(0.6, 0.9))

    def test_marginal_reduces_to_poisson(self):
        """nu = 1 gives a Poisson(s(lambda) t) sum"""
        expected = -3.0 + 2.0 * math.log(3.0) - math.log(2.0)
        self.assertAlmostEqual(marginal_sum_log_pmf(self.poisson, 2.0, 2), expected, places=12)

    def test_conditional_multinomial(self):
        """Given the sum, counts are multinomial with cells lambda_i / s(lambda)"""
        value = conditional_multinomial_log_pmf(self.params, LatticePoint(k=(1, 2)))
        self.assertAlmostEqual(math.exp(value), 3 * 0.4 * 0.6**2, places=14)
        # independent of nu
        self.assertEqual(value, conditional_multinomial_log_pmf(self.poisson, (1, 2)))

    def test_joint_at_origin(self):
        """P(M(t) = 0) = 1 / E_{nu,1}(s(lambda) t^nu)"""
        self.assertAlmostEqual(math.exp(joint_log_pmf(self.poisson, 2.0, (0, 0))), math.exp(-3.0), places=14)

    def test_factorized_and_direct_forms_agree(self):
        """The two closed forms of log P(M(t) = k) agree on the lattice"""
        points = lattice_points(2, 30)
        factored = joint_log_pmf(self.params, 2.0, points)
        direct = joint_log_pmf_direct(self.params, 2.0, points)
        parts = conditional_multinomial_log_pmf(self.params, points) + marginal_sum_log_pmf(
            self.params, 2.0, points.sum(axis=1)
        )
        np.testing.assert_allclose(factored, parts, rtol=0.0, atol=1e-13)
        np.testing.assert_allclose(factored, direct, rtol=1e-13, atol=1e-12)

    def test_rejects_bad_counts(self):
        """Counts must match m and be non-negative"""
        with self.assertRaises(DomainError):
            joint_log_pmf(self.params, 1.0, (1, 2, 3))
        with self.assertRaises(DomainError):
            joint_log_pmf(self.params, 1.0, np.array([1, -1]))
        with self.assertRaises(DomainError):
            LatticePoint(k=(-1, 2))
        with self.assertRaises(DomainError):
            joint_log_pmf(self.params, 0.0, (1, 2))


@pytest.mark.parametrize("nu", [0.4, 0.7, 1.0])
@pytest.mark.parametrize("t", [0.5, 2.0, 8.0])
def test_pmf_sums_to_one(nu, t):
    p = ModelParams(nu=nu, lambdas=(0.6, 0.9))
    total = brute_force_mass(p, t)
    assert 1.0 - 1e-10 <= total <= 1.0 + 1e-12, f"mass {total!r} at nu={nu}, t={t}"


def test_sum_law_is_weighted_poisson(params):
    t = 2.0
    z = params.s_lambda * t**params.nu
    h = np.arange(51)
    difference = marginal_sum_log_pmf(params, t, h) - (poisson.logpmf(h, z) + log_weight_function(params, h))
    np.testing.assert_allclose(difference, difference[0], rtol=0.0, atol=1e-12)


def test_weight_function(params, poisson_params):
    assert weight_function(poisson_params, 12) == pytest.approx(1.0, rel=1e-13)
    assert weight_function(params, 0) == 1.0
    assert weight_function(params, 3) == pytest.approx(6.0 / math.gamma(3.1), rel=1e-13)
    with pytest.raises(RangeError):
        weight_function(ModelParams(nu=0.5, lambdas=(1.0,)), 1000)


def test_mgf_at_zero(params):
    assert mgf(params, 2.0, (0.0, 0.0)) == pytest.approx(1.0, abs=1e-15)


def test_mgf_poisson_closed_form(poisson_params):
    theta = np.array([0.3, -0.5])
    expected = 2.0 * float(np.sum(poisson_params.lambda_array * np.expm1(theta)))
    assert log_mgf(poisson_params, 2.0, theta) == pytest.approx(expected, rel=1e-12)


def test_mgf_against_lattice_sum(params):
    rng = np.random.default_rng(11)
    for theta in rng.uniform(-1.0, 0.5, size=(20, 2)):
        assert mgf(params, 2.0, theta) == pytest.approx(brute_force_mgf(params, 2.0, theta), rel=1e-8)


def test_mgf_overflow_points_to_log_scale(params):
    with pytest.raises(RangeError, match="log_mgf"):
        mgf(params, 100.0, (3.0, 3.0))
    assert log_mgf(params, 100.0, (3.0, 3.0)) > 709.0


def test_mgf_rejects_wrong_dimension(params):
    with pytest.raises(DomainError):
        log_mgf(params, 1.0, (0.1, 0.2, 0.3))


def test_mean_poisson_case(poisson_params):
    np.testing.assert_allclose(mean_vector(poisson_params, 3.0), 3.0 * poisson_params.lambda_array, rtol=1e-13)


def test_mean_against_lattice_sum(params):
    np.testing.assert_allclose(mean_vector(params, 2.0), brute_force_mean(params, 2.0), rtol=1e-9)


def test_mean_rate_converges(params):
    np.testing.assert_allclose(mean_vector(params, 200.0) / 200.0, gradient_at_zero(params), rtol=1e-3)


@pytest.mark.parametrize("t", [0.5, 2.0, 20.0, 1e4])
def test_mean_forms_agree(params, t):
    np.testing.assert_allclose(mean_vector_generalized(params, t), mean_vector(params, t), rtol=1e-11)


def test_covariance_poisson_is_diagonal(poisson_params):
    np.testing.assert_array_equal(covariance_matrix_C(poisson_params).array, np.diag([0.6, 0.9]))


def test_covariance_matches_hessian_of_limit(params):
    c = covariance_matrix_C(params)
    hessian = finite_difference_hessian(lambda theta: lambda_limit(params, theta), np.zeros(2), step=1e-5)
    np.testing.assert_allclose(hessian, c.array, rtol=1e-6)
    assert np.array_equal(c.array, c.array.T)
    assert c.is_positive_definite()


def test_covariance_example_values(params):
    np.testing.assert_allclose(
        covariance_matrix_C(params).array, [[1.1946, 0.2622], [0.2622, 1.9230]], rtol=2e-3
    )


def test_conditional_law_sums_to_one_over_compositions(params):
    points = lattice_points(2, 4)
    points = points[points.sum(axis=1) == 4]
    assert len(points) == 5
    total = math.fsum(np.exp(conditional_multinomial_log_pmf(params, points)))
    assert abs(total - 1.0) <= 1e-14


def test_lattice_points():
    points = lattice_points(2, 4)
    assert len(points) == 15
    assert points.sum(axis=1).max() == 4
    assert len({tuple(row) for row in points}) == 15
    assert len(lattice_points(3, 2)) == 10
    with pytest.raises(DomainError):
        lattice_points(0, 3)


def test_truncation_bound_is_tight_for_poisson(poisson_params):
    z = poisson_params.s_lambda * 2.0
    bound = truncation_bound(poisson_params, 2.0, tail=1e-12)
    assert poisson.sf(bound, z) < 1e-12
    assert poisson.sf(bound - 2, z) >= 1e-12


def test_truncation_bound_reads_tail_setting(poisson_params, monkeypatch):
    strict = truncation_bound(poisson_params, 2.0)
    monkeypatch.setenv("FRACPOISSON_TAIL", "1e-8")
    Settings.reset()
    loose = truncation_bound(poisson_params, 2.0)
    assert loose < strict
    assert poisson.sf(loose, poisson_params.s_lambda * 2.0) < 1e-8


def test_poisson_case_factorizes(poisson_params):
    t = 2.0
    points = lattice_points(2, 12)
    product = poisson.logpmf(points[:, 0], 0.6 * t) + poisson.logpmf(points[:, 1], 0.9 * t)
    np.testing.assert_allclose(joint_log_pmf(poisson_params, t, points), product, rtol=1e-12)
    assert joint_log_pmf(poisson_params, t, (2, 1)) == pytest.approx(
        poisson.logpmf(2, 1.2) + poisson.logpmf(1, 1.8), rel=1e-12
    )
