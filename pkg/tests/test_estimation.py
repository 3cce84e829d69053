import math
import unittest

import numpy as np
import pytest

from src.errors import ConfigurationError, DomainError, PreconditionError
from src.estimation import (
    bad_estimate_exponent,
    d_divergence,
    estimate_nu,
    estimate_nu_batch,
    estimate_nu_from_lambda,
    f_a,
    first_kind_error_exponent,
    g_a,
    rate_J,
    rate_J_contraction_form,
    rate_J_divergence_form,
    threshold_exponent,
)
from src.models import HypothesisTest, ModelParams
from src.oracles import contraction_oracle
from src.sampling import stream, sum_sampler


class TestInverse(unittest.TestCase):
    def test_f_examples(self):
        """f_a(x) = (1/x) a^(1/x)"""
        self.assertAlmostEqual(f_a(1.0, 4.0), 0.25, places=15)
        self.assertAlmostEqual(f_a(math.e, 1.0), math.e, places=14)
        self.assertEqual(f_a(2.0, math.inf), 0.0)
        self.assertTrue(math.isfinite(f_a(2.0, 1e-3)))
        self.assertEqual(f_a(2.0, 1e-4), math.inf)

    def test_g_examples(self):
        """g_a inverts f_a, with g_a(0) = inf and g_a(inf) = 0"""
        self.assertAlmostEqual(g_a(math.e, math.e), 1.0, places=13)
        self.assertEqual(g_a(2.0, 0.0), math.inf)
        self.assertEqual(g_a(2.0, math.inf), 0.0)

    def test_round_trip(self):
        """g_a(f_a(x)) recovers x across the bracket and beyond it"""
        for a in (1.0, 1.5, 4.0):
            for x in (0.05, 0.3, 1.0, 5.0, 40.0, 200.0):
                self.assertAlmostEqual(g_a(a, f_a(a, x)) / x, 1.0, places=11, msg=f"a={a}, x={x}")

    def test_domain(self):
        """a < 1 has no inverse; negative or NaN arguments are rejected"""
        with self.assertRaises(DomainError):
            g_a(0.5, 1.0)
        with self.assertRaises(DomainError):
            g_a(2.0, -1.0)
        with self.assertRaises(DomainError):
            f_a(2.0, 0.0)
        with self.assertRaises(DomainError):
            f_a(2.0, math.nan)


def test_estimate_solves_equation(params):
    result = estimate_nu(params, 10.0, 31)
    assert f_a(params.s_lambda, result.nu_hat) == pytest.approx(3.1, rel=1e-12)
    assert result.observed_rate == 3.1
    assert result.solver_iterations > 0


def test_estimate_is_consistent_at_the_mean(params):
    t = 1e6
    observed = round(t * f_a(params.s_lambda, params.nu))
    assert estimate_nu(params, t, observed).nu_hat == pytest.approx(0.7, abs=1e-5)


def test_zero_sum_gives_infinite_estimate(params):
    result = estimate_nu(params, 5.0, 0)
    assert result.nu_hat == math.inf
    assert result.model_dump(mode="json")["nu_hat"] == "inf"


def test_estimator_needs_unit_total_intensity():
    with pytest.raises(PreconditionError, match=r"estimator requires s\(lambda\) >= 1"):
        estimate_nu_from_lambda((0.3, 0.4), 10.0, 5)
    with pytest.raises(PreconditionError):
        estimate_nu_batch(ModelParams(nu=0.7, lambdas=(0.3, 0.4)), 10.0, [1, 2])


def test_estimator_input_domain():
    with pytest.raises(DomainError):
        estimate_nu_from_lambda((1.0, -0.5), 10.0, 5)
    with pytest.raises(DomainError):
        estimate_nu_from_lambda((1.0, 0.5), 0.0, 5)
    with pytest.raises(DomainError):
        estimate_nu_from_lambda((1.0, 0.5), 10.0, -1)


def test_batch_matches_single_estimates(params):
    sums = np.array([0, 3, 12, 3, 40])
    batch = estimate_nu_batch(params, 4.0, sums)
    single = [estimate_nu(params, 4.0, int(h)).nu_hat for h in sums]
    assert batch.tolist() == single


def test_estimates_concentrate_around_true_order(params):
    t = 200.0
    sums = sum_sampler(params, t).draw(stream(2024), 1000)
    estimates = estimate_nu_batch(params, t, sums)
    assert abs(float(np.median(estimates)) - 0.7) < 0.01
    assert float(np.median(np.abs(estimates - 0.7))) <= 0.05


def test_rate_vanishes_at_true_order(params):
    assert rate_J(params, 0.7, 0.7) == 0.0
    assert rate_J(params, 0.7, 0.71) > 0.0
    assert rate_J(params, 0.7, 0.69) > 0.0


def test_rate_example():
    p = ModelParams(nu=0.6, lambdas=(0.6, 0.9))
    assert rate_J(p, 0.6, 0.75) == pytest.approx(0.0997, rel=2e-3)


@pytest.mark.parametrize("nu_hat", [0.2, 0.5, 0.75, 1.0, 3.0])
def test_rate_forms_agree(params, nu_hat):
    value = rate_J(params, 0.7, nu_hat)
    assert rate_J_divergence_form(params, 0.7, nu_hat) == pytest.approx(value, rel=1e-10, abs=1e-14)
    assert rate_J_contraction_form(params, 0.7, nu_hat) == pytest.approx(value, rel=1e-10, abs=1e-14)


@pytest.mark.parametrize("nu_hat", [0.5, 0.75, 1.0])
def test_rate_is_contraction_of_vector_rate(params, nu_hat):
    assert contraction_oracle(params, 0.7, nu_hat) == pytest.approx(rate_J(params, 0.7, nu_hat), rel=1e-8)


def test_rate_edges(params):
    assert rate_J(params, 0.7, 0.0) == math.inf
    assert rate_J(params, 0.7, -0.3) == math.inf
    assert rate_J(params, 0.7, math.inf) == pytest.approx(1.5 ** (1 / 0.7), rel=1e-14)
    with pytest.raises(PreconditionError):
        rate_J(ModelParams(nu=0.7, lambdas=(0.3, 0.4)), 0.7, 0.8)


def test_divergence():
    assert d_divergence(0.0, 2.0) == 2.0
    assert d_divergence(2.0, 2.0) == 0.0
    assert d_divergence(1.0, math.e) == pytest.approx(math.e - 2.0, rel=1e-14)
    with pytest.raises(DomainError):
        d_divergence(1.0, 0.0)


def test_first_kind_error_exponent(params):
    test = HypothesisTest(nu0=0.6, nu1=0.8, k_threshold=0.75)
    assert test.direction == "upper"
    expected = rate_J(ModelParams(nu=0.6, lambdas=params.lambdas), 0.6, 0.75)
    assert first_kind_error_exponent(params, test) == pytest.approx(expected, rel=1e-15)
    lower = HypothesisTest(nu0=0.8, nu1=0.6, k_threshold=0.65)
    assert lower.direction == "lower"
    assert first_kind_error_exponent(params, lower) > 0.0


def test_exponent_grows_with_distance_from_null(params):
    upper = [first_kind_error_exponent(params, HypothesisTest(nu0=0.6, nu1=1.0, k_threshold=k)) for k in np.linspace(0.6, 1.0, 11)]
    assert upper[0] == 0.0
    assert all(b > a for a, b in zip(upper, upper[1:]))
    lower = [first_kind_error_exponent(params, HypothesisTest(nu0=0.6, nu1=0.2, k_threshold=k)) for k in np.linspace(0.6, 0.2, 11)]
    assert all(b > a for a, b in zip(lower, lower[1:]))


def test_threshold_on_wrong_side(params):
    with pytest.raises(ConfigurationError):
        HypothesisTest(nu0=0.6, nu1=0.8, k_threshold=0.5)
    with pytest.raises(ConfigurationError):
        HypothesisTest(nu0=0.6, nu1=0.8, k_threshold=0.7, direction="lower")
    with pytest.raises(ConfigurationError):
        threshold_exponent(params, 0.5, "upper")


def test_bad_estimate_exponent(params, poisson_params):
    assert bad_estimate_exponent(params) == pytest.approx(rate_J(params, 0.7, 1.0), rel=1e-15)
    assert bad_estimate_exponent(params) > 0.0
    assert bad_estimate_exponent(poisson_params) == 0.0
