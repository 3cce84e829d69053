"""
Estimator of the fractional order nu from the observed sum s(M(t)).

With a = s(lambda) >= 1 the map f_a(x) = (1/x) a^(1/x) is a decreasing bijection
from (0, inf] onto [0, inf); its inverse g_a applied to s(M(t))/t is the
estimator V_t, with g_a(0) = inf. V_t satisfies a large deviation principle
with rate J_nu, which drives the first-kind error exponent of threshold tests.
"""

import logging
import math
from typing import Sequence, Tuple

import numpy as np

from .errors import DomainError, PreconditionError
from .models import EstimatorResult, HypothesisTest, ModelParams, check_threshold_side
from .large_deviations import rate_univariate

logger = logging.getLogger(__name__)

BRACKET = (1e-6, 64.0)
MAX_BISECTIONS = 2000
_LOG_DBL_MAX = math.log(np.finfo(float).max)


def _check_a(a: float) -> None:
    if not (math.isfinite(a) and a >= 1.0):
        raise DomainError(f"f_a is only invertible for a >= 1, got a={a}")


def _log_f(log_a: float, x: float) -> float:
    return -math.log(x) + log_a / x


def f_a(a: float, x: float) -> float:
    """
    f_a(x) = (1/x) a^(1/x), strictly decreasing on (0, inf).

    Args:
        a: Base, a >= 1
        x: Argument, x > 0 (x = inf gives 0)

    Returns:
        float: f_a(x), inf on overflow
    """
    _check_a(a)
    if math.isnan(x) or x <= 0.0:
        raise DomainError(f"f_a needs x > 0, got {x}")
    if math.isinf(x):
        return 0.0
    log_value = _log_f(math.log(a), x)
    if log_value > _LOG_DBL_MAX:
        return math.inf
    return math.exp(log_value)


def _invert_f(a: float, y: float) -> Tuple[float, int]:
    _check_a(a)
    if math.isnan(y) or y < 0.0:
        raise DomainError(f"g_a needs y >= 0, got {y}")
    if y == 0.0:
        return math.inf, 0
    if math.isinf(y):
        return 0.0, 0

    log_a, log_y = math.log(a), math.log(y)
    lo, hi = BRACKET
    iterations = 0
    while _log_f(log_a, lo) < log_y:
        lo /= 8.0
        iterations += 1
    while _log_f(log_a, hi) > log_y:
        hi *= 8.0
        iterations += 1

    while iterations < MAX_BISECTIONS:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        iterations += 1
        if _log_f(log_a, mid) > log_y:
            lo = mid
        else:
            hi = mid

    best = min((lo, hi), key=lambda x: abs(_log_f(log_a, x) - log_y))
    return best, iterations


def g_a(a: float, y: float) -> float:
    """Inverse of f_a by bracketing and bisection; g_a(0) = inf and g_a(inf) = 0."""
    return _invert_f(a, y)[0]


def estimate_nu_from_lambda(lambdas: Sequence[float], t: float, observed_sum: int) -> EstimatorResult:
    """V_t = g_{s(lambda)}(observed_sum / t); only s(lambda) is needed, not nu."""
    if len(lambdas) == 0 or any(not (math.isfinite(lam) and lam > 0.0) for lam in lambdas):
        raise DomainError(f"every lambda_i must be a positive finite number, got {tuple(lambdas)}")
    s_lambda = math.fsum(lambdas)
    if s_lambda < 1.0:
        raise PreconditionError(f"estimator requires s(lambda) >= 1, got s(lambda)={s_lambda}")
    if not (math.isfinite(t) and t > 0.0):
        raise DomainError(f"t must be positive, got {t}")
    if observed_sum < 0:
        raise DomainError("observed sum must be non-negative")
    rate = observed_sum / t
    nu_hat, iterations = _invert_f(s_lambda, rate)
    return EstimatorResult(nu_hat=nu_hat, observed_rate=rate, solver_iterations=iterations)


def estimate_nu(p: ModelParams, t: float, observed_sum: int) -> EstimatorResult:
    """Estimate nu from one observation of s(M(t)); nu_hat > 1 is returned as is."""
    return estimate_nu_from_lambda(p.lambdas, t, observed_sum)


def estimate_nu_batch(p: ModelParams, t: float, sums) -> np.ndarray:
    """V_t for every entry of `sums`, inverting f once per distinct value."""
    if p.s_lambda < 1.0:
        raise PreconditionError(f"estimator requires s(lambda) >= 1, got s(lambda)={p.s_lambda}")
    sums = np.asarray(sums)
    values, inverse = np.unique(sums, return_inverse=True)
    estimates = np.array([g_a(p.s_lambda, float(v) / t) for v in values])
    return estimates[inverse.reshape(sums.shape)]


def d_divergence(l1: float, l2: float) -> float:
    """D(l1; l2) = l1 log(l1/l2) - l1 + l2, with 0 log 0 = 0."""
    if math.isnan(l1) or l1 < 0.0:
        raise DomainError(f"D needs l1 >= 0, got {l1}")
    if not l2 > 0.0:
        raise DomainError(f"D needs l2 > 0, got {l2}")
    if l1 == 0.0:
        return l2
    if math.isinf(l1) or math.isinf(l2):
        return math.inf
    return max(l1 * math.log(l1 / l2) - l1 + l2, 0.0)


def _require_estimator_regime(p: ModelParams) -> None:
    if p.s_lambda < 1.0:
        raise PreconditionError(f"estimator requires s(lambda) >= 1, got s(lambda)={p.s_lambda}")


def _check_nu(nu: float) -> None:
    if not 0.0 < nu <= 1.0:
        raise DomainError(f"nu must lie in (0, 1], got {nu}")


def rate_J(p: ModelParams, nu_true: float, nu_hat: float) -> float:
    """
    Rate J_nu(nu_hat) of the estimator:
    D((nu/nu_hat) s^(1/nu_hat); s^(1/nu)) for nu_hat > 0, inf for nu_hat <= 0,
    and s^(1/nu) at nu_hat = inf.
    """
    _require_estimator_regime(p)
    _check_nu(nu_true)
    if math.isnan(nu_hat):
        raise DomainError("nu_hat must not be NaN")
    log_s = math.log(p.s_lambda)
    l2 = math.exp(log_s / nu_true)
    if nu_hat <= 0.0:
        return math.inf
    if math.isinf(nu_hat):
        return l2

    log_l1 = math.log(nu_true / nu_hat) + log_s / nu_hat
    if log_l1 > _LOG_DBL_MAX:
        return math.inf
    l1 = math.exp(log_l1)
    return max(l1 * (log_l1 - log_s / nu_true) - l1 + l2, 0.0)


def rate_J_divergence_form(p: ModelParams, nu_true: float, nu_hat: float) -> float:
    """J_nu(nu_hat) through d_divergence."""
    _require_estimator_regime(p)
    _check_nu(nu_true)
    if nu_hat <= 0.0:
        return math.inf
    l2 = p.s_lambda ** (1.0 / nu_true)
    if math.isinf(nu_hat):
        return d_divergence(0.0, l2)
    return d_divergence((nu_true / nu_hat) * p.s_lambda ** (1.0 / nu_hat), l2)


def rate_J_contraction_form(p: ModelParams, nu_true: float, nu_hat: float) -> float:
    """J_nu(nu_hat) as the one-dimensional rate of the sum at f_{s(lambda)}(nu_hat)."""
    _require_estimator_regime(p)
    _check_nu(nu_true)
    if nu_hat <= 0.0:
        return math.inf
    return rate_univariate(nu_true, p.s_lambda, f_a(p.s_lambda, nu_hat))


def threshold_exponent(p: ModelParams, k: float, direction: str) -> float:
    """
    -lim (1/t) log P(V_t in R_k) under the true order p.nu, where R_k is
    {V_t >= k} (upper) or {V_t <= k} (lower) on the far side of p.nu.
    """
    check_threshold_side(p.nu, k, direction)
    return rate_J(p, p.nu, k)


def first_kind_error_exponent(p: ModelParams, test: HypothesisTest) -> float:
    """
    J_{nu0}(k), the exponent of the probability of rejecting H0: nu = nu0.

    J_{nu0} decreases on (0, nu0) and increases on (nu0, inf), so the infimum over
    the critical region sits at its boundary k.
    """
    _require_estimator_regime(p)
    null = ModelParams(nu=test.nu0, lambdas=p.lambdas)
    return threshold_exponent(null, test.k_threshold, test.direction)


def bad_estimate_exponent(p: ModelParams) -> float:
    """J_nu(1), the exponent of the event {V_t > 1} of an estimate outside (0, 1]."""
    if p.nu == 1.0:
        return 0.0
    return rate_J(p, p.nu, 1.0)
