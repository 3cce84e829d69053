"""
Mittag-Leffler functions E_{alpha,beta}(z) and E^gamma_{alpha,beta}(z) for z >= 0.

Three evaluation regimes, chosen from w = z^(1/alpha):
  - w <= 30: series terms exponentiated and summed directly
  - 30 < w < 200: series terms combined by log-sum-exp
  - w >= 200 (alpha < 2): leading exponential asymptotic plus algebraic correction

The generalized function E^gamma is summed as a series, with the number of terms
grown with w. For gamma = 2 in the asymptotic regime it is assembled from the
two-parameter functions E_{alpha,beta-1} and E_{alpha,beta}.
"""

import logging
import math
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from scipy.special import gammaln, logsumexp, rgamma

from .errors import ConvergenceError, DomainError, RangeError
from .models import MLQuery

logger = logging.getLogger(__name__)

LINEAR_SWITCH = 30.0
ASYMPTOTIC_SWITCH = 200.0
MAX_TERMS = 10_000
ASYMPTOTIC_CORRECTION_TERMS = 10

_CHUNK = 256
_LOG_REL_TOL = math.log(1e-16)
_LOG_DBL_MAX = math.log(np.finfo(float).max)


def _log_terms(alpha: float, beta: float, gamma: float, log_z: float, start: int, stop: int) -> np.ndarray:
    r = np.arange(start, stop, dtype=float)
    terms = r * log_z - gammaln(alpha * r + beta)
    if gamma != 1.0:
        # (gamma)^(r) / r!
        terms += gammaln(gamma + r) - gammaln(gamma) - gammaln(r + 1.0)
    return terms


def _series(alpha: float, beta: float, gamma: float, z: float) -> Tuple[float, Optional[float]]:
    """Sum the power series; returns (log value, linear value or None)."""
    if z == 0.0:
        log_value = -float(gammaln(beta))
        return log_value, math.exp(log_value)

    log_z = math.log(z)
    w = z ** (1.0 / alpha)
    # the terms peak near r = w / alpha
    limit = max(MAX_TERMS, int(4.0 * w / alpha) + _CHUNK)
    log_total = -math.inf
    kept = []
    start = 0
    while start < limit:
        stop = min(start + _CHUNK, limit)
        terms = _log_terms(alpha, beta, gamma, log_z, start, stop)
        log_total = float(np.logaddexp(log_total, logsumexp(terms)))
        if w <= LINEAR_SWITCH:
            kept.append(terms)
        tail = terms[-3:]
        # The log-terms are concave in r, so three decreasing negligible terms
        # mean the remaining tail is negligible too.
        if len(tail) == 3 and np.all(np.diff(tail) < 0.0) and np.all(tail - log_total < _LOG_REL_TOL):
            if w <= LINEAR_SWITCH:
                value = math.fsum(np.exp(np.concatenate(kept)))
                return math.log(value), value
            return log_total, None
        start = stop

    raise ConvergenceError(
        "Mittag-Leffler series did not converge",
        {"alpha": alpha, "beta": beta, "gamma": gamma, "z": z, "terms": limit},
    )


def _log_asymptotic(alpha: float, beta: float, z: float) -> float:
    if z <= 0.0:
        raise DomainError("the asymptotic expansion needs z > 0")
    log_z = math.log(z)
    log_leading = -math.log(alpha) + (1.0 - beta) / alpha * log_z + z ** (1.0 / alpha)
    k = np.arange(1, ASYMPTOTIC_CORRECTION_TERMS + 1, dtype=float)
    correction = float(np.sum(np.exp(-k * log_z) * rgamma(beta - alpha * k)))
    return log_leading + math.log1p(-correction * math.exp(-log_leading))


@lru_cache(maxsize=4096)
def _log_ml(alpha: float, beta: float, z: float, branch: str) -> Tuple[float, Optional[float]]:
    if branch == "auto":
        use_asymptotic = alpha < 2.0 and z > 0.0 and z ** (1.0 / alpha) >= ASYMPTOTIC_SWITCH
        branch = "asymptotic" if use_asymptotic else "series"
    if branch == "asymptotic":
        return _log_asymptotic(alpha, beta, z), None
    if branch == "series":
        return _series(alpha, beta, 1.0, z)
    raise DomainError(f"unknown branch {branch!r}; use 'auto', 'series' or 'asymptotic'")


def _check_ml(q: MLQuery) -> None:
    if q.gamma != 1.0:
        raise DomainError("use generalized_mittag_leffler for gamma != 1")


def log_mittag_leffler(q: MLQuery, branch: str = "auto") -> float:
    """
    Natural logarithm of E_{alpha,beta}(z).

    Args:
        q: Query with gamma = 1
        branch: 'auto' picks series or asymptotic form from z^(1/alpha);
            'series' and 'asymptotic' force one of them

    Returns:
        float: log E_{alpha,beta}(z)
    """
    _check_ml(q)
    return _log_ml(q.alpha, q.beta, q.z, branch)[0]


def mittag_leffler(q: MLQuery) -> float:
    """
    E_{alpha,beta}(z) = sum_r z^r / Gamma(alpha r + beta).

    Raises:
        RangeError: if the value overflows a double; use log_mittag_leffler
    """
    _check_ml(q)
    log_value, value = _log_ml(q.alpha, q.beta, q.z, "auto")
    if value is not None:
        return value
    if log_value > _LOG_DBL_MAX:
        raise RangeError(
            f"E_{{{q.alpha},{q.beta}}}({q.z}) overflows (log value {log_value:.6g}); use log_mittag_leffler"
        )
    return math.exp(log_value)


def _log_generalized(alpha: float, beta: float, gamma: float, z: float) -> Tuple[float, Optional[float]]:
    w = z ** (1.0 / alpha) if z > 0.0 else 0.0
    if gamma == 2.0 and beta > 1.0 and w >= ASYMPTOTIC_SWITCH:
        # alpha E^2_{alpha,beta} = E_{alpha,beta-1} - (beta - alpha - 1) E_{alpha,beta}
        log_lower = _log_ml(alpha, beta - 1.0, z, "auto")[0]
        log_upper = _log_ml(alpha, beta, z, "auto")[0]
        c = beta - alpha - 1.0
        if c == 0.0:
            return log_lower - math.log(alpha), None
        if c < 0.0:
            return float(np.logaddexp(log_lower, math.log(-c) + log_upper)) - math.log(alpha), None
        share = c * math.exp(log_upper - log_lower)
        if share < 0.5:
            return log_lower + math.log1p(-share) - math.log(alpha), None
    return _series(alpha, beta, gamma, z)


def log_generalized_mittag_leffler(q: MLQuery) -> float:
    """
    Natural logarithm of E^gamma_{alpha,beta}(z).

    The series is summed in log space. For gamma = 2 and large arguments the
    value is assembled from two-parameter functions instead.
    """
    if q.gamma == 1.0:
        return log_mittag_leffler(q)
    return _log_generalized(q.alpha, q.beta, q.gamma, q.z)[0]


def generalized_mittag_leffler(q: MLQuery) -> float:
    """
    E^gamma_{alpha,beta}(z) = sum_j (gamma)^(j) z^j / (j! Gamma(alpha j + beta)).

    For gamma = 1 this returns exactly mittag_leffler(q).
    """
    if q.gamma == 1.0:
        return mittag_leffler(q)
    log_value, value = _log_generalized(q.alpha, q.beta, q.gamma, q.z)
    if value is not None:
        return value
    if log_value > _LOG_DBL_MAX:
        raise RangeError(f"E^{q.gamma}_{{{q.alpha},{q.beta}}}({q.z}) overflows; use the log variant")
    return math.exp(log_value)


def ml_ratio_nu_nu_over_nu_1(nu: float, z: float) -> float:
    """
    E_{nu,nu}(z) / E_{nu,1}(z), evaluated as a difference of logarithms.

    Tends to z^((1-nu)/nu) as z grows.
    """
    if not (math.isfinite(nu) and 0.0 < nu <= 1.0):
        raise DomainError(f"nu must lie in (0, 1], got {nu}")
    numerator = log_mittag_leffler(MLQuery(alpha=nu, beta=nu, z=z))
    denominator = log_mittag_leffler(MLQuery(alpha=nu, beta=1.0, z=z))
    return math.exp(numerator - denominator)
