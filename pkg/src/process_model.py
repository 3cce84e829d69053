"""
Law of the multivariate alternative fractional Poisson process at a fixed time t.

The sum s(M(t)) has pmf (s(lambda) t^nu)^h / Gamma(nu h + 1) / E_{nu,1}(s(lambda) t^nu)
and, given the sum, the components are multinomial with cell probabilities
lambda_i / s(lambda). Everything is computed in log space; counts may be passed as
a LatticePoint or as an integer array of shape (..., m).
"""

import logging
import math
from typing import Union

import numpy as np
from scipy.special import gammaln

from .config import Settings
from .errors import ConvergenceError, DomainError, RangeError
from .models import CovarianceMatrix, LatticePoint, MLQuery, ModelParams
from .special_functions import (
    log_generalized_mittag_leffler,
    log_mittag_leffler,
    ml_ratio_nu_nu_over_nu_1,
)

logger = logging.getLogger(__name__)

Counts = Union[LatticePoint, np.ndarray, list, tuple]

MAX_TRUNCATION = 5_000_000
_CHUNK = 4096
_LOG_DBL_MAX = math.log(np.finfo(float).max)


def _check_t(t: float) -> None:
    if not (math.isfinite(t) and t > 0.0):
        raise DomainError(f"t must be a positive finite time, got {t}")


def _counts(p: ModelParams, k: Counts) -> np.ndarray:
    if isinstance(k, LatticePoint):
        k = k.k
    arr = np.asarray(k)
    if arr.shape[-1] != p.m:
        raise DomainError(f"counts have {arr.shape[-1]} components, model has m={p.m}")
    if np.any(arr < 0):
        raise DomainError("counts must be non-negative")
    return arr


def _scalar(value: np.ndarray):
    return float(value) if np.ndim(value) == 0 else value


def log_intensity(p: ModelParams, t: float) -> float:
    """log(s(lambda) t^nu), the log of the Mittag-Leffler argument."""
    _check_t(t)
    return math.log(p.s_lambda) + p.nu * math.log(t)


def log_normalizer(p: ModelParams, t: float) -> float:
    """log E_{nu,1}(s(lambda) t^nu)."""
    return log_mittag_leffler(MLQuery(alpha=p.nu, beta=1.0, z=p.s_lambda * t**p.nu))


def marginal_sum_log_pmf(p: ModelParams, t: float, h):
    """
    log P(s(M(t)) = h).

    Args:
        p: Model parameters
        t: Time, t > 0
        h: Non-negative integer or integer array

    Returns:
        float or np.ndarray: log probabilities
    """
    h = np.asarray(h)
    if np.any(h < 0):
        raise DomainError("h must be non-negative")
    hf = h.astype(float)
    values = hf * log_intensity(p, t) - gammaln(p.nu * hf + 1.0) - log_normalizer(p, t)
    return _scalar(values)


def conditional_multinomial_log_pmf(p: ModelParams, k: Counts):
    """log P(M(t) = k | s(M(t)) = s(k)); depends on neither t nor nu."""
    arr = _counts(p, k).astype(float)
    total = arr.sum(axis=-1)
    log_weights = np.log(p.weights)
    values = gammaln(total + 1.0) - gammaln(arr + 1.0).sum(axis=-1) + (arr * log_weights).sum(axis=-1)
    return _scalar(values)


def joint_log_pmf(p: ModelParams, t: float, k: Counts):
    """log P(M(t) = k) as conditional multinomial plus marginal of the sum."""
    arr = _counts(p, k)
    return _scalar(
        np.asarray(conditional_multinomial_log_pmf(p, arr))
        + np.asarray(marginal_sum_log_pmf(p, t, arr.sum(axis=-1)))
    )


def joint_log_pmf_direct(p: ModelParams, t: float, k: Counts):
    """
    log P(M(t) = k) from the unfactored closed form
    s(k)!/(prod k_i!) prod lambda_i^k_i (t^nu)^s(k) / Gamma(nu s(k) + 1) / E_{nu,1}(s(lambda) t^nu).
    """
    _check_t(t)
    arr = _counts(p, k).astype(float)
    total = arr.sum(axis=-1)
    values = (
        gammaln(total + 1.0)
        - gammaln(arr + 1.0).sum(axis=-1)
        + (arr * np.log(p.lambda_array)).sum(axis=-1)
        + total * p.nu * math.log(t)
        - gammaln(p.nu * total + 1.0)
        - log_normalizer(p, t)
    )
    return _scalar(values)


def log_weight_function(p: ModelParams, h):
    """log w(h) = log h! - log Gamma(nu h + 1)."""
    hf = np.asarray(h, dtype=float)
    if np.any(hf < 0):
        raise DomainError("h must be non-negative")
    return _scalar(gammaln(hf + 1.0) - gammaln(p.nu * hf + 1.0))


def weight_function(p: ModelParams, h: int) -> float:
    """Weight w(h) = h!/Gamma(nu h + 1) turning Poisson(s(lambda) t^nu) into the sum law."""
    log_w = log_weight_function(p, h)
    if log_w > _LOG_DBL_MAX:
        raise RangeError(f"w({h}) overflows; use log_weight_function")
    return math.exp(log_w)


def log_mgf(p: ModelParams, t: float, theta) -> float:
    """log E[exp(<theta, M(t)>)]."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (p.m,):
        raise DomainError(f"theta must have {p.m} components")
    tilted = float(np.sum(p.lambda_array * np.exp(theta)))
    numerator = log_mittag_leffler(MLQuery(alpha=p.nu, beta=1.0, z=tilted * t**p.nu))
    return numerator - log_normalizer(p, t)


def mgf(p: ModelParams, t: float, theta) -> float:
    """
    E_{nu,1}((sum lambda_i e^theta_i) t^nu) / E_{nu,1}(s(lambda) t^nu).

    Raises:
        RangeError: if the value overflows a double; use log_mgf
    """
    value = log_mgf(p, t, theta)
    if value > _LOG_DBL_MAX:
        raise RangeError(f"mgf overflows at t={t} (log value {value:.6g}); use log_mgf")
    return math.exp(value)


def mean_vector(p: ModelParams, t: float) -> np.ndarray:
    """E[M(t)] = [E_{nu,nu}(z)/E_{nu,1}(z)] (t^nu/nu) lambda with z = s(lambda) t^nu."""
    _check_t(t)
    ratio = ml_ratio_nu_nu_over_nu_1(p.nu, p.s_lambda * t**p.nu)
    return ratio * (t**p.nu / p.nu) * p.lambda_array


def mean_vector_generalized(p: ModelParams, t: float) -> np.ndarray:
    """E[M(t)] in the form E^2_{nu,nu+1}(z)/E_{nu,1}(z) t^nu lambda."""
    _check_t(t)
    z = p.s_lambda * t**p.nu
    log_num = log_generalized_mittag_leffler(MLQuery(alpha=p.nu, beta=p.nu + 1.0, gamma=2.0, z=z))
    return math.exp(log_num - log_normalizer(p, t)) * t**p.nu * p.lambda_array


def covariance_matrix_C(p: ModelParams) -> CovarianceMatrix:
    """
    C with c_jk = (1/nu)(1/nu - 1) s^(1/nu - 2) lambda_j lambda_k, plus
    (1/nu) s^(1/nu - 1) lambda_j on the diagonal.
    """
    nu, s, lam = p.nu, p.s_lambda, p.lambda_array
    off = (1.0 / nu) * (1.0 / nu - 1.0) * s ** (1.0 / nu - 2.0)
    diag = (1.0 / nu) * s ** (1.0 / nu - 1.0)
    entries = off * np.outer(lam, lam) + np.diag(diag * lam)
    return CovarianceMatrix(entries=tuple(tuple(float(v) for v in row) for row in entries))


def truncation_bound(p: ModelParams, t: float, tail: float = None) -> int:
    """
    Smallest H whose marginal tail sum_{h > H} P(s = h) is certified below `tail`.

    The ratio q_{h+1}/q_h = z Gamma(nu h + 1)/Gamma(nu h + nu + 1) decreases in h, so
    once it is below one the tail after H is bounded by q_{H+1} / (1 - ratio_{H+1}).
    """
    if tail is None:
        tail = Settings.get_instance().tail
    log_tail = math.log(tail)
    log_z = log_intensity(p, t)
    log_norm = log_normalizer(p, t)
    start = 0
    while start < MAX_TRUNCATION:
        h = np.arange(start, start + _CHUNK, dtype=float) + 1.0  # candidate H + 1
        log_q = h * log_z - gammaln(p.nu * h + 1.0) - log_norm
        log_ratio = log_z + gammaln(p.nu * h + 1.0) - gammaln(p.nu * h + p.nu + 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            bound = log_q - np.log(-np.expm1(np.minimum(log_ratio, 0.0)))
        ok = np.flatnonzero((log_ratio < 0.0) & (bound < log_tail))
        if ok.size:
            H = int(h[ok[0]]) - 1
            logger.debug("Truncation bound for nu=%s, t=%s: H=%d", p.nu, t, H)
            return H
        start += _CHUNK
    raise ConvergenceError("lattice truncation bound not found", {"nu": p.nu, "t": t, "tail": tail})


def lattice_points(m: int, max_sum: int) -> np.ndarray:
    """All k in N^m with s(k) <= max_sum, as an (N, m) integer array."""
    if m < 1 or max_sum < 0:
        raise DomainError("need m >= 1 and max_sum >= 0")
    if m == 1:
        return np.arange(max_sum + 1, dtype=np.int64)[:, None]
    blocks = []
    for first in range(max_sum + 1):
        rest = lattice_points(m - 1, max_sum - first)
        blocks.append(np.column_stack([np.full(len(rest), first, dtype=np.int64), rest]))
    return np.vstack(blocks)
