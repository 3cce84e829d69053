"""
Independent reference computations used to check the closed forms.

  - extended precision Mittag-Leffler series (mpmath)
  - brute-force sums over a certified truncation of the lattice
  - central finite-difference Hessians
  - the contraction-principle infimum behind the estimator rate
"""

import logging
import math
from typing import Callable

import mpmath as mp
import numpy as np
from scipy import optimize

from .errors import ConvergenceError, DomainError
from .estimation import f_a
from .large_deviations import rate_ld
from .models import ModelParams
from .process_model import joint_log_pmf, lattice_points, truncation_bound

logger = logging.getLogger(__name__)

ORACLE_TAIL = 1e-15
ORACLE_DPS = 50
MIN_TERMS = 200
MAX_ORACLE_TERMS = 200_000


def extended_ml(alpha: float, beta: float, z: float, gamma: float = 1.0, dps: int = ORACLE_DPS) -> mp.mpf:
    """
    E^gamma_{alpha,beta}(z) by direct summation at `dps` significant digits.

    Sums at least MIN_TERMS terms and stops once past the peak with a term below
    10^-dps of the running sum.
    """
    if z < 0:
        raise DomainError("the series oracle covers z >= 0 only")
    with mp.workdps(dps):
        a, b, g = mp.mpf(alpha), mp.mpf(beta), mp.mpf(gamma)
        zz = mp.mpf(z)
        if zz == 0:
            return mp.rgamma(b)
        log_z = mp.log(zz)
        eps = mp.mpf(10) ** (-dps)
        total = mp.mpf(0)
        previous = None
        for r in range(MAX_ORACLE_TERMS):
            log_term = r * log_z - mp.loggamma(a * r + b)
            if g != 1:
                log_term += mp.loggamma(g + r) - mp.loggamma(g) - mp.loggamma(r + 1)
            term = mp.exp(log_term)
            total += term
            decreasing = previous is not None and term < previous
            if r >= MIN_TERMS and decreasing and term < eps * total:
                return +total
            previous = term
    raise ConvergenceError("extended precision series did not converge", {"alpha": alpha, "beta": beta, "z": z})


def extended_log_ml(alpha: float, beta: float, z: float, gamma: float = 1.0) -> float:
    with mp.workdps(ORACLE_DPS):
        return float(mp.log(extended_ml(alpha, beta, z, gamma)))


def log_ml_half_closed_form(z: float) -> float:
    """log E_{1/2,1}(z) from E_{1/2,1}(z) = exp(z^2) erfc(-z)."""
    with mp.workdps(ORACLE_DPS):
        zz = mp.mpf(z)
        return float(zz**2 + mp.log(mp.erfc(-zz)))


def lattice_sum(p: ModelParams, t: float, fn: Callable[[np.ndarray], np.ndarray], max_sum: int = None) -> np.ndarray:
    """
    sum_k fn(k) P(M(t) = k) over {k : s(k) <= max_sum}.

    Args:
        p: Model parameters
        t: Time
        fn: Maps an (N, m) count array to N values or an (N, d) array
        max_sum: Truncation; defaults to the certified bound at ORACLE_TAIL

    Returns:
        np.ndarray: The weighted sum (scalar array or length-d vector)
    """
    if max_sum is None:
        max_sum = truncation_bound(p, t, tail=ORACLE_TAIL)
    points = lattice_points(p.m, max_sum)
    probabilities = np.exp(joint_log_pmf(p, t, points))
    values = np.asarray(fn(points), dtype=float)
    if values.ndim == 1:
        return np.sum(values * probabilities)
    return np.sum(values * probabilities[:, None], axis=0)


def brute_force_mgf(p: ModelParams, t: float, theta) -> float:
    """E[exp(<theta, M(t)>)] over a lattice truncated for the tilted law."""
    theta = np.asarray(theta, dtype=float)
    tilted = ModelParams(nu=p.nu, lambdas=tuple(p.lambda_array * np.exp(theta)))
    max_sum = max(truncation_bound(tilted, t, tail=ORACLE_TAIL), truncation_bound(p, t, tail=ORACLE_TAIL))
    return float(lattice_sum(p, t, lambda k: np.exp(k @ theta), max_sum=max_sum))


def brute_force_mean(p: ModelParams, t: float) -> np.ndarray:
    """sum_k k P(M(t) = k)."""
    return lattice_sum(p, t, lambda k: k.astype(float))


def brute_force_mass(p: ModelParams, t: float, max_sum: int = None) -> float:
    """Total probability of the truncated lattice."""
    return float(lattice_sum(p, t, lambda k: np.ones(len(k)), max_sum=max_sum))


def finite_difference_hessian(fn: Callable[[np.ndarray], float], x0, step: float = 1e-5) -> np.ndarray:
    """Central-difference Hessian of a scalar function."""
    x0 = np.asarray(x0, dtype=float)
    m = len(x0)
    basis = np.eye(m) * step
    hessian = np.empty((m, m))
    f0 = fn(x0)
    for i in range(m):
        hessian[i, i] = (fn(x0 + basis[i]) - 2.0 * f0 + fn(x0 - basis[i])) / step**2
        for j in range(i + 1, m):
            value = (
                fn(x0 + basis[i] + basis[j])
                - fn(x0 + basis[i] - basis[j])
                - fn(x0 - basis[i] + basis[j])
                + fn(x0 - basis[i] - basis[j])
            ) / (4.0 * step**2)
            hessian[i, j] = hessian[j, i] = value
    return hessian


def contraction_oracle(p: ModelParams, nu: float, nu_hat: float) -> float:
    """
    inf { Lambda*_nu(x) : x >= 0, s(x) = f_{s(lambda)}(nu_hat) } by minimizing over
    the simplex direction of x (softmax parametrization), starting from the
    uniform direction.
    """
    if nu_hat <= 0.0:
        return math.inf
    process = ModelParams(nu=nu, lambdas=p.lambdas)
    total = f_a(p.s_lambda, nu_hat) if math.isfinite(nu_hat) else 0.0
    if total == 0.0 or p.m == 1:
        return rate_ld(process, np.full(p.m, total / p.m)).value

    def point(phi):
        w = np.exp(phi - np.max(phi))
        return w / w.sum()

    def objective(phi):
        return rate_ld(process, total * point(phi)).value

    def gradient(phi):
        w = point(phi)
        theta = np.asarray(rate_ld(process, total * w).maximizer)
        # components with w_i = 0 carry theta_i = -inf and contribute nothing
        theta = np.where(w > 0.0, theta, 0.0)
        return total * (w * theta - w * float(w @ theta))

    result = optimize.minimize(objective, np.zeros(p.m), jac=gradient, method="BFGS", options={"gtol": 1e-12})
    if not result.success:
        logger.debug("Contraction oracle stopped early: %s", result.message)
    return float(result.fun)
