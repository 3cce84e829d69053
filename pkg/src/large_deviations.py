"""
Rate functions of the large and moderate deviation regimes.

Large deviations of M(t)/t (speed t) are governed by
    Lambda(theta) = (sum_i lambda_i e^theta_i)^(1/nu) - s(lambda)^(1/nu)
and its Legendre transform Lambda*, which has a closed form on [0, inf)^m and is
+inf elsewhere. Moderate deviations (speed 1/a_t) share the quadratic pair
(1/2)<theta, C theta> and (1/2)<x, C^-1 x>.

Rates are plain floats in [0, inf]; math.inf is the value of an impossible event.
"""

import logging
import math
from typing import Callable, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import optimize
from scipy.linalg import cho_factor, cho_solve
from scipy.special import logsumexp

from .errors import ConvergenceError, DomainError
from .models import ModelParams, RateEvaluation
from .process_model import covariance_matrix_C, log_mgf, mean_vector

logger = logging.getLogger(__name__)


class LegendreSolverConfig(BaseModel):
    """Settings of the numerical supremum sup_theta {<theta, x> - F(theta)}."""

    model_config = ConfigDict(frozen=True)

    box: float = 40.0
    enlargement: float = 10.0
    max_enlargements: int = 12
    infinity_threshold: float = 1e10
    max_iterations: int = 5000
    tol: float = 1e-12


DEFAULT_SOLVER = LegendreSolverConfig()


def _vector(p: ModelParams, values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.shape != (p.m,):
        raise DomainError(f"{name} must have {p.m} components, got shape {arr.shape}")
    if np.any(np.isnan(arr)):
        raise DomainError(f"{name} must not contain NaN")
    return arr


def gradient_at_zero(p: ModelParams) -> np.ndarray:
    """grad Lambda(0) = (1/nu) s(lambda)^(1/nu - 1) lambda, the law of large numbers limit of M(t)/t."""
    return (1.0 / p.nu) * p.s_lambda ** (1.0 / p.nu - 1.0) * p.lambda_array


def lambda_limit(p: ModelParams, theta) -> float:
    """
    Lambda(theta) = (sum_i lambda_i e^theta_i)^(1/nu) - s(lambda)^(1/nu).

    Evaluated as s^(1/nu) expm1((1/nu) log1p(sum_i w_i expm1(theta_i))) with
    w = lambda/s(lambda), which keeps full relative accuracy near theta = 0.
    Far below the origin the log of sum_i w_i e^theta_i is taken with logsumexp,
    so Lambda tends to -s(lambda)^(1/nu) without hitting the pole of log1p.
    """
    theta = _vector(p, theta, "theta")
    inner = float(np.sum(p.weights * np.expm1(theta)))
    if inner > -0.5:
        log_ratio = math.log1p(inner)
    else:
        log_ratio = float(logsumexp(theta, b=p.weights))
    return p.s_lambda ** (1.0 / p.nu) * math.expm1(log_ratio / p.nu)


def lambda_gradient(p: ModelParams, theta) -> np.ndarray:
    """grad Lambda(theta)_i = (1/nu) S^(1/nu - 1) lambda_i e^theta_i with S = sum_j lambda_j e^theta_j."""
    theta = _vector(p, theta, "theta")
    log_a = np.log(p.lambda_array) + theta
    log_s = float(logsumexp(log_a))
    return np.exp(-math.log(p.nu) + (1.0 / p.nu - 1.0) * log_s + log_a)


def lambda_hessian(p: ModelParams, theta) -> np.ndarray:
    """Hessian of Lambda; equals C at theta = 0."""
    theta = _vector(p, theta, "theta")
    nu = p.nu
    a = p.lambda_array * np.exp(theta)
    s = float(np.sum(a))
    off = (1.0 / nu) * (1.0 / nu - 1.0) * s ** (1.0 / nu - 2.0)
    return off * np.outer(a, a) + np.diag((1.0 / nu) * s ** (1.0 / nu - 1.0) * a)


def rate_univariate(nu: float, lam: float, x: float) -> float:
    """
    Rate of the one-dimensional process with order nu and intensity lam:
    x log((nu x)^nu / lam) - nu x + lam^(1/nu) on x >= 0, +inf for x < 0.
    """
    if not 0.0 < nu <= 1.0:
        raise DomainError(f"nu must lie in (0, 1], got {nu}")
    if not lam > 0.0:
        raise DomainError(f"lam must be positive, got {lam}")
    if math.isnan(x):
        raise DomainError("x must not be NaN")
    if x < 0.0:
        return math.inf
    constant = lam ** (1.0 / nu)
    if x == 0.0:
        return constant
    if math.isinf(x):
        return math.inf
    value = x * (nu * math.log(nu * x) - math.log(lam)) - nu * x + constant
    return max(value, 0.0)


def relative_entropy(p, q) -> float:
    """H(p; q) = sum_i p_i log(p_i / q_i) with 0 log 0 = 0."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    support = p > 0.0
    if np.any(q[support] <= 0.0):
        return math.inf
    return float(np.sum(p[support] * (np.log(p[support]) - np.log(q[support]))))


def rate_ld(p: ModelParams, x) -> RateEvaluation:
    """
    Closed-form Lambda*(x) together with the maximizer theta(x).

    On [0, inf)^m the supremum is attained at
        theta_i(x) = log((nu^nu / lambda_i) x_i / s(x)^(1 - nu))
    (-inf where x_i = 0, those components contributing 0 to the value).
    Any negative component gives +inf; the origin gives s(lambda)^(1/nu).
    """
    x = _vector(p, x, "x")
    point = tuple(float(v) for v in x)
    nu = p.nu

    if np.any(x < 0.0):
        return RateEvaluation(point=point, value=math.inf)
    if np.any(np.isinf(x)):
        return RateEvaluation(point=point, value=math.inf)
    if not np.any(x > 0.0):
        return RateEvaluation(
            point=point, value=p.s_lambda ** (1.0 / nu), maximizer=tuple(-math.inf for _ in point)
        )

    if p.m == 1:
        value = rate_univariate(nu, p.lambdas[0], point[0])
        theta = nu * math.log(nu) + nu * math.log(point[0]) - math.log(p.lambdas[0])
        return RateEvaluation(point=point, value=value, maximizer=(theta,))

    s_x = math.fsum(point)
    log_s_x = math.log(s_x)
    theta = []
    contributions = []
    for x_i, lam_i in zip(point, p.lambdas):
        if x_i == 0.0:
            # 0 log 0 = 0
            theta.append(-math.inf)
            continue
        theta_i = nu * math.log(nu) + math.log(x_i) - math.log(lam_i) - (1.0 - nu) * log_s_x
        theta.append(theta_i)
        contributions.append(x_i * theta_i)
    value = math.fsum(contributions) - nu * s_x + p.s_lambda ** (1.0 / nu)
    return RateEvaluation(point=point, value=max(value, 0.0), maximizer=tuple(theta))


def rate_ld_entropy_form(p: ModelParams, x) -> float:
    """
    Lambda*(x) as s(x) H(x/s(x); lambda/s(lambda)) plus the one-dimensional rate
    of the sum at s(x).
    """
    x = _vector(p, x, "x")
    if np.any(x < 0.0):
        raise DomainError("the entropy form is defined on the non-negative orthant only")
    s_x = math.fsum(float(v) for v in x)
    if s_x == 0.0:
        return p.s_lambda ** (1.0 / p.nu)
    entropy = relative_entropy(x / s_x, p.weights)
    return s_x * entropy + rate_univariate(p.nu, p.s_lambda, s_x)


def _box_supremum(
    objective: Callable[[np.ndarray], float],
    gradient: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    theta0: np.ndarray,
    config: LegendreSolverConfig,
) -> float:
    """
    sup_theta {<theta, x> - F(theta)} over growing boxes [-B, B]^m.

    Stops when the maximizer is interior, or when enlarging the box no longer
    moves the value. Values beyond config.infinity_threshold are reported as inf.
    """

    def negated(theta):
        return objective(theta) - float(np.dot(theta, x))

    def negated_grad(theta):
        return gradient(theta) - x

    bound = config.box
    previous: Optional[float] = None
    start = np.clip(theta0, -bound, bound)
    for attempt in range(config.max_enlargements + 1):
        result = optimize.minimize(
            negated,
            start,
            jac=negated_grad,
            method="L-BFGS-B",
            bounds=[(-bound, bound)] * len(x),
            options={"maxiter": config.max_iterations, "ftol": 1e-15, "gtol": config.tol},
        )
        value = -float(result.fun)
        if value > config.infinity_threshold:
            return math.inf
        at_bound = bool(np.any(np.abs(result.x) >= bound * (1.0 - 1e-9)))
        if not at_bound and result.success:
            return value
        if previous is not None and abs(value - previous) <= 1e-10 * max(1.0, abs(value)):
            return value
        logger.debug("Supremum at box edge B=%s (value %s); enlarging", bound, value)
        previous = value
        start = result.x
        bound *= config.enlargement

    raise ConvergenceError(
        "numerical supremum did not settle",
        {"x": tuple(float(v) for v in x), "box": bound, "last_value": previous},
    )


def legendre_oracle(p: ModelParams, x, config: LegendreSolverConfig = DEFAULT_SOLVER) -> float:
    """
    Numerical sup_theta {<theta, x> - Lambda(theta)}, independent of the closed form.

    On the open positive orthant the stationarity system grad Lambda(theta) = x is
    solved directly; elsewhere (or if that solve fails) a box-constrained ascent is used.

    Raises:
        ConvergenceError: if neither method settles
    """
    x = _vector(p, x, "x")

    def objective(theta):
        return lambda_limit(p, theta)

    def gradient(theta):
        return lambda_gradient(p, theta)

    if np.all(x > 0.0):
        theta0 = np.log(x / gradient_at_zero(p))
        solution = optimize.root(
            lambda theta: lambda_gradient(p, theta) - x,
            theta0,
            jac=lambda theta: lambda_hessian(p, theta),
            method="hybr",
            options={"xtol": 1e-14},
        )
        residual = np.max(np.abs(lambda_gradient(p, solution.x) - x) / x)
        if solution.success and residual < 1e-10:
            return float(np.dot(solution.x, x)) - objective(solution.x)
        logger.warning("Stationarity solve failed at x=%s (%s); using box ascent", x, solution.message)

    return _box_supremum(objective, gradient, x, np.zeros(p.m), config)


def lambda_tilde(p: ModelParams, theta) -> float:
    """(1/2)<theta, C theta>, the moderate deviation limit."""
    theta = _vector(p, theta, "theta")
    return 0.5 * float(theta @ covariance_matrix_C(p).array @ theta)


def md_conjugate_oracle(p: ModelParams, x, config: LegendreSolverConfig = DEFAULT_SOLVER) -> float:
    """Numerical sup_theta {<theta, x> - (1/2)<theta, C theta>}."""
    x = _vector(p, x, "x")
    c = covariance_matrix_C(p).array
    return _box_supremum(
        lambda theta: 0.5 * float(theta @ c @ theta),
        lambda theta: c @ theta,
        x,
        np.zeros(p.m),
        config,
    )


def rate_md(p: ModelParams, x) -> float:
    """
    Moderate deviation rate (1/2)<x, C^-1 x>.

    Uses a Cholesky solve when C is numerically positive definite and the
    numerical supremum otherwise (inf when unbounded).
    """
    x = _vector(p, x, "x")
    if not np.any(x):
        return 0.0
    c = covariance_matrix_C(p)
    if c.is_positive_definite():
        factor = cho_factor(c.array)
        return max(0.5 * float(x @ cho_solve(factor, x)), 0.0)
    logger.info("C is not numerically positive definite for nu=%s; using numerical supremum", p.nu)
    return md_conjugate_oracle(p, x)


def ld_halfspace_infimum(p: ModelParams, u, c: float) -> RateEvaluation:
    """
    inf { Lambda*(x) : <u, x> >= c } and the point attaining it.

    The minimizer is grad Lambda(tau u) for the tau >= 0 solving
    <u, grad Lambda(tau u)> = c, found by bracketing and Brent's method.
    """
    u = _vector(p, u, "u")
    x0 = gradient_at_zero(p)
    if float(np.dot(u, x0)) >= c:
        return RateEvaluation(point=tuple(float(v) for v in x0), value=0.0, maximizer=(0.0,) * p.m)

    if np.all(u <= 0.0) and c >= 0.0:
        if c > 0.0:
            return RateEvaluation(point=(), value=math.inf)
        # Attained on the face where every component with u_i < 0 vanishes.
        face = u == 0.0
        point = np.zeros(p.m)
        if np.any(face):
            face_params = ModelParams(nu=p.nu, lambdas=tuple(p.lambda_array[face]))
            point[face] = gradient_at_zero(face_params)
        return rate_ld(p, point)

    def excess(tau: float) -> float:
        return float(np.dot(u, lambda_gradient(p, tau * u))) - c

    hi = 1.0
    while excess(hi) < 0.0:
        hi *= 2.0
        if hi > 2.0**40:
            raise ConvergenceError("half-space boundary not bracketed", {"u": tuple(u), "c": c})
    tau = optimize.brentq(excess, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    point = lambda_gradient(p, tau * u)
    result = rate_ld(p, point)
    return RateEvaluation(point=result.point, value=result.value, maximizer=tuple(float(v) for v in tau * u))


def md_halfspace_infimum(p: ModelParams, u, c: float) -> RateEvaluation:
    """inf { (1/2)<x, C^-1 x> : <u, x> >= c } = c_+^2 / (2 <u, C u>)."""
    u = _vector(p, u, "u")
    if c <= 0.0:
        return RateEvaluation(point=(0.0,) * p.m, value=0.0)
    cu = covariance_matrix_C(p).array @ u
    q = float(u @ cu)
    if q <= 0.0:
        return RateEvaluation(point=(), value=math.inf)
    point = c * cu / q
    return RateEvaluation(point=tuple(float(v) for v in point), value=c * c / (2.0 * q))


def finite_t_cgf(p: ModelParams, t: float, theta) -> float:
    """(1/t) log E[exp(<theta, M(t)>)], which tends to Lambda(theta)."""
    return log_mgf(p, t, _vector(p, theta, "theta")) / t


def finite_t_scaled_cgf(p: ModelParams, t: float, theta, a_t: float) -> float:
    """
    a_t log E[exp(<theta, M(t) - E M(t)> / sqrt(t a_t))], which tends to
    (1/2)<theta, C theta> when a_t -> 0 and t a_t -> inf.
    """
    theta = _vector(p, theta, "theta")
    if not a_t > 0.0:
        raise DomainError("a_t must be positive")
    scaled = theta / math.sqrt(t * a_t)
    return a_t * (log_mgf(p, t, scaled) - float(np.dot(scaled, mean_vector(p, t))))
