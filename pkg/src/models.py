"""
Domain types shared by the numerical modules, the CLI and the HTTP service.

All models are frozen pydantic models. Validators raise DomainError or
ConfigurationError directly; pydantic only wraps ValueError/AssertionError, so
these reach the caller unchanged.
"""

import math
from typing import Annotated, Iterator, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    PlainSerializer,
    field_validator,
    model_validator,
)

from .errors import ConfigurationError, DomainError


def _serialize_extended(value: float) -> Union[float, str]:
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


def _parse_extended(value):
    if isinstance(value, str) and value.strip().lower() in ("inf", "+inf", "-inf", "infinity", "-infinity"):
        return -math.inf if value.strip().startswith("-") else math.inf
    return value


# Floats that may be +/-inf; JSON has no infinity so they serialize as strings.
ExtendedFloat = Annotated[
    float,
    BeforeValidator(_parse_extended),
    PlainSerializer(_serialize_extended, when_used="json"),
]


class ModelParams(BaseModel):
    """Fractional order nu and intensity vector lambda of the process."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    nu: float
    lambdas: Tuple[float, ...] = Field(alias="lambda")

    @field_validator("nu")
    @classmethod
    def _check_nu(cls, value: float) -> float:
        if not (math.isfinite(value) and 0.0 < value <= 1.0):
            raise DomainError(f"nu must lie in (0, 1], got {value}")
        return value

    @field_validator("lambdas")
    @classmethod
    def _check_lambdas(cls, value: Tuple[float, ...]) -> Tuple[float, ...]:
        if len(value) == 0:
            raise DomainError("lambda must have at least one component")
        for lam in value:
            if not (math.isfinite(lam) and lam > 0.0):
                raise DomainError(f"every lambda_i must be a positive finite number, got {lam}")
        return value

    @property
    def m(self) -> int:
        return len(self.lambdas)

    @property
    def s_lambda(self) -> float:
        return math.fsum(self.lambdas)

    @property
    def lambda_array(self) -> np.ndarray:
        return np.asarray(self.lambdas, dtype=float)

    @property
    def weights(self) -> np.ndarray:
        """Multinomial cell probabilities lambda_i / s(lambda)."""
        return self.lambda_array / self.s_lambda


class LatticePoint(BaseModel):
    """Vector of m non-negative integer counts."""

    model_config = ConfigDict(frozen=True)

    k: Tuple[int, ...]

    @field_validator("k")
    @classmethod
    def _check_counts(cls, value: Tuple[int, ...]) -> Tuple[int, ...]:
        if len(value) == 0:
            raise DomainError("a lattice point needs at least one component")
        if any(c < 0 for c in value):
            raise DomainError(f"counts must be non-negative, got {value}")
        return value

    @property
    def total(self) -> int:
        """s(k), the sum of the counts."""
        return sum(self.k)

    @property
    def m(self) -> int:
        return len(self.k)


class CovarianceMatrix(BaseModel):
    """Symmetric m x m matrix C of the moderate deviation regime."""

    model_config = ConfigDict(frozen=True)

    entries: Tuple[Tuple[float, ...], ...]

    @model_validator(mode="after")
    def _check_symmetric(self) -> "CovarianceMatrix":
        arr = np.asarray(self.entries, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DomainError("covariance matrix must be square")
        if not np.array_equal(arr, arr.T):
            raise DomainError("covariance matrix must be symmetric")
        return self

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.entries, dtype=float)

    def is_positive_definite(self, rel_tol: float = 1e-10) -> bool:
        eig = np.linalg.eigvalsh(self.array)
        return bool(eig[0] > rel_tol * max(eig[-1], 0.0)) and eig[-1] > 0.0


class MLQuery(BaseModel):
    """Arguments of a (generalized) Mittag-Leffler evaluation."""

    model_config = ConfigDict(frozen=True)

    alpha: float
    beta: float
    gamma: float = 1.0
    z: float

    @model_validator(mode="after")
    def _check_domain(self) -> "MLQuery":
        if not (math.isfinite(self.alpha) and self.alpha > 0.0):
            raise DomainError(f"alpha must be positive, got {self.alpha}")
        if not (math.isfinite(self.beta) and self.beta > 0.0):
            raise DomainError(f"beta must be positive, got {self.beta}")
        if not (math.isfinite(self.gamma) and self.gamma >= 1.0):
            raise DomainError(f"gamma must be >= 1, got {self.gamma}")
        if not (math.isfinite(self.z) and self.z >= 0.0):
            raise DomainError(f"z must be a finite non-negative number, got {self.z}")
        return self


class RateEvaluation(BaseModel):
    """A point and the value of a rate function there."""

    model_config = ConfigDict(frozen=True)

    point: Tuple[float, ...]
    value: ExtendedFloat
    maximizer: Optional[Tuple[ExtendedFloat, ...]] = None

    @field_validator("value")
    @classmethod
    def _check_value(cls, value: float) -> float:
        if math.isnan(value) or value < 0.0:
            raise DomainError(f"rate values live in [0, inf], got {value}")
        return value


class EstimatorResult(BaseModel):
    """Outcome of the nu estimator for one observation."""

    model_config = ConfigDict(frozen=True)

    nu_hat: ExtendedFloat
    observed_rate: float
    solver_iterations: int


Direction = Literal["upper", "lower"]


class HypothesisTest(BaseModel):
    """Threshold test H0: nu = nu0 versus H1: nu = nu1 on the estimator."""

    model_config = ConfigDict(frozen=True)

    nu0: float
    nu1: float
    k_threshold: float
    direction: Direction

    @model_validator(mode="before")
    @classmethod
    def _default_direction(cls, data):
        if isinstance(data, dict) and data.get("direction") is None:
            nu0, nu1 = data.get("nu0"), data.get("nu1")
            if nu0 is not None and nu1 is not None:
                data = {**data, "direction": "upper" if float(nu0) < float(nu1) else "lower"}
        return data

    @model_validator(mode="after")
    def _check_critical_region(self) -> "HypothesisTest":
        for name, nu in (("nu0", self.nu0), ("nu1", self.nu1)):
            if not (0.0 < nu <= 1.0):
                raise DomainError(f"{name} must lie in (0, 1], got {nu}")
        if self.nu0 == self.nu1:
            raise ConfigurationError("nu1 must differ from nu0")
        expected = "upper" if self.nu0 < self.nu1 else "lower"
        if self.direction != expected:
            raise ConfigurationError(
                f"nu0={self.nu0}, nu1={self.nu1} calls for a {expected} critical region, got {self.direction}"
            )
        check_threshold_side(self.nu0, self.k_threshold, self.direction)
        return self


def check_threshold_side(nu0: float, k: float, direction: str) -> None:
    """Reject thresholds on the wrong side of nu0 (k = nu0 is the degenerate test)."""
    if direction == "upper" and k < nu0:
        raise ConfigurationError(f"upper critical region needs k >= nu0, got k={k} < nu0={nu0}")
    if direction == "lower" and k > nu0:
        raise ConfigurationError(f"lower critical region needs k <= nu0, got k={k} > nu0={nu0}")


class SampleBatch(BaseModel):
    """Seeded i.i.d. draws of M(t) at a fixed t, stored as an (n, m) array."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    params: ModelParams
    t: float
    seed: int
    draws: np.ndarray

    @property
    def n(self) -> int:
        return int(self.draws.shape[0])

    @property
    def sums(self) -> np.ndarray:
        return self.draws.sum(axis=1)

    def points(self) -> Iterator[LatticePoint]:
        for row in self.draws:
            yield LatticePoint(k=tuple(int(c) for c in row))


class HalfSpaceEvent(BaseModel):
    """Event {x : <u, x> >= c} for the scaled statistic."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["half_space"] = "half_space"
    u: Tuple[float, ...]
    c: float


class EstimatorEvent(BaseModel):
    """Event {V_t >= k} (upper) or {V_t <= k} (lower) for the nu estimator."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["estimator"] = "estimator"
    k: float
    direction: Direction


Event = Annotated[Union[HalfSpaceEvent, EstimatorEvent], Field(discriminator="kind")]


class ExperimentConfig(BaseModel):
    """Everything needed to reproduce a Monte Carlo experiment."""

    model_config = ConfigDict(frozen=True)

    params: ModelParams
    t_grid: Tuple[float, ...]
    n_per_t: int
    event: Optional[Event] = None
    seed: int
    a_t_rule: str = "1/t"
    replication_size: int = 10_000

    @model_validator(mode="after")
    def _check_config(self) -> "ExperimentConfig":
        if len(self.t_grid) == 0:
            raise ConfigurationError("t_grid must not be empty")
        if any(t <= 0.0 or not math.isfinite(t) for t in self.t_grid):
            raise ConfigurationError("t_grid entries must be positive")
        if any(b <= a for a, b in zip(self.t_grid, self.t_grid[1:])):
            raise ConfigurationError("t_grid must be strictly increasing")
        if self.n_per_t < 100:
            raise ConfigurationError(f"n_per_t must be at least 100, got {self.n_per_t}")
        if self.replication_size < 1:
            raise ConfigurationError("replication_size must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")
        if isinstance(self.event, HalfSpaceEvent) and len(self.event.u) != self.params.m:
            raise ConfigurationError(
                f"event direction has {len(self.event.u)} components, model has m={self.params.m}"
            )
        parse_a_t_rule(self.a_t_rule)
        return self

    def a_t(self, t: float) -> float:
        kind, p = parse_a_t_rule(self.a_t_rule)
        if kind == "1/t":
            return 1.0 / t
        if kind == "1":
            return 1.0
        return t ** (-p)


def parse_a_t_rule(rule: str) -> Tuple[str, float]:
    """Parse '1/t', '1' or 'power:p' (a_t = t^-p with 0 < p < 1)."""
    rule = rule.strip()
    if rule in ("1/t", "1"):
        return rule, 0.0
    if rule.startswith("power:"):
        try:
            p = float(rule.split(":", 1)[1])
        except ValueError:
            raise ConfigurationError(f"cannot parse a_t rule {rule!r}")
        if not 0.0 < p < 1.0:
            raise ConfigurationError(f"a_t = t^-p needs p in (0, 1), got {p}")
        return "power", p
    raise ConfigurationError(f"unknown a_t rule {rule!r}; use '1/t', '1' or 'power:p'")


class ExperimentRow(BaseModel):
    """One t of an experiment; censored rows have zero hits."""

    model_config = ConfigDict(frozen=True)

    t: float
    n: int
    hits: int
    probability: float
    ci_low: float
    ci_high: float
    speed: float
    log_rate: Optional[float] = None
    log_rate_low: Optional[float] = None
    log_rate_high: Optional[float] = None
    gap: Optional[float] = None
    censored: bool = False


class ExperimentReport(BaseModel):
    """Structured result of a Monte Carlo experiment."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["ld", "md", "estimator"]
    config: ExperimentConfig
    rows: Tuple[ExperimentRow, ...]
    analytic_rate: ExtendedFloat
    target: ExtendedFloat
    trend: Literal["converging", "not_converging", "censored"]
    first_gap: Optional[float] = None
    final_gap: Optional[float] = None
    final_point_gap: Optional[float] = None


class NormalityReport(BaseModel):
    """Empirical covariance of (M(t) - E M(t)) / sqrt(t) against C."""

    model_config = ConfigDict(frozen=True)

    t: float
    n: int
    empirical_covariance: Tuple[Tuple[float, ...], ...]
    covariance_c: Tuple[Tuple[float, ...], ...]
    max_relative_error: float
