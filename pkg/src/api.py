from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from typing import List, Tuple
import logging

from src.config import configure_logging
from src.errors import NUMERICAL_ERRORS, USER_ERRORS
from src.estimation import estimate_nu_from_lambda, rate_J
from src.large_deviations import gradient_at_zero, rate_ld, rate_md
from src.models import EstimatorResult, ExtendedFloat, ModelParams, RateEvaluation
from src.process_model import (
    conditional_multinomial_log_pmf,
    covariance_matrix_C,
    joint_log_pmf,
    marginal_sum_log_pmf,
    mean_vector,
    mean_vector_generalized,
)

# Configure logging
configure_logging(default_level="INFO")
logger = logging.getLogger(__name__)

app = FastAPI(title="fracpoisson")

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_methods=["GET", "POST"],
    allow_headers=["*"],
)


class ParamsRequest(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    nu: float
    lambdas: List[float] = Field(alias="lambda")

    def params(self) -> ModelParams:
        return ModelParams(nu=self.nu, lambdas=tuple(self.lambdas))


class PointRequest(ParamsRequest):
    x: List[float]


class PmfRequest(ParamsRequest):
    t: float
    k: List[int]


class MomentsRequest(ParamsRequest):
    t: float


class EstimateRequest(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    lambdas: List[float] = Field(alias="lambda")
    t: float
    observed_sum: int = Field(alias="sum")


class RateJRequest(ParamsRequest):
    nu_hat: ExtendedFloat


class PmfResponse(BaseModel):
    k: List[int]
    log_pmf: float
    conditional_log_pmf: float
    marginal_log_pmf: float


class MomentsResponse(BaseModel):
    t: float
    mean: List[float]
    mean_generalized: List[float]
    gradient_at_zero: List[float]
    covariance_C: List[List[float]]
    positive_definite: bool


class RateResponse(BaseModel):
    point: Tuple[ExtendedFloat, ...]
    value: ExtendedFloat


def _run(operation: str, fn):
    """Map library errors to HTTP status codes: bad input 400, numerical failures 500."""
    try:
        result = fn()
        logger.info(f"Completed {operation}")
        return result
    except (ValidationError, *USER_ERRORS) as e:
        logger.error(f"Invalid input for {operation}: {str(e)}")
        raise HTTPException(status_code=400, detail=str(e))
    except NUMERICAL_ERRORS as e:
        logger.error(f"Numerical failure in {operation}: {str(e)}")
        raise HTTPException(status_code=500, detail=str(e))


@app.get("/health")
async def health():
    return {"status": "ok"}


@app.post("/rate-ld", response_model=RateEvaluation)
async def post_rate_ld(request: PointRequest):
    """
    Large deviation rate Lambda*(x) with its maximizer.

    Returns:
        RateEvaluation: point, value ("inf" outside the orthant) and maximizer
    """
    return _run("rate-ld", lambda: rate_ld(request.params(), request.x))


@app.post("/rate-md", response_model=RateResponse)
async def post_rate_md(request: PointRequest):
    """Moderate deviation rate (1/2)<x, C^-1 x>."""
    return _run("rate-md", lambda: RateResponse(point=tuple(request.x), value=rate_md(request.params(), request.x)))


@app.post("/pmf", response_model=PmfResponse)
async def post_pmf(request: PmfRequest):
    def compute():
        p = request.params()
        return PmfResponse(
            k=request.k,
            log_pmf=joint_log_pmf(p, request.t, request.k),
            conditional_log_pmf=conditional_multinomial_log_pmf(p, request.k),
            marginal_log_pmf=marginal_sum_log_pmf(p, request.t, sum(request.k)),
        )

    return _run("pmf", compute)


@app.post("/moments", response_model=MomentsResponse)
async def post_moments(request: MomentsRequest):
    def compute():
        p = request.params()
        c = covariance_matrix_C(p)
        return MomentsResponse(
            t=request.t,
            mean=mean_vector(p, request.t).tolist(),
            mean_generalized=mean_vector_generalized(p, request.t).tolist(),
            gradient_at_zero=gradient_at_zero(p).tolist(),
            covariance_C=[list(row) for row in c.entries],
            positive_definite=c.is_positive_definite(),
        )

    return _run("moments", compute)


@app.post("/estimate", response_model=EstimatorResult)
async def post_estimate(request: EstimateRequest):
    """Estimate nu from s(M(t)); requires s(lambda) >= 1. A zero sum gives "inf"."""
    return _run("estimate", lambda: estimate_nu_from_lambda(request.lambdas, request.t, request.observed_sum))


@app.post("/rate-j", response_model=RateResponse)
async def post_rate_j(request: RateJRequest):
    """Estimator rate J_nu(nu_hat)."""

    def compute():
        p = request.params()
        return RateResponse(point=(request.nu_hat,), value=rate_J(p, p.nu, request.nu_hat))

    return _run("rate-j", compute)
