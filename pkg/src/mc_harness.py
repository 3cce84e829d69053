"""
Monte Carlo checks of the deviation results.

Each experiment estimates p_t = P(event) on a grid of times, turns it into an
empirical decay rate log(p_t)/speed_t with a Wilson 95% interval, and compares the
interval with the analytic target -inf_event(rate). Replications are split into
chunks; chunk r at grid index i draws from stream(seed, i, r), so reports do not
depend on how chunks are scheduled across workers.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.stats import binomtest

from .config import Settings
from .errors import ConfigurationError, PreconditionError
from .estimation import estimate_nu_batch, threshold_exponent
from .large_deviations import ld_halfspace_infimum, md_halfspace_infimum
from .models import (
    EstimatorEvent,
    ExperimentConfig,
    ExperimentReport,
    ExperimentRow,
    HalfSpaceEvent,
    NormalityReport,
    check_threshold_side,
    parse_a_t_rule,
)
from .process_model import covariance_matrix_C, mean_vector
from .sampling import draw_vectors, stream, sum_sampler

logger = logging.getLogger(__name__)

RARE_EVENT_BUDGET = 12.0
CONFIDENCE = 0.95

# Maps (rng, n) to a boolean hit array of length n.
Trial = Callable[[np.random.Generator, int], np.ndarray]


def _chunks(cfg: ExperimentConfig) -> List[Tuple[int, int]]:
    sizes = []
    remaining, index = cfg.n_per_t, 0
    while remaining > 0:
        size = min(cfg.replication_size, remaining)
        sizes.append((index, size))
        remaining -= size
        index += 1
    return sizes


def count_hits(cfg: ExperimentConfig, t_index: int, trial: Trial) -> int:
    """Number of hits among cfg.n_per_t replications at grid index t_index."""

    def run_chunk(chunk: Tuple[int, int]) -> int:
        replication, size = chunk
        return int(np.count_nonzero(trial(stream(cfg.seed, t_index, replication), size)))

    workers = Settings.get_instance().workers
    chunks = _chunks(cfg)
    if workers == 1 or len(chunks) == 1:
        return sum(run_chunk(c) for c in chunks)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return sum(pool.map(run_chunk, chunks))


def wilson_interval(hits: int, n: int) -> Tuple[float, float]:
    """Wilson score interval at 95% confidence."""
    ci = binomtest(hits, n).proportion_ci(confidence_level=CONFIDENCE, method="wilson")
    # endpoints are exact when every or no replication hits
    low = 0.0 if hits == 0 else min(max(float(ci.low), 0.0), 1.0)
    high = 1.0 if hits == n else min(max(float(ci.high), 0.0), 1.0)
    return low, high


def _log_or_none(value: float, speed: float) -> Optional[float]:
    return math.log(value) / speed if value > 0.0 else None


def build_row(t: float, n: int, hits: int, speed: float, target: float) -> ExperimentRow:
    """One report row; rows with zero hits are censored and carry no log rates."""
    low, high = wilson_interval(hits, n)
    probability = hits / n
    if hits == 0:
        return ExperimentRow(
            t=t, n=n, hits=0, probability=0.0, ci_low=low, ci_high=high, speed=speed, censored=True
        )
    log_rate = math.log(probability) / speed
    log_low = _log_or_none(low, speed)
    log_high = math.log(high) / speed
    gap = max(0.0, log_low - target, target - log_high) if math.isfinite(target) else math.inf
    return ExperimentRow(
        t=t,
        n=n,
        hits=hits,
        probability=probability,
        ci_low=low,
        ci_high=high,
        speed=speed,
        log_rate=log_rate,
        log_rate_low=log_low,
        log_rate_high=log_high,
        gap=gap,
    )


def _report(kind: str, cfg: ExperimentConfig, rows: List[ExperimentRow], rate: float) -> ExperimentReport:
    target = -rate
    observed = [row for row in rows if not row.censored]
    if not observed:
        logger.warning("All %d rows censored: event too rare for n=%d", len(rows), cfg.n_per_t)
        return ExperimentReport(
            kind=kind, config=cfg, rows=tuple(rows), analytic_rate=rate, target=target, trend="censored"
        )
    first, final = observed[0], observed[-1]
    converging = final.gap == 0.0 or (len(observed) > 1 and final.gap < first.gap)
    return ExperimentReport(
        kind=kind,
        config=cfg,
        rows=tuple(rows),
        analytic_rate=rate,
        target=target,
        trend="converging" if converging else "not_converging",
        first_gap=first.gap,
        final_gap=final.gap,
        final_point_gap=abs(final.log_rate - target),
    )


def _run(kind: str, cfg: ExperimentConfig, rate: float, speed_of: Callable[[float], float], trial_at) -> ExperimentReport:
    if rate * speed_of(cfg.t_grid[-1]) > RARE_EVENT_BUDGET:
        logger.warning(
            "Rate %.4g at speed %.4g exceeds the rare-event budget %s; expect censored rows",
            rate, speed_of(cfg.t_grid[-1]), RARE_EVENT_BUDGET,
        )
    rows = []
    for index, t in enumerate(cfg.t_grid):
        hits = count_hits(cfg, index, trial_at(t))
        row = build_row(t, cfg.n_per_t, hits, speed_of(t), -rate)
        if row.censored:
            logger.warning("Censored row at t=%s: no hits in %d draws", t, cfg.n_per_t)
        logger.info("%s t=%s hits=%d/%d log_rate=%s gap=%s", kind, t, hits, cfg.n_per_t, row.log_rate, row.gap)
        rows.append(row)
    return _report(kind, cfg, rows, rate)


def _half_space(cfg: ExperimentConfig) -> HalfSpaceEvent:
    if cfg.event is None:
        return HalfSpaceEvent(u=(0.0,) * cfg.params.m, c=0.0)
    if not isinstance(cfg.event, HalfSpaceEvent):
        raise ConfigurationError("this experiment needs a half_space event")
    return cfg.event


def run_ld_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """
    Decay of P(<u, M(t)/t> >= c) at speed t against -inf of Lambda* over the half-space.
    Without an event the whole space is used (probability one, target zero).
    """
    p = cfg.params
    event = _half_space(cfg)
    u = np.asarray(event.u, dtype=float)
    rate = ld_halfspace_infimum(p, u, event.c).value

    def trial_at(t: float) -> Trial:
        def trial(rng, n):
            return (draw_vectors(p, t, n, rng) @ u) / t >= event.c

        return trial

    return _run("ld", cfg, rate, lambda t: t, trial_at)


def run_md_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """
    Decay of P(<u, sqrt(t a_t)(M(t) - E M(t))/t> >= c) at speed 1/a_t, with
    a_t = t^-p, against -c_+^2 / (2 <u, C u>).
    """
    kind, _ = parse_a_t_rule(cfg.a_t_rule)
    if kind != "power":
        raise ConfigurationError("moderate deviations need a_t = t^-p with 0 < p < 1 (a_t_rule 'power:p')")
    p = cfg.params
    event = _half_space(cfg)
    u = np.asarray(event.u, dtype=float)
    rate = md_halfspace_infimum(p, u, event.c).value

    def trial_at(t: float) -> Trial:
        mean = mean_vector(p, t)
        scale = math.sqrt(t * cfg.a_t(t)) / t

        def trial(rng, n):
            statistic = (draw_vectors(p, t, n, rng) - mean) * scale
            return statistic @ u >= event.c

        return trial

    return _run("md", cfg, rate, lambda t: 1.0 / cfg.a_t(t), trial_at)


def run_estimator_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """
    Decay of the first-kind error P(V_t in R_k) under nu0 = cfg.params.nu against
    -J_{nu0}(k).
    """
    p = cfg.params
    if p.s_lambda < 1.0:
        raise PreconditionError(f"estimator requires s(lambda) >= 1, got s(lambda)={p.s_lambda}")
    event = cfg.event
    if not isinstance(event, EstimatorEvent):
        raise ConfigurationError("the estimator experiment needs an estimator event")
    check_threshold_side(p.nu, event.k, event.direction)
    rate = threshold_exponent(p, event.k, event.direction)

    def trial_at(t: float) -> Trial:
        sampler = sum_sampler(p, t)

        def trial(rng, n):
            estimates = estimate_nu_batch(p, t, sampler.draw(rng, n))
            return estimates >= event.k if event.direction == "upper" else estimates <= event.k

        return trial

    return _run("estimator", cfg, rate, lambda t: t, trial_at)


def run_normality_check(cfg: ExperimentConfig) -> NormalityReport:
    """Empirical covariance of (M(t) - E M(t))/sqrt(t) at the largest t of the grid, against C."""
    p = cfg.params
    t = cfg.t_grid[-1]
    index = len(cfg.t_grid) - 1
    draws = np.vstack([draw_vectors(p, t, size, stream(cfg.seed, index, r)) for r, size in _chunks(cfg)])
    scaled = (draws - mean_vector(p, t)) / math.sqrt(t)
    empirical = np.atleast_2d(np.cov(scaled, rowvar=False))
    c = covariance_matrix_C(p).array
    error = float(np.max(np.abs(empirical - c) / np.abs(c)))
    logger.info("Normality check at t=%s, n=%d: max relative error %.4f", t, cfg.n_per_t, error)
    return NormalityReport(
        t=t,
        n=cfg.n_per_t,
        empirical_covariance=tuple(tuple(float(v) for v in row) for row in empirical),
        covariance_c=tuple(tuple(float(v) for v in row) for row in c),
        max_relative_error=error,
    )
