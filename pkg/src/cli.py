"""
Command-line front door.

    PYTHONPATH=. python -m src.cli rate-ld --nu 0.7 --lambda 0.6,0.9 --x 1.0,0.5

Exit codes: 0 on success, 2 for invalid input (bad flags, parameters outside
their domain, unmet preconditions, inconsistent configs), 1 for numerical failures.
"""

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ValidationError

from .config import Settings, configure_logging
from .errors import NUMERICAL_ERRORS, USER_ERRORS, DomainError
from .estimation import estimate_nu_from_lambda, rate_J
from .large_deviations import gradient_at_zero, rate_ld, rate_md
from .mc_harness import run_estimator_experiment, run_ld_experiment, run_md_experiment, run_normality_check
from .models import ExperimentConfig, MLQuery, ModelParams
from .process_model import (
    conditional_multinomial_log_pmf,
    covariance_matrix_C,
    joint_log_pmf,
    lattice_points,
    log_mgf,
    marginal_sum_log_pmf,
    mean_vector,
    mean_vector_generalized,
    mgf,
    truncation_bound,
)
from .sampling import sample_batch
from .serialization import REPORT_COLUMNS, dumps, parse_vector, report_csv, report_rows, to_json, write_csv
from .special_functions import generalized_mittag_leffler, log_generalized_mittag_leffler

logger = logging.getLogger(__name__)

EXPERIMENTS: Dict[str, Callable] = {
    "ld": run_ld_experiment,
    "md": run_md_experiment,
    "estimator": run_estimator_experiment,
    "normality": run_normality_check,
}


@dataclass
class CommandResult:
    """A JSON document plus, optionally, a table for --format csv."""

    document: Any
    header: Optional[List[str]] = None
    rows: Optional[List[List[Any]]] = None

    def render(self, fmt: str) -> str:
        if fmt == "csv":
            if self.header is None:
                flat = self.document.model_dump() if isinstance(self.document, BaseModel) else self.document
                header = list(flat)
                return write_csv(header, [[_cell(flat[key]) for key in header]])
            return write_csv(self.header, self.rows)
        if isinstance(self.document, BaseModel):
            return to_json(self.document) + "\n"
        return dumps(self.document) + "\n"


def _cell(value: Any) -> Any:
    if hasattr(value, "tolist"):
        value = value.tolist()
    if isinstance(value, (list, tuple)):
        return ";".join(str(v) for v in value)
    return value


def _seed(args: argparse.Namespace) -> int:
    """--seed when given, FRACPOISSON_SEED otherwise."""
    return args.seed if args.seed is not None else Settings.get_instance().seed


def _params(args: argparse.Namespace) -> ModelParams:
    if args.nu is None:
        raise DomainError("--nu is required for this subcommand")
    return ModelParams(nu=args.nu, lambdas=parse_vector(args.lambdas, "--lambda"))


def cmd_ml(args: argparse.Namespace) -> CommandResult:
    query = MLQuery(alpha=args.alpha, beta=args.beta, gamma=args.gamma, z=args.z)
    document: Dict[str, Any] = {"alpha": query.alpha, "beta": query.beta, "gamma": query.gamma, "z": query.z}
    document["log_value"] = log_generalized_mittag_leffler(query)
    if not args.log:
        document["value"] = generalized_mittag_leffler(query)
    return CommandResult(document)


def cmd_pmf(args: argparse.Namespace) -> CommandResult:
    p = _params(args)
    if args.k is not None:
        k = np.array([int(v) for v in parse_vector(args.k, "--k")])
        if np.any(k != np.array(parse_vector(args.k, "--k"))):
            raise DomainError("--k must contain integers")
        points = k[None, :]
    else:
        max_sum = args.max_sum if args.max_sum is not None else truncation_bound(p, args.t)
        points = lattice_points(p.m, max_sum)
    joint = np.atleast_1d(joint_log_pmf(p, args.t, points))
    conditional = np.atleast_1d(conditional_multinomial_log_pmf(p, points))
    marginal = np.atleast_1d(marginal_sum_log_pmf(p, args.t, points.sum(axis=1)))
    records = [
        {
            "k": [int(v) for v in point],
            "sum": int(point.sum()),
            "log_pmf": float(lj),
            "pmf": math.exp(lj),
            "conditional_log_pmf": float(lc),
            "marginal_log_pmf": float(lm),
        }
        for point, lj, lc, lm in zip(points, joint, conditional, marginal)
    ]
    header = [f"k{i + 1}" for i in range(p.m)] + ["sum", "log_pmf", "pmf", "conditional_log_pmf", "marginal_log_pmf"]
    rows = [
        r["k"] + [r["sum"], r["log_pmf"], r["pmf"], r["conditional_log_pmf"], r["marginal_log_pmf"]] for r in records
    ]
    document = records[0] if args.k is not None else {"nu": p.nu, "lambda": list(p.lambdas), "t": args.t, "points": records}
    return CommandResult(document, header, rows)


def cmd_mgf(args: argparse.Namespace) -> CommandResult:
    p = _params(args)
    theta = parse_vector(args.theta, "--theta")
    document: Dict[str, Any] = {"theta": list(theta), "t": args.t, "log_mgf": log_mgf(p, args.t, theta)}
    if not args.log:
        document["mgf"] = mgf(p, args.t, theta)
    return CommandResult(document)


def cmd_moments(args: argparse.Namespace) -> CommandResult:
    p = _params(args)
    c = covariance_matrix_C(p)
    return CommandResult(
        {
            "t": args.t,
            "mean": mean_vector(p, args.t),
            "mean_generalized": mean_vector_generalized(p, args.t),
            "gradient_at_zero": gradient_at_zero(p),
            "covariance_C": c.entries,
            "positive_definite": c.is_positive_definite(),
        }
    )


def cmd_rate_ld(args: argparse.Namespace) -> CommandResult:
    return CommandResult(rate_ld(_params(args), parse_vector(args.x, "--x")))


def cmd_rate_md(args: argparse.Namespace) -> CommandResult:
    x = parse_vector(args.x, "--x")
    return CommandResult({"point": list(x), "value": rate_md(_params(args), x)})


def cmd_estimate(args: argparse.Namespace) -> CommandResult:
    lambdas = parse_vector(args.lambdas, "--lambda")
    return CommandResult(estimate_nu_from_lambda(lambdas, args.t, args.sum))


def cmd_rate_j(args: argparse.Namespace) -> CommandResult:
    p = _params(args)
    return CommandResult({"nu": p.nu, "nu_hat": args.nu_hat, "value": rate_J(p, p.nu, args.nu_hat)})


def cmd_sample(args: argparse.Namespace) -> CommandResult:
    p = _params(args)
    batch = sample_batch(p, args.t, args.n, _seed(args))
    header = [f"k{i + 1}" for i in range(p.m)]
    rows = batch.draws.tolist()
    return CommandResult({"t": batch.t, "seed": batch.seed, "n": batch.n, "draws": rows}, header, rows)


def cmd_experiment(args: argparse.Namespace) -> CommandResult:
    try:
        document = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise DomainError(f"cannot read experiment config {args.config}: {e}")
    kind = document.get("kind") if isinstance(document, dict) else None
    if kind not in EXPERIMENTS:
        raise DomainError(f"experiment kind must be one of {sorted(EXPERIMENTS)}, got {kind!r}")
    fields = document.get("config", {})
    if not isinstance(fields, dict):
        raise DomainError("experiment config must be a JSON object")
    fields = dict(fields)
    if args.seed is not None:
        fields["seed"] = args.seed
    elif "seed" not in fields:
        fields["seed"] = Settings.get_instance().seed
    config = ExperimentConfig.model_validate(fields)
    logger.info("Running %s experiment with seed %s", kind, config.seed)
    report = EXPERIMENTS[kind](config)

    if args.output_dir:
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(to_json(report) + "\n")
        if kind != "normality":
            (out / "report.csv").write_text(report_csv(report))
        logger.info("Report written to %s", out)
    if kind == "normality":
        return CommandResult(report)
    return CommandResult(report, list(REPORT_COLUMNS), report_rows(report))


def _add_params(parser: argparse.ArgumentParser, needs_t: bool = True) -> None:
    parser.add_argument("--nu", type=float, help="fractional order nu in (0, 1] (dimensionless)")
    parser.add_argument("--lambda", dest="lambdas", required=True, help="intensities lambda_i > 0, comma-separated (1/time^nu)")
    if needs_t:
        parser.add_argument("--t", type=float, required=True, help="time t > 0 (time units of lambda)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracpoisson",
        description="Multivariate alternative fractional Poisson process: pmf, moments, rates, estimator, experiments.",
    )
    parser.add_argument("--format", choices=["json", "csv"], default="json", help="output format (default json)")
    parser.add_argument("--output", help="write output to this file instead of stdout")
    sub = parser.add_subparsers(dest="command", required=True)

    ml = sub.add_parser(
        "ml",
        help="Mittag-Leffler function",
        description="Outputs log_value = log E^gamma_{alpha,beta}(z) and value = E^gamma_{alpha,beta}(z), where "
        "E^gamma_{alpha,beta}(z) = sum_j (gamma)_j z^j / (j! Gamma(alpha j + beta)); gamma=1 is the two-parameter "
        "function E_{alpha,beta}(z) = sum_r z^r / Gamma(alpha r + beta). All quantities are dimensionless.",
    )
    ml.add_argument("--alpha", type=float, required=True, help="alpha > 0 (dimensionless)")
    ml.add_argument("--beta", type=float, required=True, help="beta > 0 (dimensionless)")
    ml.add_argument("--gamma", type=float, default=1.0, help="gamma >= 1 (dimensionless, default 1)")
    ml.add_argument("--z", type=float, required=True, help="argument z >= 0 (dimensionless)")
    ml.add_argument("--log", action="store_true", help="report only log_value (never overflows)")
    ml.set_defaults(handler=cmd_ml)

    pmf = sub.add_parser(
        "pmf",
        help="joint pmf of M(t)",
        description="Outputs log_pmf = log P(M(t)=k) = conditional_log_pmf + marginal_log_pmf, with "
        "conditional_log_pmf = log multinomial(k; lambda/s(lambda)) and "
        "marginal_log_pmf = log P(s(M(t))=s(k)), P(s=h) = (s(lambda) t^nu)^h / Gamma(nu h + 1) / E_{nu,1}(s(lambda) t^nu). "
        "Without --k, every lattice point with s(k) <= --max-sum (default: certified truncation) is listed.",
    )
    _add_params(pmf)
    pmf.add_argument("--k", help="counts k_i >= 0, comma-separated (events)")
    pmf.add_argument("--max-sum", type=int, help="largest s(k) to enumerate (events)")
    pmf.set_defaults(handler=cmd_pmf)

    mgf_cmd = sub.add_parser(
        "mgf",
        help="moment generating function",
        description="Outputs mgf = E[exp(<theta, M(t)>)] = E_{nu,1}((sum_i lambda_i e^theta_i) t^nu) / E_{nu,1}(s(lambda) t^nu) "
        "and log_mgf, its logarithm.",
    )
    _add_params(mgf_cmd)
    mgf_cmd.add_argument("--theta", required=True, help="theta, comma-separated (dimensionless)")
    mgf_cmd.add_argument("--log", action="store_true", help="report only log_mgf (never overflows)")
    mgf_cmd.set_defaults(handler=cmd_mgf)

    moments = sub.add_parser(
        "moments",
        help="mean vector and matrix C",
        description="Outputs mean = E[M(t)] = E_{nu,nu}(z)/E_{nu,1}(z) (t^nu/nu) lambda with z = s(lambda) t^nu (events); "
        "mean_generalized = E^2_{nu,nu+1}(z)/E_{nu,1}(z) t^nu lambda, the same mean in its second form; "
        "gradient_at_zero = grad Lambda(0) = (1/nu) s(lambda)^(1/nu-1) lambda (events per unit time); "
        "covariance_C = Hessian of Lambda at 0, C_ij = (1/nu)(1/nu-1) s(lambda)^(1/nu-2) lambda_i lambda_j "
        "+ delta_ij (1/nu) s(lambda)^(1/nu-1) lambda_i (events per unit time).",
    )
    _add_params(moments)
    moments.set_defaults(handler=cmd_moments)

    ld = sub.add_parser(
        "rate-ld",
        help="large deviation rate Lambda*",
        description="Outputs value = Lambda*(x) = sum_i x_i log((nu^nu/lambda_i) x_i / s(x)^(1-nu)) - nu s(x) + s(lambda)^(1/nu) "
        "on x >= 0 and inf otherwise, the Legendre transform of Lambda(theta) = (sum_i lambda_i e^theta_i)^(1/nu) - s(lambda)^(1/nu); "
        "the rate of M(t)/t at speed t (1/time). maximizer = theta(x) attaining the supremum.",
    )
    _add_params(ld, needs_t=False)
    ld.add_argument("--x", required=True, help="point x, comma-separated (events per unit time)")
    ld.set_defaults(handler=cmd_rate_ld)

    md = sub.add_parser(
        "rate-md",
        help="moderate deviation rate",
        description="Outputs value = (1/2) <x, C^-1 x>, the Legendre transform of (1/2) <theta, C theta>; the rate of "
        "sqrt(t a_t)(M(t) - E M(t))/t at speed 1/a_t, with C the matrix printed by 'moments'.",
    )
    _add_params(md, needs_t=False)
    md.add_argument("--x", required=True, help="point x, comma-separated (events per unit time)")
    md.set_defaults(handler=cmd_rate_md)

    est = sub.add_parser(
        "estimate",
        help="estimate nu from s(M(t))",
        description="Outputs nu_hat = g_{s(lambda)}(sum/t), g_a the inverse of f_a(x) = (1/x) a^(1/x), so that "
        "f_{s(lambda)}(nu_hat) equals the observed rate sum/t; requires s(lambda) >= 1. sum = 0 gives nu_hat = \"inf\".",
    )
    _add_params(est)
    est.add_argument("--sum", type=int, required=True, help="observed s(M(t)), integer >= 0 (events)")
    est.add_argument("--nu-unknown", action="store_true", help="nu is not needed; accepted for clarity")
    est.set_defaults(handler=cmd_estimate)

    rj = sub.add_parser(
        "rate-j",
        help="estimator rate J_nu",
        description="Outputs value = J_nu(nu_hat) = D((1/nu_hat) s^(1/nu_hat); (1/nu) s^(1/nu)) with s = s(lambda) and "
        "D(a;b) = a log(a/b) - a + b; the rate of the estimator at speed t (1/time). inf for nu_hat <= 0.",
    )
    _add_params(rj, needs_t=False)
    rj.add_argument("--nu-hat", type=float, required=True, help="estimate value (dimensionless)")
    rj.set_defaults(handler=cmd_rate_j)

    sample = sub.add_parser(
        "sample",
        help="draw M(t)",
        description="Outputs draws of M(t): the sum by inverse CDF of P(s(M(t))=h), then a multinomial split with "
        "cells lambda_i/s(lambda). Deterministic for a fixed seed.",
    )
    _add_params(sample)
    sample.add_argument("--n", type=int, required=True, help="number of draws")
    sample.set_defaults(handler=cmd_sample)

    experiment = sub.add_parser(
        "experiment",
        help="Monte Carlo experiment",
        description="Runs an experiment from a JSON file {\"kind\": \"ld\"|\"md\"|\"estimator\"|\"normality\", \"config\": {...}}. "
        "Outputs, per t, log_rate = (1/speed) log P(event) with Wilson 95% bounds, against the target "
        "-inf over the event of the rate (Lambda* for ld, (1/2)<x, C^-1 x> for md, J_nu for estimator).",
    )
    experiment.add_argument("--config", required=True, help="experiment config JSON file")
    experiment.add_argument("--output-dir", help="write report.csv and report.json here")
    experiment.set_defaults(handler=cmd_experiment)

    sample.add_argument("--seed", type=int, default=None, help="64-bit seed (default FRACPOISSON_SEED)")
    experiment.add_argument(
        "--seed", type=int, default=None, help="64-bit seed; overrides the config seed (default: config, then FRACPOISSON_SEED)"
    )
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        configure_logging()
        result = args.handler(args)
        text = result.render(args.format)
    except USER_ERRORS as e:
        logger.error("Invalid input: %s", e)
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ValidationError as e:
        logger.error("Invalid input: %s", e)
        print(f"error: {e}", file=sys.stderr)
        return 2
    except NUMERICAL_ERRORS as e:
        logger.error("Numerical failure: %s", e)
        print(f"error: {e}", file=sys.stderr)
        return 1

    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
