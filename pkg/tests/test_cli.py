import json

import pytest

from src.cli import main
from src.config import Settings
from src.large_deviations import rate_ld
from src.models import ModelParams
from src.serialization import REPORT_COLUMNS

PARAMS = ["--nu", "0.7", "--lambda", "0.6,0.9"]

EXPERIMENT = {
    "kind": "ld",
    "config": {
        "params": {"nu": 0.7, "lambda": [0.6, 0.9]},
        "t_grid": [5.0, 10.0],
        "n_per_t": 500,
        "seed": 3,
        "event": {"kind": "half_space", "u": [1.0, 1.0], "c": 2.9},
    },
}


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_rate_ld_json(capsys):
    code, out, _ = run(capsys, "rate-ld", *PARAMS, "--x", "1.0,0.5")
    assert code == 0
    document = json.loads(out)
    expected = rate_ld(ModelParams(nu=0.7, lambdas=(0.6, 0.9)), (1.0, 0.5)).value
    assert document["value"] == pytest.approx(expected, rel=1e-15)
    assert document["point"] == [1.0, 0.5]


def test_rate_ld_outside_orthant_is_inf(capsys):
    code, out, _ = run(capsys, "rate-ld", *PARAMS, "--x=-1,0.5")
    assert code == 0
    assert json.loads(out)["value"] == "inf"


def test_rate_ld_csv(capsys):
    code, out, _ = run(capsys, "--format", "csv", "rate-ld", *PARAMS, "--x", "1.0,0.5")
    assert code == 0
    assert out.splitlines()[0] == "point,value,maximizer"


def test_estimate_zero_sum(capsys):
    code, out, _ = run(capsys, "estimate", "--lambda", "0.6,0.9", "--t", "5", "--sum", "0", "--nu-unknown")
    assert code == 0
    assert json.loads(out)["nu_hat"] == "inf"


def test_estimate_precondition(capsys):
    code, out, err = run(capsys, "estimate", "--lambda", "0.3,0.4", "--t", "5", "--sum", "3")
    assert code == 2
    assert out == ""
    assert "estimator requires s(lambda) >= 1" in err


@pytest.mark.parametrize(
    "argv",
    [
        ["rate-ld", "--nu", "1.5", "--lambda", "0.6,0.9", "--x", "1,1"],
        ["rate-ld", *PARAMS, "--x", "abc"],
        ["rate-ld", *PARAMS, "--x", "1,2,3"],
        ["pmf", *PARAMS, "--t", "1", "--k", "1,-2"],
        ["frobnicate"],
    ],
)
def test_invalid_input_exit_code(capsys, argv):
    code, _, _ = run(capsys, *argv)
    assert code == 2


def test_help_exits_cleanly(capsys):
    code, out, _ = run(capsys, "--help")
    assert code == 0
    assert "rate-ld" in out


def test_ml_log_only(capsys):
    code, out, _ = run(capsys, "ml", "--alpha", "1", "--beta", "1", "--z", "800", "--log")
    assert code == 0
    document = json.loads(out)
    assert document["log_value"] == pytest.approx(800.0)
    assert "value" not in document


def test_ml_overflow_is_numerical_failure(capsys):
    code, _, err = run(capsys, "ml", "--alpha", "1", "--beta", "1", "--z", "800")
    assert code == 1
    assert "log_mittag_leffler" in err


def test_pmf_single_point(capsys):
    code, out, _ = run(capsys, "pmf", "--nu", "1", "--lambda", "0.6,0.9", "--t", "2", "--k", "0,0")
    assert code == 0
    assert json.loads(out)["log_pmf"] == pytest.approx(-3.0, rel=1e-14)


def test_pmf_table(capsys):
    code, out, _ = run(capsys, "--format", "csv", "pmf", *PARAMS, "--t", "1", "--max-sum", "3")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "k1,k2,sum,log_pmf,pmf,conditional_log_pmf,marginal_log_pmf"
    assert len(lines) == 1 + 10


def test_sample_csv_is_deterministic(capsys):
    argv = ["--format", "csv", "sample", *PARAMS, "--t", "2", "--n", "5", "--seed", "42"]
    code, first, _ = run(capsys, *argv)
    assert code == 0
    lines = first.splitlines()
    assert lines[0] == "k1,k2"
    assert len(lines) == 6
    _, second, _ = run(capsys, *argv)
    assert first == second


def test_experiment_outputs_are_reproducible(capsys, tmp_path):
    config = tmp_path / "ld.json"
    config.write_text(json.dumps(EXPERIMENT))
    outputs = []
    for name in ("a", "b"):
        code, out, _ = run(capsys, "experiment", "--config", str(config), "--output-dir", str(tmp_path / name))
        assert code == 0
        outputs.append(out)
    assert outputs[0] == outputs[1]
    for filename in ("report.csv", "report.json"):
        assert (tmp_path / "a" / filename).read_bytes() == (tmp_path / "b" / filename).read_bytes()
    csv_lines = (tmp_path / "a" / "report.csv").read_text().splitlines()
    assert csv_lines[0] == ",".join(REPORT_COLUMNS)
    assert len(csv_lines) == 3
    assert json.loads(outputs[0])["kind"] == "ld"


def test_experiment_unknown_kind(capsys, tmp_path):
    config = tmp_path / "bad.json"
    config.write_text(json.dumps({"kind": "xx", "config": EXPERIMENT["config"]}))
    code, _, err = run(capsys, "experiment", "--config", str(config))
    assert code == 2
    assert "experiment kind" in err


def test_output_file(capsys, tmp_path):
    target = tmp_path / "rate.json"
    code, out, _ = run(capsys, "--output", str(target), "rate-md", *PARAMS, "--x", "0.4,-0.3")
    assert code == 0
    assert out == ""
    assert json.loads(target.read_text())["value"] > 0.0


def test_moments_at_long_time(capsys):
    code, out, _ = run(capsys, "moments", *PARAMS, "--t", "10000")
    assert code == 0
    document = json.loads(out)
    for a, b in zip(document["mean"], document["mean_generalized"]):
        assert a == pytest.approx(b, rel=1e-10)


def test_mgf_overflow_is_numerical_failure(capsys):
    code, _, err = run(capsys, "mgf", *PARAMS, "--t", "100", "--theta", "3,3")
    assert code == 1
    assert "log_mgf" in err


def test_mgf_log_only(capsys):
    code, out, _ = run(capsys, "mgf", *PARAMS, "--t", "100", "--theta", "3,3", "--log")
    assert code == 0
    document = json.loads(out)
    assert document["log_mgf"] > 709.0
    assert "mgf" not in document


def _experiment_without_seed(tmp_path):
    config = dict(EXPERIMENT["config"])
    del config["seed"]
    path = tmp_path / "ld.json"
    path.write_text(json.dumps({"kind": "ld", "config": config}))
    return path


def test_experiment_seed_from_environment(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("FRACPOISSON_SEED", "77")
    Settings.reset()
    code, out, _ = run(capsys, "experiment", "--config", str(_experiment_without_seed(tmp_path)))
    assert code == 0
    assert json.loads(out)["config"]["seed"] == 77


def test_experiment_seed_flag_overrides_config(capsys, tmp_path):
    config = tmp_path / "ld.json"
    config.write_text(json.dumps(EXPERIMENT))
    code, out, _ = run(capsys, "experiment", "--config", str(config), "--seed", "9")
    assert code == 0
    assert json.loads(out)["config"]["seed"] == 9


def test_seed_only_where_used(capsys):
    code, _, _ = run(capsys, "ml", "--alpha", "1", "--beta", "1", "--z", "1", "--seed", "1")
    assert code == 2


@pytest.mark.parametrize(
    "command,needles",
    [
        ("ml", ["sum_j", "Gamma(alpha", "dimensionless"]),
        ("pmf", ["E_{nu,1}(s(lambda)", "multinomial", "(events)"]),
        ("mgf", ["E[exp(<theta,", "E_{nu,1}(s(lambda)", "(dimensionless)"]),
        ("moments", ["E_{nu,nu}(z)/E_{nu,1}(z)", "E^2_{nu,nu+1}(z)/E_{nu,1}(z)", "(events"]),
        ("rate-ld", ["Lambda*(x)", "(events", "(1/time)."]),
        ("rate-md", ["C^-1", "(events"]),
        ("estimate", ["f_a(x)", "(events)"]),
        ("rate-j", ["J_nu(nu_hat)", "(1/time)."]),
    ],
)
def test_subcommand_help_names_formula_and_units(capsys, command, needles):
    code, out, _ = run(capsys, command, "--help")
    assert code == 0
    for needle in needles:
        assert needle in out, f"{needle!r} missing from {command} --help"
