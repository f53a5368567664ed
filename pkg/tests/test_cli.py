"""Tests for leakstab.cli: command exit codes and written artifacts."""

from __future__ import annotations

import textwrap

import pytest

from leakstab.cli import (
    EXIT_CONFIG_ERROR,
    EXIT_DIVERGED,
    EXIT_NO_CONVERGENCE,
    EXIT_NOT_CERTIFIED,
    EXIT_REFUSED,
    EXIT_SUCCESS,
    cmd_certify,
    cmd_example,
    cmd_periodic,
    cmd_simulate,
    cmd_verify_bounds,
    parse_pairs,
)
from leakstab.config import ConfigError, RunConfig, bundled_fixture
from leakstab.reporting import read_csv, read_json

# 1 - 1/2 - 3/4 < 0 and the 1 x 1 comparison matrix is -1/4
UNCERTIFIED_YAML = textwrap.dedent("""\
    format_version: 1
    model: hopfield
    n: 1
    k: 1
    tau: 1
    leakage: ["1/2"]
    weights:
      - {index: [1, 1, 1], value: "3/4"}
    activations: {name: tanh}
""")

EXPLODING_YAML = textwrap.dedent("""\
    format_version: 1
    model: hopfield
    n: 1
    k: 1
    tau: 0
    leakage: [0]
    weights:
      - {index: [1, 1, 1], value: 10}
    activations: {name: identity}
    seeds:
      - ["1"]
""")


@pytest.fixture()
def fixture_path() -> str:
    return str(bundled_fixture())


@pytest.fixture()
def write_model(tmp_path):
    def _write(text: str) -> str:
        path = tmp_path / "model.yaml"
        path.write_text(text)
        return str(path)

    return _write


def _config(command: str, model: str | None, out, **kwargs) -> RunConfig:
    return RunConfig(command=command, model_path=model, output=str(out), **kwargs)


# ---------------------------------------------------------------------------
# certify
# ---------------------------------------------------------------------------


class TestCertify:
    def test_example_is_certified(self, fixture_path, tmp_path, capsys):
        code = cmd_certify(_config("certify", fixture_path, tmp_path))
        assert code == EXIT_SUCCESS
        out = capsys.readouterr().out
        assert "verdict: Certified via m-matrix" in out
        data = read_json(tmp_path / "certificate.json")
        assert data["format_version"] == 1
        assert data["certificate"]["witness_d"] == ["6", "12"]
        assert data["certificate"]["m_matrix"]["leading_minors"] == ["1/2", "1/12"]
        assert (tmp_path / "summary.txt").exists()

    def test_not_certified(self, write_model, tmp_path, capsys):
        code = cmd_certify(_config("certify", write_model(UNCERTIFIED_YAML), tmp_path / "out"))
        assert code == EXIT_NOT_CERTIFIED
        assert "NotCertified" in capsys.readouterr().out

    def test_empty_model_file(self, write_model, tmp_path, capsys):
        code = cmd_certify(_config("certify", write_model(""), tmp_path / "out"))
        assert code == EXIT_CONFIG_ERROR
        assert capsys.readouterr().err.startswith("Error: ")

    def test_missing_model_argument(self, tmp_path, capsys):
        code = cmd_certify(_config("certify", None, tmp_path))
        assert code == EXIT_CONFIG_ERROR
        assert "--model" in capsys.readouterr().err

    def test_deterministic_output(self, fixture_path, tmp_path):
        """Identical inputs give byte-identical certificates."""
        cmd_certify(_config("certify", fixture_path, tmp_path / "a"))
        cmd_certify(_config("certify", fixture_path, tmp_path / "b"))
        first = (tmp_path / "a" / "certificate.json").read_bytes()
        assert first == (tmp_path / "b" / "certificate.json").read_bytes()


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


class TestSimulate:
    def test_one_table_per_model_seed(self, fixture_path, tmp_path):
        code = cmd_simulate(_config("simulate", fixture_path, tmp_path, horizon=30))
        assert code == EXIT_SUCCESS
        for k in (1, 2, 3):
            frame = read_csv(tmp_path / f"trajectory_{k}.csv")
            assert frame["m"].tolist() == list(range(-3, 31))

    def test_seed_option_and_json(self, fixture_path, tmp_path):
        config = _config(
            "simulate", fixture_path, tmp_path, horizon=5, seeds=["0.1,-0.2"], format="json"
        )
        assert cmd_simulate(config) == EXIT_SUCCESS
        data = read_json(tmp_path / "trajectory_1.json")
        assert data["columns"] == ["m", "x_1", "x_2"]
        assert data["data"]["x_1"][0] == 0.1
        assert not (tmp_path / "trajectory_2.json").exists()

    def test_plot_script(self, fixture_path, tmp_path):
        config = _config("simulate", fixture_path, tmp_path, horizon=5, plot_script=True)
        cmd_simulate(config)
        assert (tmp_path / "plot_trajectory_1.py").exists()

    def test_divergence(self, write_model, tmp_path, capsys):
        config = _config("simulate", write_model(EXPLODING_YAML), tmp_path / "out", horizon=400)
        assert cmd_simulate(config) == EXIT_DIVERGED
        assert "diverged" in capsys.readouterr().err

    def test_bad_seed(self, fixture_path, tmp_path):
        config = _config("simulate", fixture_path, tmp_path, seeds=["cos"])
        assert cmd_simulate(config) == EXIT_CONFIG_ERROR


# ---------------------------------------------------------------------------
# periodic
# ---------------------------------------------------------------------------


class TestPeriodic:
    def test_example_orbit(self, fixture_path, tmp_path, capsys):
        code = cmd_periodic(_config("periodic", fixture_path, tmp_path))
        assert code == EXIT_SUCCESS
        assert "orbit: period 10" in capsys.readouterr().out
        orbit = read_csv(tmp_path / "orbit.csv")
        assert orbit["m"].tolist() == list(range(-3, 11))
        assert read_csv(tmp_path / "residuals.csv")["residual"].iloc[-1] <= 1e-10

    def test_refuses_uncertified(self, write_model, tmp_path, capsys):
        code = cmd_periodic(_config("periodic", write_model(UNCERTIFIED_YAML), tmp_path / "out"))
        assert code == EXIT_REFUSED
        assert "--force" in capsys.readouterr().err

    def test_force_runs_anyway(self, write_model, tmp_path):
        config = _config("periodic", write_model(UNCERTIFIED_YAML), tmp_path / "out", force=True)
        assert cmd_periodic(config) == EXIT_SUCCESS

    def test_non_convergence_keeps_residuals(self, fixture_path, tmp_path, capsys):
        config = _config("periodic", fixture_path, tmp_path, tolerance=1e-14, max_iters=2)
        assert cmd_periodic(config) == EXIT_NO_CONVERGENCE
        assert len(read_csv(tmp_path / "residuals.csv")) == 2
        assert "residual trace" in capsys.readouterr().err

    def test_json_orbit(self, fixture_path, tmp_path):
        cmd_periodic(_config("periodic", fixture_path, tmp_path, format="json"))
        data = read_json(tmp_path / "orbit.json")
        assert data["period"] == 10
        assert data["contraction_power"] >= 1


# ---------------------------------------------------------------------------
# verify-bounds
# ---------------------------------------------------------------------------


class TestVerifyBounds:
    def test_model_seed_pairs(self, fixture_path, tmp_path, capsys):
        config = _config("verify-bounds", fixture_path, tmp_path, horizon=80, n_max=10)
        assert cmd_verify_bounds(config) == EXIT_SUCCESS
        out = capsys.readouterr().out
        assert "exponential bound: 3 pairs" in out
        assert "difference estimate: 3 pairs" in out
        summary = read_json(tmp_path / "bounds.json")
        assert summary["exponential"]["passed"] is True
        assert summary["difference_estimate"]["passed"] is True
        slack = read_csv(tmp_path / "slack.csv")
        assert set(slack["pair"]) == {1, 2, 3}

    def test_explicit_and_random_pairs(self, fixture_path, tmp_path):
        config = _config(
            "verify-bounds",
            fixture_path,
            tmp_path,
            horizon=40,
            n_max=5,
            seed_pairs=parse_pairs(["cos,sin:exp,-1"]),
            random_pairs=4,
            workers=2,
        )
        assert cmd_verify_bounds(config) == EXIT_SUCCESS
        assert read_json(tmp_path / "bounds.json")["pairs"] == 5

    def test_refuses_uncertified(self, write_model, tmp_path):
        config = _config("verify-bounds", write_model(UNCERTIFIED_YAML), tmp_path / "out")
        assert cmd_verify_bounds(config) == EXIT_REFUSED

    def test_no_pairs(self, write_model, tmp_path, capsys):
        path = write_model(bundled_fixture().read_text().split("# initial histories")[0])
        config = _config("verify-bounds", path, tmp_path / "out")
        assert cmd_verify_bounds(config) == EXIT_CONFIG_ERROR
        assert "No seed pairs" in capsys.readouterr().err

    def test_bad_seed_pair(self):
        with pytest.raises(ConfigError):
            parse_pairs(["cos,sin"])


# ---------------------------------------------------------------------------
# example
# ---------------------------------------------------------------------------


class TestExample:
    def test_bundled_chain(self, tmp_path, capsys):
        config = _config("example", None, tmp_path, horizon=300, random_pairs=5, n_max=10)
        assert cmd_example(config) == EXIT_SUCCESS
        out = capsys.readouterr().out
        assert "M = [[1/2, -1/6], [-1/2, 1/3]]" in out
        assert "leading minors: 1/2, 1/12" in out
        assert "orbit: period 10" in out
        for name in (
            "certificate.json",
            "summary.txt",
            "orbit.csv",
            "residuals.csv",
            "convergence.csv",
            "slack.csv",
            "lemma_slack.csv",
            "bounds.json",
        ):
            assert (tmp_path / name).exists(), name
        convergence = read_csv(tmp_path / "convergence.csv")
        assert list(convergence.columns) == ["m", "seed_1", "seed_2", "seed_3"]
        assert (convergence.iloc[-1, 1:] <= 1e-6).all()
