"""Tests for leakstab.reporting: CSV and JSON writers, rendered summaries."""

from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

from leakstab.descriptors import ScaledDescriptor
from leakstab.engine import check_exponential_bound, find_periodic_orbit, simulate
from leakstab.errors import ShapeError
from leakstab.reporting import (
    distances_frame,
    format_matrix,
    orbit_frame,
    orbit_payload,
    read_csv,
    read_json,
    render_certificate_summary,
    residuals_frame,
    slack_frame,
    state_from_frame,
    to_json,
    trajectory_frame,
    write_csv,
    write_json,
    write_plot_script,
)
from leakstab.routes import certify_spec


@pytest.fixture()
def orbit(example_system):
    return find_periodic_orbit(example_system, tol=1e-10)


class TestCsv:
    def test_header_and_columns(self, tmp_path, example_system, example_seeds):
        traj = simulate(example_system, example_seeds[0], 5)
        path = write_csv(tmp_path / "traj.csv", trajectory_frame(traj))
        lines = path.read_text().splitlines()
        assert lines[0] == "# format_version: 1"
        assert lines[1] == "m,x_1,x_2"
        assert lines[2].startswith("-3,")
        assert len(lines) == 2 + 9

    def test_values_survive_the_file(self, tmp_path, example_system, example_seeds):
        traj = simulate(example_system, example_seeds[2], 20)
        path = write_csv(tmp_path / "traj.csv", trajectory_frame(traj))
        frame = read_csv(path)
        state = state_from_frame(frame, traj.window_start, at=12)
        assert np.array_equal(state.values, traj.window(12).values)

    def test_whole_trajectory_reads_back_bit_for_bit(self, tmp_path, example_system, example_seeds):
        traj = simulate(example_system, example_seeds[0], 200)
        frame = read_csv(write_csv(tmp_path / "traj.csv", trajectory_frame(traj)))
        assert np.array_equal(frame[["x_1", "x_2"]].to_numpy().T, traj.samples)

    def test_orbit_table_restarts_the_orbit(self, tmp_path, example_system, orbit):
        """The saved window at m = 0 reproduces the orbit within the tolerance."""
        frame = read_csv(write_csv(tmp_path / "orbit.csv", orbit_frame(orbit)))
        start = state_from_frame(frame, example_system.window_start)
        again = find_periodic_orbit(example_system, start, tol=1e-10)
        assert again.iterations == 1
        assert again.residual <= 1e-10

    def test_state_from_short_frame(self, example_system, example_seeds):
        frame = trajectory_frame(simulate(example_system, example_seeds[0], 2))
        with pytest.raises(ShapeError, match="expected 4"):
            state_from_frame(frame, -3, at=5)

    def test_residuals_and_slack(self, example_system, example_seeds):
        assert residuals_frame([0.5, 0.25]).to_dict("list") == {
            "iteration": [1, 2],
            "residual": [0.5, 0.25],
        }
        report = check_exponential_bound(
            example_system, example_seeds[0], example_seeds[1], 50.0, 0.99, 10
        )
        frame = slack_frame(report)
        assert list(frame.columns) == ["m", "observed", "bound", "slack"]
        assert len(frame) == 11

    def test_distances_truncate_to_shortest(self):
        frame = distances_frame({"a": np.ones(5), "b": np.zeros(3)})
        assert frame["m"].tolist() == [0, 1, 2]
        assert list(frame.columns) == ["m", "a", "b"]


class TestJson:
    def test_fractions_are_strings(self):
        text = to_json({"d": [Fraction(6), Fraction(1, 12)], "n": np.int64(3)})
        assert '"1/12"' in text
        assert '"format_version": 1' in text

    def test_unknown_type(self):
        with pytest.raises(TypeError):
            to_json({"x": object()})

    def test_round_trip_through_file(self, tmp_path, orbit):
        path = write_json(tmp_path / "orbit.json", orbit_payload(orbit))
        data = read_json(path)
        assert data["format_version"] == 1
        assert data["period"] == 10
        assert data["m"][0] == -3 and data["m"][-1] == 10
        assert len(data["x"]) == 2


class TestSummary:
    def test_format_matrix(self):
        matrix = [[Fraction(1, 2), Fraction(-1, 6)], [Fraction(-1, 2), Fraction(1, 3)]]
        assert format_matrix(matrix) == "[[1/2, -1/6], [-1/2, 1/3]]"

    def test_certified_example(self, example_spec):
        cert = certify_spec(example_spec)
        text = render_certificate_summary(cert, example_spec.describe())
        assert "model: hopfield (N=2, tau=2, r=-3, period=10)" in text
        assert "verdict: Certified via m-matrix" in text
        assert "comparison matrix: [[1/2, -1/6], [-1/2, 1/3]]" in text
        assert "leading minors: 1/2, 1/12" in text
        assert "witness d: 6, 12" in text
        assert "(x-coordinates:" in text

    def test_not_certified_has_notes(self, example_spec):
        doubled = tuple(
            tuple(ScaledDescriptor(w, Fraction(2)) for w in per_j)
            for per_j in example_spec.weights[1]
        )
        spec = replace(example_spec, weights=(example_spec.weights[0], doubled))
        text = render_certificate_summary(certify_spec(spec), spec.describe())
        assert "verdict: NotCertified" in text
        assert "note: row dominance fails on rows [2]" in text
        assert "mu:" not in text


def test_plot_script(tmp_path):
    path = write_plot_script(tmp_path / "plot_orbit.py", "orbit.csv", 2, "periodic orbit")
    text = path.read_text()
    assert "orbit.csv" in text
    assert "x_2" in text
    assert 'float_precision="round_trip"' in text
    compile(text, str(path), "exec")
