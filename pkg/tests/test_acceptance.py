"""End-to-end checks over the bundled network and sweeps of random models."""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
import pytest

from leakstab.certificates import certify_m_matrix, comparison_matrix
from leakstab.cli import CONVERGENCE_STEPS, CONVERGENCE_TARGET, orbit_distances
from leakstab.engine import (
    check_exponential_bound,
    check_exponential_bound_batch,
    check_lemma_inequality,
    find_periodic_orbit,
    simulate,
)
from leakstab.models import lower_high_order
from leakstab.routes import certify_spec
from leakstab.state import HistoryState, state_distance
from tests.helpers import (
    certified_bam,
    certified_high_order,
    certified_hopfield,
    random_high_order,
    random_hopfield,
    random_state,
)

pytestmark = pytest.mark.slow


def test_example_seeds_converge_to_the_orbit(example_spec, example_system, example_seeds):
    cert = certify_spec(example_spec)
    orbit = find_periodic_orbit(
        example_system, tol=1e-12, envelope=(cert.envelope_constant, cert.zeta)
    )
    for k, seed in enumerate(example_seeds, start=1):
        dist = orbit_distances(example_system, orbit, seed, CONVERGENCE_STEPS)
        assert dist[-1] <= CONVERGENCE_TARGET, f"seed {k}"


def test_example_envelope_on_random_pairs(example_spec, example_system):
    cert = certify_spec(example_spec)
    rng = np.random.default_rng(2024)
    pairs = [
        (random_state(rng, 2, -3, scale=5.0), random_state(rng, 2, -3, scale=5.0))
        for _ in range(50)
    ]
    merged, reports = check_exponential_bound_batch(
        example_system, pairs, cert.envelope_constant, cert.zeta, 500, workers=4
    )
    assert merged.passed
    assert len(reports) == 50


def _assert_certified_envelope(spec, rng):
    cert = certify_spec(spec)
    assert cert.certified, cert.notes
    assert cert.lambda_numeric <= cert.lambda_bound * (1 + 1e-9)
    system = spec.lower()
    alpha = random_state(rng, spec.n_channels, spec.window_start, scale=3.0)
    beta = random_state(rng, spec.n_channels, spec.window_start, scale=3.0)
    report = check_exponential_bound(system, alpha, beta, cert.envelope_constant, cert.zeta, 200)
    assert report.passed, report.max_violation


@pytest.mark.parametrize("seed", range(120))
def test_certified_hopfield_envelopes_hold(seed):
    """Trajectories of certified models obey the envelope in the original coordinates."""
    rng = np.random.default_rng(seed)
    _assert_certified_envelope(certified_hopfield(rng), rng)


@pytest.mark.parametrize("seed", range(40))
def test_certified_bam_envelopes_hold(seed):
    rng = np.random.default_rng(7000 + seed)
    _assert_certified_envelope(certified_bam(rng), rng)


@pytest.mark.parametrize("seed", range(40))
def test_high_order_envelopes_hold(seed):
    rng = np.random.default_rng(500 + seed)
    _assert_certified_envelope(certified_high_order(rng), rng)


@pytest.mark.parametrize("seed", range(100))
def test_routes_agree_with_the_comparison_matrix(seed):
    """A Hopfield model is certified exactly when I - C+ - H is a nonsingular M-matrix."""
    rng = np.random.default_rng(1000 + seed)
    spec = random_hopfield(rng, int(rng.integers(1, 5)), int(rng.integers(1, 3)), 1)
    report = certify_m_matrix(comparison_matrix(spec.lipschitz_data()))
    assert certify_spec(spec).certified == report.is_nonsingular_m


@pytest.mark.parametrize("seed", range(20))
def test_difference_estimate_holds_without_certificate(seed):
    """The per-channel estimate needs only the Lipschitz bounds, not stability."""
    rng = np.random.default_rng(3000 + seed)
    spec = random_hopfield(rng, int(rng.integers(1, 4)), 2, int(rng.integers(0, 3)))
    rows = [float(v) for v in spec.lipschitz_data().row_sums]
    system = spec.lower()
    alpha = random_state(rng, spec.n_channels, spec.window_start, scale=2.0)
    beta = random_state(rng, spec.n_channels, spec.window_start, scale=2.0)
    report = check_lemma_inequality(system, alpha, beta, lambda i, _t: rows[i], 15)
    assert report.passed, report.max_violation


def test_orbit_stays_periodic(example_system):
    orbit = find_periodic_orbit(example_system, tol=1e-10)
    assert orbit.residual <= 1e-8
    assert orbit.iterations <= 500
    omega = orbit.period
    traj = simulate(example_system, orbit.fixed_point, 10 * omega)
    worst = max(
        state_distance(traj.window(m), orbit.orbit.window(m % omega))
        for m in range(10 * omega + 1)
    )
    assert worst <= 1e-7


def test_difference_estimate_on_the_example(example_spec, example_system, example_seeds):
    rows = [float(v) for v in example_spec.lipschitz_data().row_sums]
    for alpha, beta in itertools.combinations(example_seeds, 2):
        report = check_lemma_inequality(example_system, alpha, beta, lambda i, _t: rows[i], 20)
        assert report.passed, report.max_violation


def test_high_order_change_of_variables_sweep():
    rng = np.random.default_rng(99)
    for _ in range(50):
        n = int(rng.integers(1, 4))
        spec = random_high_order(rng, n, int(rng.integers(0, 3)))
        d = tuple(Fraction(int(v), 3) for v in rng.integers(1, 10, n))
        scale = np.array([[float(v)] for v in d])
        alpha = random_state(rng, n, spec.window_start)
        beta = HistoryState(alpha.window_start, alpha.values / scale)
        x = simulate(spec.lower(), alpha, 200).samples
        y = simulate(lower_high_order(spec, d), beta, 200).samples
        assert np.max(np.abs(y - x / scale)) <= 1e-10
