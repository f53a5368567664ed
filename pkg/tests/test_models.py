"""Tests for leakstab.models: Hopfield, BAM and high-order specs and their lowering."""

from __future__ import annotations

import math
from fractions import Fraction as F

import numpy as np
import pytest

from leakstab.descriptors import AltDescriptor, TrigDescriptor
from leakstab.engine import simulate
from leakstab.errors import ShapeError, SpecError
from leakstab.models import (
    BAMSpec,
    HighOrderSpec,
    HopfieldSpec,
    bam_p_matrix,
    high_order_comparison_matrix,
    high_order_condition,
    hopfield_m_matrix,
    lipschitz_data,
    search_high_order_witness,
)
from leakstab.registry import activation
from leakstab.state import HistoryState
from tests.helpers import random_high_order, random_state

TH = 2 * math.pi / 10


class TestHopfieldExample:
    def test_shape_and_window(self, example_spec):
        assert example_spec.n_channels == 2
        assert example_spec.tau == 2
        assert example_spec.window_start == -3
        assert example_spec.period == 10
        assert not example_spec.is_autonomous

    def test_m_matrix_exact(self, example_spec):
        assert hopfield_m_matrix(example_spec) == (
            (F(1, 2), F(-1, 6)),
            (F(-1, 2), F(1, 3)),
        )

    def test_lipschitz_data(self, example_spec):
        lip = example_spec.lipschitz_data()
        assert lip.H == ((F(1, 4), F(1, 6)), (F(1, 2), F(7, 12)))
        assert lip.c_plus == (F(1, 4), F(1, 12))

    def test_sampled_suprema_never_exceed_analytic(self, example_spec):
        analytic = example_spec.lipschitz_data()
        sampled = example_spec.lipschitz_data(sampled=True)
        assert sampled.c_plus[0] == pytest.approx(0.25)
        assert sampled.c_plus[1] == pytest.approx(math.sin(2 * TH) / 12)
        for row_a, row_s in zip(analytic.H, sampled.H, strict=True):
            for a, s in zip(row_a, row_s, strict=True):
                assert s <= a + 1e-15

    def test_nonlinearity_matches_closed_form(self, example_system, example_seeds):
        """h at m = 1, where the alternating delays equal 1."""
        state = example_seeds[0]
        x1 = lambda j: state.at(0, j)  # noqa: E731
        x2 = lambda j: state.at(1, j)  # noqa: E731
        s, c = math.sin(TH), math.cos(TH)
        h1 = (
            c / 8 * math.atan(x1(0))
            + s / 8 * math.tanh(x1(-1))
            + s / 6 * math.tanh(x2(-1))
        )
        h2 = (
            c / 4 * math.atan(x1(0))
            + s / 4 * math.tanh(x1(-1))
            - s / 6 * math.atan(x2(0))
            - 5 * s / 12 * math.tanh(x2(-1))
            + c / 2
        )
        assert example_system.h(1, state) == pytest.approx([h1, h2], rel=1e-12)

    @pytest.mark.parametrize("m", [0, 1, 2, 7, 13, 25])
    def test_batch_path_matches_per_channel(self, example_spec, example_seeds, m):
        """The vectorised h agrees with the channel-by-channel sum, also after rescaling."""
        for spec in (example_spec, example_spec.rescaled((F(6), F(12)))):
            system = spec.lower()
            assert system.batch_nonlinearity is not None
            for state in example_seeds:
                per_channel = [system.nonlinearity(i, m, state) for i in range(2)]
                assert system.h(m, state) == pytest.approx(per_channel, rel=1e-13, abs=1e-15)

    def test_one_step(self, example_system, example_seeds):
        state = example_seeds[1]
        traj = simulate(example_system, state, 1)
        expected = example_system.leakage(0) * state.values[:, -3] + example_system.h(0, state)
        assert np.array_equal(traj.x(1), expected)

    def test_rescaled_trajectories(self, example_spec, example_seeds):
        """y = d^{-1} x for the rescaled model."""
        d = (F(6), F(12))
        x_sys = example_spec.lower()
        y_sys = example_spec.rescaled(d).lower()
        alpha = example_seeds[0]
        y0 = HistoryState(alpha.window_start, alpha.values / np.array([[6.0], [12.0]]))
        x = simulate(x_sys, alpha, 100).samples
        y = simulate(y_sys, y0, 100).samples
        assert np.max(np.abs(y - x / np.array([[6.0], [12.0]]))) <= 1e-10

    def test_rescaled_lipschitz_matches_witness_rescaling(self, example_spec):
        d = (F(6), F(12))
        assert example_spec.rescaled(d).lipschitz_data() == lipschitz_data(example_spec, d)


class TestHopfieldValidation:
    def test_needs_neurons(self):
        with pytest.raises(SpecError):
            HopfieldSpec(n=0, k=1, tau=0, leakage=[], activations=activation("tanh"))

    def test_needs_activations(self):
        with pytest.raises(SpecError, match="Lipschitz"):
            HopfieldSpec(n=1, k=1, tau=0, leakage=[0])

    def test_weight_index_out_of_range(self):
        with pytest.raises(ShapeError):
            HopfieldSpec(
                n=1,
                k=1,
                tau=0,
                leakage=[0],
                weights={(1, 0, 0): 1},
                activations=activation("tanh"),
            )

    def test_leakage_length(self):
        with pytest.raises(ShapeError):
            HopfieldSpec(n=2, k=1, tau=0, leakage=[0], activations=activation("tanh"))

    def test_fractional_delay(self):
        spec = HopfieldSpec(
            n=1,
            k=1,
            tau=0,
            leakage=[0],
            delays={(0, 0, 0): F(1, 2)},
            activations=activation("tanh"),
        )
        with pytest.raises(SpecError, match="nonnegative integers"):
            _ = spec.window_start

    def test_constant_spec_is_autonomous(self):
        spec = HopfieldSpec(
            n=1,
            k=1,
            tau=1,
            leakage=[F(1, 2)],
            weights=[[[F(1, 4)]]],
            activations=activation("tanh"),
        )
        assert spec.is_autonomous
        assert spec.window_start == -1

    def test_describe(self, example_spec):
        assert example_spec.describe() == {
            "model": "hopfield",
            "n_channels": 2,
            "tau": 2,
            "window_start": -3,
            "period": 10,
        }


@pytest.fixture()
def bam() -> BAMSpec:
    return BAMSpec(
        n1=1,
        n2=2,
        tau=1,
        c_hat=[F(1, 4)],
        c_tilde=[F(1, 5), TrigDescriptor("cos", F(1, 3), 4)],
        a_hat={(0, 0): F(1, 8), (0, 1): F(-1, 8)},
        b_hat={(0, 1): F(1, 4)},
        tau_hat={(0, 1): 2},
        i_hat=[F(1, 2)],
        a_tilde={(1, 0): F(1, 6)},
        b_tilde={(0, 0): F(1, 10)},
        tau_tilde={(0, 0): AltDescriptor(1, 1)},
        f=[activation("tanh"), activation("logistic")],
        g=[activation("arctan")],
    )


class TestBAM:
    def test_channels_and_window(self, bam):
        assert bam.n_channels == 3
        assert bam.window_start == -2
        assert bam.period == 4

    def test_block_lipschitz(self, bam):
        lip = bam.lipschitz_data()
        assert lip.H[0] == (F(0), F(1, 8), (F(1, 8) + F(1, 4)) * F(1, 4))
        assert lip.H[1] == (F(1, 10), F(0), F(0))
        assert lip.H[2] == (F(1, 6), F(0), F(0))
        assert lip.c_plus == (F(1, 4), F(1, 5), F(1, 3))

    def test_p_matrix_has_identity_blocks(self, bam):
        p = bam_p_matrix(bam)
        assert p[1][2] == 0 and p[2][1] == 0
        assert p[0][0] == F(3, 4)

    def test_lowered_nonlinearity(self, bam):
        system = bam.lower()
        state = HistoryState.from_function(3, -2, lambda i, j: 0.1 * (i + 1) + 0.05 * j)
        x, y1, y2 = (state.at(k, 0) for k in range(3))
        logistic = 1 / (1 + math.exp(-y2))
        logistic_lag = 1 / (1 + math.exp(-state.at(2, -2)))
        h_x = math.tanh(y1) / 8 - logistic / 8 + logistic_lag / 4 + 0.5
        # tau~_11(1) = 1 + (-1) = 0
        h_y1 = math.atan(x) / 10
        h_y2 = math.atan(x) / 6
        assert system.h(1, state) == pytest.approx([h_x, h_y1, h_y2], rel=1e-12)

    def test_activation_count(self):
        with pytest.raises(ShapeError):
            BAMSpec(
                n1=1,
                n2=2,
                tau=0,
                c_hat=[0],
                c_tilde=[0, 0],
                f=[activation("tanh")],
                g=[activation("tanh")],
            )


class TestHighOrder:
    @pytest.fixture()
    def single(self) -> HighOrderSpec:
        """N = 1, c+ = 0, a = 0, b_111 = 1/4, g = tanh."""
        return HighOrderSpec(
            n=1,
            tau=0,
            leakage=[0],
            b={(0, 0, 0): F(1, 4)},
            f=[activation("tanh")],
            g=[activation("tanh")],
        )

    def test_single_term_margin(self, single):
        assert high_order_condition(single, (1,)) == (F(1, 2),)

    def test_single_term_lipschitz(self, single):
        assert single.lipschitz_data().H == ((F(1, 2),),)

    def test_comparison_matrix_matches_condition(self):
        rng = np.random.default_rng(11)
        spec = random_high_order(rng, 3, 1)
        q = high_order_comparison_matrix(spec)
        d = (F(1), F(2), F(3))
        via_q = tuple(sum((q[i][k] * d[k] for k in range(3)), F(0)) for i in range(3))
        assert via_q == high_order_condition(spec, d)

    def test_witness_search(self, single):
        report = search_high_order_witness(single)
        assert report.is_nonsingular_m
        assert report.witness_d == (F(2),)

    def test_needs_bounded_g(self):
        with pytest.raises(SpecError, match="bound"):
            HighOrderSpec(
                n=1, tau=0, leakage=[0], f=[activation("tanh")], g=[activation("identity")]
            )

    def test_explicit_bounds_override(self):
        spec = HighOrderSpec(
            n=1,
            tau=0,
            leakage=[0],
            b={(0, 0, 0): F(1, 4)},
            f=[activation("tanh")],
            g=[activation("identity")],
            g_bounds=[F(2)],
        )
        assert spec.lipschitz_data().H == ((F(1),),)

    @pytest.mark.parametrize("seed", range(10))
    def test_change_of_variables(self, seed):
        """Trajectories of the rescaled model are d^{-1} times the original ones."""
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 4))
        spec = random_high_order(rng, n, int(rng.integers(0, 3)))
        d = tuple(F(int(v), 4) for v in rng.integers(1, 12, n))
        scale = np.array([[float(v)] for v in d])
        alpha = random_state(rng, n, spec.window_start)
        beta = HistoryState(alpha.window_start, alpha.values / scale)
        x = simulate(spec.lower(), alpha, 200).samples
        y = simulate(spec.lower(d), beta, 200).samples
        assert np.max(np.abs(y - x / scale)) <= 1e-10

    def test_rescaled_lipschitz(self):
        rng = np.random.default_rng(5)
        spec = random_high_order(rng, 2, 1)
        d = (F(1, 2), F(3))
        assert spec.rescaled(d).lipschitz_data() == spec.lipschitz_data(d)
