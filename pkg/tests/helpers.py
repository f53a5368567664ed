"""Small hand-built systems and random generators shared by the tests."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from leakstab.models import BAMSpec, HighOrderSpec, HopfieldSpec
from leakstab.registry import activation
from leakstab.state import HistoryState, SystemDefinition


def linear_system(
    c: float = 0.5, gain: float = 0.2, tau: int = 1, r: int = -2, period: int | None = 1
) -> SystemDefinition:
    """x(m+1) = c x(m - tau) + gain * x(m + r) on one channel."""
    return SystemDefinition(
        n_channels=1,
        leakage_delay=tau,
        window_start=r,
        leakage_coeff=lambda i, m: c,
        nonlinearity=lambda i, m, state: gain * state.at(0, r),
        period=period,
        name="linear",
    )


def random_state(rng: np.random.Generator, n: int, r: int, scale: float = 1.0) -> HistoryState:
    return HistoryState(r, rng.uniform(-scale, scale, (n, 1 - r)))


def random_fraction(rng: np.random.Generator, high: int, denominator: int = 24) -> Fraction:
    return Fraction(int(rng.integers(0, high + 1)), denominator)


def random_hopfield(rng: np.random.Generator, n: int, k: int, tau: int) -> HopfieldSpec:
    """Constant-coefficient Hopfield spec with exact weights and small delays."""
    weights = {
        (i, j, q): random_fraction(rng, 6) * (1 if rng.random() < 0.5 else -1)
        for i in range(n)
        for j in range(n)
        for q in range(k)
    }
    delays = {idx: int(rng.integers(0, 4)) for idx in weights}
    return HopfieldSpec(
        n=n,
        k=k,
        tau=tau,
        leakage=[random_fraction(rng, 8) for _ in range(n)],
        weights=weights,
        delays=delays,
        activations=activation("tanh"),
        inputs=[Fraction(int(rng.integers(-4, 5)), 8) for _ in range(n)],
    )


def random_high_order(rng: np.random.Generator, n: int, tau: int) -> HighOrderSpec:
    return HighOrderSpec(
        n=n,
        tau=tau,
        leakage=[random_fraction(rng, 6) for _ in range(n)],
        a={(i, j): random_fraction(rng, 3) for i in range(n) for j in range(n)},
        b={
            (i, j, p): random_fraction(rng, 2)
            for i in range(n)
            for j in range(n)
            for p in range(n)
        },
        delays_tau={
            (i, j, p): int(rng.integers(0, 3)) for i in range(n) for j in range(n) for p in range(n)
        },
        delays_xi={
            (i, j, p): int(rng.integers(0, 3)) for i in range(n) for j in range(n) for p in range(n)
        },
        f=[activation("tanh")] * n,
        g=[activation("tanh")] * n,
        inputs=[Fraction(1, 4)] * n,
    )


def _theta(rng: np.random.Generator) -> Fraction:
    """Share of the available margin a constructed row uses, in [3/10, 9/10]."""
    return Fraction(int(rng.integers(3, 10)), 10)


def _positive_fraction(rng: np.random.Generator, high: int, denominator: int = 24) -> Fraction:
    return Fraction(int(rng.integers(1, high + 1)), denominator)


def _witness(rng: np.random.Generator, n: int) -> tuple[Fraction, ...]:
    return tuple(Fraction(int(v)) for v in rng.integers(1, 10, n))


def certified_hopfield(rng: np.random.Generator) -> HopfieldSpec:
    """Hopfield spec whose comparison matrix M has M d > 0 for a random integer d.

    Row i is scaled so that sum_j H_ij d_j = theta_i (1 - c_i) d_i with theta_i < 1.
    """
    n, k, tau = (int(v) for v in (rng.integers(1, 4), rng.integers(1, 3), rng.integers(0, 3)))
    d = _witness(rng, n)
    leakage = [random_fraction(rng, 8) for _ in range(n)]
    weights = {
        (i, j, q): _positive_fraction(rng, 6) * (1 if rng.random() < 0.5 else -1)
        for i in range(n)
        for j in range(n)
        for q in range(k)
    }
    for i in range(n):
        row = [idx for idx in weights if idx[0] == i]
        load = sum(abs(weights[idx]) * d[idx[1]] for idx in row)
        scale = _theta(rng) * (1 - leakage[i]) * d[i] / load
        for idx in row:
            weights[idx] *= scale
    return HopfieldSpec(
        n=n,
        k=k,
        tau=tau,
        leakage=leakage,
        weights=weights,
        delays={idx: int(rng.integers(0, 4)) for idx in weights},
        activations=activation("tanh"),
        inputs=[Fraction(int(rng.integers(-4, 5)), 8) for _ in range(n)],
    )


def certified_bam(rng: np.random.Generator) -> BAMSpec:
    """BAM spec built the same way: each hat and tilde row uses a theta share of its margin."""
    n1, n2 = (int(v) for v in rng.integers(1, 3, 2))
    d = _witness(rng, n1 + n2)
    c_hat = [random_fraction(rng, 6) for _ in range(n1)]
    c_tilde = [random_fraction(rng, 6) for _ in range(n2)]
    a_hat = {(i, j): _positive_fraction(rng, 8) for i in range(n1) for j in range(n2)}
    b_hat = {idx: _positive_fraction(rng, 4) for idx in a_hat}
    a_tilde = {(j, i): _positive_fraction(rng, 8) for j in range(n2) for i in range(n1)}
    b_tilde = {idx: _positive_fraction(rng, 4) for idx in a_tilde}
    for i in range(n1):
        load = sum((a_hat[i, j] + b_hat[i, j]) * d[n1 + j] for j in range(n2))
        scale = _theta(rng) * (1 - c_hat[i]) * d[i] / load
        for j in range(n2):
            a_hat[i, j] *= scale
            b_hat[i, j] *= scale
    for j in range(n2):
        load = sum((a_tilde[j, i] + b_tilde[j, i]) * d[i] for i in range(n1))
        scale = _theta(rng) * (1 - c_tilde[j]) * d[n1 + j] / load
        for i in range(n1):
            a_tilde[j, i] *= scale
            b_tilde[j, i] *= scale
    return BAMSpec(
        n1=n1,
        n2=n2,
        tau=int(rng.integers(0, 3)),
        c_hat=c_hat,
        c_tilde=c_tilde,
        a_hat=a_hat,
        b_hat=b_hat,
        tau_hat={idx: int(rng.integers(0, 4)) for idx in a_hat},
        a_tilde=a_tilde,
        b_tilde=b_tilde,
        tau_tilde={idx: int(rng.integers(0, 4)) for idx in a_tilde},
        i_hat=[Fraction(1, 4)] * n1,
        f=[activation("tanh")] * n2,
        g=[activation("arctan")] * n1,
    )


def certified_high_order(rng: np.random.Generator) -> HighOrderSpec:
    """High-order spec with tanh everywhere whose weighted margins are positive at a random d.

    With F = G = m = 1 row i carries sum_j a_ij d_j + sum_jp b_ijp (d_p + d_j).
    """
    n, tau = int(rng.integers(1, 4)), int(rng.integers(0, 3))
    d = _witness(rng, n)
    leakage = [random_fraction(rng, 6) for _ in range(n)]
    a = {(i, j): _positive_fraction(rng, 3) for i in range(n) for j in range(n)}
    b = {
        (i, j, p): _positive_fraction(rng, 2) for i in range(n) for j in range(n) for p in range(n)
    }
    for i in range(n):
        load = sum(a[i, j] * d[j] for j in range(n)) + sum(
            b[i, j, p] * (d[p] + d[j]) for j in range(n) for p in range(n)
        )
        scale = _theta(rng) * (1 - leakage[i]) * d[i] / load
        for j in range(n):
            a[i, j] *= scale
            for p in range(n):
                b[i, j, p] *= scale
    return HighOrderSpec(
        n=n,
        tau=tau,
        leakage=leakage,
        a=a,
        b=b,
        delays_tau={idx: int(rng.integers(0, 3)) for idx in b},
        delays_xi={idx: int(rng.integers(0, 3)) for idx in b},
        f=[activation("tanh")] * n,
        g=[activation("tanh")] * n,
        inputs=[Fraction(1, 4)] * n,
    )
