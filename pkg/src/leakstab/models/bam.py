"""Bidirectional associative memory networks embedded as block-sparse general systems."""

from __future__ import annotations

from collections.abc import Iterator
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, ClassVar

from leakstab.certificates import LipschitzData, comparison_matrix
from leakstab.descriptors import Descriptor, delay_at, sup_of_descriptor
from leakstab.errors import SpecError
from leakstab.linalg import Scalar
from leakstab.models.base import (
    ModelSpec,
    check_tau,
    descriptor_table,
    descriptor_vector,
    flatten,
    indices,
)
from leakstab.models.hopfield import activation_table
from leakstab.state import HistoryState, SystemDefinition


@dataclass(frozen=True)
class BAMSpec(ModelSpec):
    """Two layers x (N1 neurons) and y (N2 neurons) coupled only across layers.

        x_i(m+1) = c^_i(m) x_i(m-tau) + sum_j a^_ij(m) f_j(y_j(m))
                   + sum_j b^_ij(m) f_j(y_j(m - tau^_ij(m))) + I^_i(m)
        y_j(m+1) = c~_j(m) y_j(m-tau) + sum_i a~_ji(m) g_i(x_i(m))
                   + sum_i b~_ji(m) g_i(x_i(m - tau~_ji(m))) + I~_j(m)

    Hat tables are N1 x N2, tilde tables N2 x N1; ``f`` has N2 activations acting on y and
    ``g`` has N1 activations acting on x. Indices are zero-based.
    """

    n1: int
    n2: int
    tau: int
    c_hat: Any
    c_tilde: Any
    a_hat: Any = None
    b_hat: Any = None
    tau_hat: Any = None
    i_hat: Any = None
    a_tilde: Any = None
    b_tilde: Any = None
    tau_tilde: Any = None
    i_tilde: Any = None
    f: Any = None
    g: Any = None
    name: str = "bam"
    kind: ClassVar[str] = "bam"

    def __post_init__(self) -> None:
        if self.n1 < 1 or self.n2 < 1:
            raise SpecError(f"BAM model needs N1, N2 >= 1, got N1={self.n1}, N2={self.n2}")
        check_tau(self.tau)
        hat, tilde = (self.n1, self.n2), (self.n2, self.n1)
        normalized = {
            "c_hat": descriptor_vector("c_hat", self.c_hat, self.n1),
            "c_tilde": descriptor_vector("c_tilde", self.c_tilde, self.n2),
            "a_hat": descriptor_table("a_hat", self.a_hat, hat),
            "b_hat": descriptor_table("b_hat", self.b_hat, hat),
            "tau_hat": descriptor_table("tau_hat", self.tau_hat, hat),
            "i_hat": descriptor_vector("i_hat", self.i_hat, self.n1),
            "a_tilde": descriptor_table("a_tilde", self.a_tilde, tilde),
            "b_tilde": descriptor_table("b_tilde", self.b_tilde, tilde),
            "tau_tilde": descriptor_table("tau_tilde", self.tau_tilde, tilde),
            "i_tilde": descriptor_vector("i_tilde", self.i_tilde, self.n2),
            "f": activation_table("f", self.f, (self.n2,)),
            "g": activation_table("g", self.g, (self.n1,)),
        }
        for key, value in normalized.items():
            object.__setattr__(self, key, value)

    @property
    def n_channels(self) -> int:
        return self.n1 + self.n2

    def coefficient_descriptors(self) -> Iterator[Descriptor]:
        yield from self.c_hat
        yield from self.c_tilde
        for table in (
            self.a_hat,
            self.b_hat,
            self.tau_hat,
            self.a_tilde,
            self.b_tilde,
            self.tau_tilde,
        ):
            yield from flatten(table)
        yield from self.i_hat
        yield from self.i_tilde

    def delay_descriptors(self) -> Iterator[tuple[str, Descriptor]]:
        for i, j in indices(self.n1, self.n2):
            yield f"tau_hat[{i + 1},{j + 1}]", self.tau_hat[i][j]
        for j, i in indices(self.n2, self.n1):
            yield f"tau_tilde[{j + 1},{i + 1}]", self.tau_tilde[j][i]

    def lower(self) -> SystemDefinition:
        return lower_bam(self)

    def lipschitz_data(self, *, sampled: bool = False) -> LipschitzData:
        """Blocks U_ij = (a^+_ij + b^+_ij) F_j and S_ji = (a~+_ji + b~+_ji) G_i."""
        sup = sup_of_descriptor if sampled else (lambda desc: desc.analytic_sup())
        n1, n = self.n1, self.n_channels
        H: list[list[Scalar]] = [[Fraction(0)] * n for _ in range(n)]
        for i, j in indices(n1, self.n2):
            H[i][n1 + j] = (sup(self.a_hat[i][j]) + sup(self.b_hat[i][j])) * self.f[j].lipschitz
        for j, i in indices(self.n2, n1):
            H[n1 + j][i] = (
                sup(self.a_tilde[j][i]) + sup(self.b_tilde[j][i])
            ) * self.g[i].lipschitz
        c_plus = tuple(sup(c) for c in self.c_hat) + tuple(sup(c) for c in self.c_tilde)
        return LipschitzData(H=tuple(tuple(row) for row in H), c_plus=c_plus)


def lower_bam(spec: BAMSpec) -> SystemDefinition:
    """Channels 0..N1-1 carry x and channels N1..N1+N2-1 carry y.

    h_ij vanishes inside each layer; across layers it holds the two weight terms plus the
    input share I^_i/N2 (x rows) or I~_j/N1 (y rows).
    """
    n1, n2 = spec.n1, spec.n2
    leak = spec.c_hat + spec.c_tilde

    def leakage_coeff(i: int, m: int) -> float:
        return leak[i](m)

    def nonlinearity(i: int, m: int, state: HistoryState) -> float:
        total = 0.0
        if i < n1:
            share = spec.i_hat[i](m) / n2
            for j in range(n2):
                f = spec.f[j]
                lag = delay_at(spec.tau_hat[i][j], m)
                hij = spec.a_hat[i][j](m) * f(state.at(n1 + j, 0))
                hij += spec.b_hat[i][j](m) * f(state.at(n1 + j, -lag))
                hij += share
                total += hij
            return total
        j = i - n1
        share = spec.i_tilde[j](m) / n1
        for k in range(n1):
            g = spec.g[k]
            lag = delay_at(spec.tau_tilde[j][k], m)
            hjk = spec.a_tilde[j][k](m) * g(state.at(k, 0))
            hjk += spec.b_tilde[j][k](m) * g(state.at(k, -lag))
            hjk += share
            total += hjk
        return total

    return SystemDefinition(
        n_channels=spec.n_channels,
        leakage_delay=spec.tau,
        window_start=spec.window_start,
        leakage_coeff=leakage_coeff,
        nonlinearity=nonlinearity,
        period=spec.period,
        name=spec.name,
    )


def bam_p_matrix(spec: BAMSpec) -> tuple[tuple[Scalar, ...], ...]:
    """[[I - C^, -U], [-S, I - C~]]."""
    return comparison_matrix(spec.lipschitz_data())
