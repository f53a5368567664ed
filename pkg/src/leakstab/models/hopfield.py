"""Low-order Hopfield networks with leakage delay and K delayed transmissions per pair."""

from __future__ import annotations

from collections.abc import Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, ClassVar

import numpy as np

from leakstab.certificates import LipschitzData, check_witness, comparison_matrix
from leakstab.descriptors import (
    Descriptor,
    ScaledDescriptor,
    delay_at,
    sup_of_descriptor,
)
from leakstab.errors import ShapeError, SpecError
from leakstab.linalg import Scalar, is_exact_scalar
from leakstab.models.base import (
    ModelSpec,
    check_tau,
    descriptor_table,
    descriptor_vector,
    flatten,
    indices,
)
from leakstab.registry import Activation
from leakstab.state import BatchNonlinearityFn, HistoryState, SystemDefinition


def activation_table(
    name: str, entries: Activation | Mapping | Sequence | None, shape: Sequence[int]
) -> tuple:
    """Nested tuples of activations; a single Activation fills the whole table."""
    if entries is None:
        raise SpecError(f"{name} must be given; every activation needs a Lipschitz constant")
    if isinstance(entries, Activation):
        table = {idx: entries for idx in indices(*shape)}
    elif isinstance(entries, Mapping):
        table = dict(entries)
        missing = [idx for idx in indices(*shape) if idx not in table]
        if missing:
            raise SpecError(f"{name} has no activation for index {missing[0]}")
    else:
        table = {}
        for idx in indices(*shape):
            item: Any = entries
            try:
                for k in idx:
                    item = item[k]
            except (IndexError, TypeError):
                raise ShapeError(f"{name} does not cover index {idx}") from None
            table[idx] = item
    for idx, act in table.items():
        if not isinstance(act, Activation):
            raise SpecError(f"{name}{list(idx)} is not an activation: {act!r}")
    return _nest(shape, (), table)


def _nest(shape: Sequence[int], prefix: tuple[int, ...], table: dict) -> tuple:
    if len(shape) == 1:
        return tuple(table[(*prefix, k)] for k in range(shape[0]))
    return tuple(_nest(shape[1:], (*prefix, k), table) for k in range(shape[0]))


def inverse(value: Scalar) -> Scalar:
    return Fraction(1) / value if is_exact_scalar(value) else 1.0 / float(value)


def _analytic_sup(desc: Descriptor) -> Scalar:
    return desc.analytic_sup()


@dataclass(frozen=True)
class HopfieldSpec(ModelSpec):
    """x_i(m+1) = c_i(m) x_i(m-tau) + sum_j sum_k b_ijk(m) f_ijk(x_j(m - tau_ijk(m))) + I_i(m).

    Indices are zero-based. ``weights``, ``delays`` and ``activations`` are N x N x K
    tables given as nested sequences or as sparse mappings {(i, j, k): value}; missing
    weights and delays default to 0.
    """

    n: int
    k: int
    tau: int
    leakage: Any
    weights: Any = None
    delays: Any = None
    activations: Any = None
    inputs: Any = None
    name: str = "hopfield"
    kind: ClassVar[str] = "hopfield"
    _shape: tuple[int, int, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.n < 1 or self.k < 1:
            raise SpecError(f"Hopfield model needs N, K >= 1, got N={self.n}, K={self.k}")
        check_tau(self.tau)
        shape = (self.n, self.n, self.k)
        object.__setattr__(self, "_shape", shape)
        object.__setattr__(self, "leakage", descriptor_vector("leakage", self.leakage, self.n))
        object.__setattr__(self, "weights", descriptor_table("weights", self.weights, shape))
        object.__setattr__(self, "delays", descriptor_table("delays", self.delays, shape))
        object.__setattr__(
            self, "activations", activation_table("activations", self.activations, shape)
        )
        object.__setattr__(self, "inputs", descriptor_vector("inputs", self.inputs, self.n))

    @property
    def n_channels(self) -> int:
        return self.n

    def coefficient_descriptors(self) -> Iterator[Descriptor]:
        yield from self.leakage
        yield from flatten(self.weights)
        yield from flatten(self.delays)
        yield from self.inputs

    def delay_descriptors(self) -> Iterator[tuple[str, Descriptor]]:
        for i, j, k in indices(*self._shape):
            yield f"delays[{i + 1},{j + 1},{k + 1}]", self.delays[i][j][k]

    def lower(self) -> SystemDefinition:
        return lower_hopfield(self)

    def lipschitz_data(self, *, sampled: bool = False) -> LipschitzData:
        """H_ij = sum_k b+_ijk F_ijk and c_i+ = sup |c_i|.

        Suprema are the closed-form bounds; ``sampled`` uses the maxima over one period of
        integer samples instead.
        """
        sup = sup_of_descriptor if sampled else _analytic_sup
        H = tuple(
            tuple(
                sum(
                    (
                        sup(self.weights[i][j][k]) * self.activations[i][j][k].lipschitz
                        for k in range(self.k)
                    ),
                    Fraction(0),
                )
                for j in range(self.n)
            )
            for i in range(self.n)
        )
        return LipschitzData(H=H, c_plus=tuple(sup(c) for c in self.leakage))

    def rescaled(self, d: Sequence[Scalar]) -> HopfieldSpec:
        """The model for y_i = d_i^{-1} x_i: b~_ijk = b_ijk / d_i, f~_ijk(u) = f_ijk(d_j u)."""
        d = check_witness(d, self.n)
        shape = self._shape
        return HopfieldSpec(
            n=self.n,
            k=self.k,
            tau=self.tau,
            leakage=self.leakage,
            weights={
                (i, j, k): ScaledDescriptor(self.weights[i][j][k], inverse(d[i]))
                for i, j, k in indices(*shape)
            },
            delays=self.delays,
            activations={
                (i, j, k): self.activations[i][j][k].scaled(d[j]) for i, j, k in indices(*shape)
            },
            inputs=[ScaledDescriptor(v, inverse(d[i])) for i, v in enumerate(self.inputs)],
            name=f"{self.name} (rescaled)",
        )


def lower_hopfield(spec: HopfieldSpec) -> SystemDefinition:
    """h_i = sum_j h_ij with h_ij(m, a) = sum_k b_ijk(m) f_ijk(a_j(-tau_ijk(m))) + I_i(m)/N."""
    n, n_terms = spec.n, spec.k
    weights, delays, acts = spec.weights, spec.delays, spec.activations

    def leakage_coeff(i: int, m: int) -> float:
        return spec.leakage[i](m)

    def nonlinearity(i: int, m: int, state: HistoryState) -> float:
        total = 0.0
        share = spec.inputs[i](m) / n
        for j in range(n):
            hij = 0.0
            for k in range(n_terms):
                lag = delay_at(delays[i][j][k], m)
                hij += weights[i][j][k](m) * acts[i][j][k](state.at(j, -lag))
            hij += share
            total += hij
        return total

    return SystemDefinition(
        n_channels=n,
        leakage_delay=spec.tau,
        window_start=spec.window_start,
        leakage_coeff=leakage_coeff,
        nonlinearity=nonlinearity,
        period=spec.period,
        batch_nonlinearity=hopfield_batch(spec),
        name=spec.name,
    )


def hopfield_batch(spec: HopfieldSpec) -> BatchNonlinearityFn:
    """The whole vector h(m, state) with one gather over the N x N x K delayed arguments.

    Weights, gather columns and inputs are cached per m mod period when every descriptor
    is periodic by construction; activations sharing one object are applied together.
    """
    n, n_terms, r = spec.n, spec.k, spec.window_start
    shape = (n, n, n_terms)
    idx = list(indices(*shape))
    sources = np.array([j for _, j, _ in idx]).reshape(shape)
    groups: dict[int, tuple[Activation, list[int]]] = {}
    for pos, (i, j, k) in enumerate(idx):
        act = spec.activations[i][j][k]
        groups.setdefault(id(act), (act, []))[1].append(pos)
    apply_to = [(act, np.array(where)) for act, where in groups.values()]
    cacheable = spec.period is not None and all(
        desc.kind != "function" for desc in spec.coefficient_descriptors()
    )
    tables: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    def coefficients(m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        key = m % spec.period if cacheable else None
        if key is not None and key in tables:
            return tables[key]
        weights = np.array([spec.weights[i][j][k](m) for i, j, k in idx]).reshape(shape)
        columns = np.array([-delay_at(spec.delays[i][j][k], m) - r for i, j, k in idx])
        inputs = np.array([spec.inputs[i](m) for i in range(n)])
        entry = (weights, columns.reshape(shape), inputs)
        if key is not None:
            tables[key] = entry
        return entry

    def batch(m: int, state: HistoryState) -> np.ndarray:
        weights, columns, inputs = coefficients(m)
        args = state.values[sources, columns].ravel()
        out = np.empty_like(args)
        for act, where in apply_to:
            out[where] = act.apply(args[where])
        return (weights * out.reshape(shape)).sum(axis=(1, 2)) + inputs

    return batch


def hopfield_m_matrix(spec: HopfieldSpec) -> tuple[tuple[Scalar, ...], ...]:
    """I - diag(c+) - [sum_k b+_ijk F_ijk]; for constant coefficients this is the matrix
    built from |c_i| and |b_ijk|."""
    return comparison_matrix(spec.lipschitz_data())
