"""High-order Hopfield networks with products of two delayed bounded activations."""

from __future__ import annotations

from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, ClassVar

from leakstab.certificates import (
    LipschitzData,
    MMatrixReport,
    certify_m_matrix,
    check_witness,
)
from leakstab.descriptors import Descriptor, ScaledDescriptor, delay_at, sup_of_descriptor
from leakstab.errors import ShapeError, SpecError
from leakstab.linalg import Scalar
from leakstab.models.base import (
    ModelSpec,
    check_tau,
    descriptor_table,
    descriptor_vector,
    flatten,
    indices,
)
from leakstab.models.hopfield import activation_table, inverse
from leakstab.state import HistoryState, SystemDefinition


@dataclass(frozen=True)
class HighOrderSpec(ModelSpec):
    """x_i(m+1) = c_i(m) x_i(m-tau) + sum_j a_ij(m) f_j(x_j(m))
    + sum_j sum_l b_ijl(m) g_j(x_j(m - tau_ijl(m))) g_l(x_l(m - xi_ijl(m))) + I_i(m).

    Every g_j must be bounded: |g_j| <= m_j. The bound comes from the activation unless
    ``g_bounds`` overrides it. Indices are zero-based.
    """

    n: int
    tau: int
    leakage: Any
    a: Any = None
    b: Any = None
    delays_tau: Any = None
    delays_xi: Any = None
    f: Any = None
    g: Any = None
    g_bounds: Any = None
    inputs: Any = None
    name: str = "high_order"
    kind: ClassVar[str] = "high_order"

    def __post_init__(self) -> None:
        if self.n < 1:
            raise SpecError(f"High-order model needs N >= 1, got N={self.n}")
        check_tau(self.tau)
        n = self.n
        cube = (n, n, n)
        object.__setattr__(self, "leakage", descriptor_vector("leakage", self.leakage, n))
        object.__setattr__(self, "a", descriptor_table("a", self.a, (n, n)))
        object.__setattr__(self, "b", descriptor_table("b", self.b, cube))
        for key in ("delays_tau", "delays_xi"):
            object.__setattr__(self, key, descriptor_table(key, getattr(self, key), cube))
        object.__setattr__(self, "f", activation_table("f", self.f, (n,)))
        object.__setattr__(self, "g", activation_table("g", self.g, (n,)))
        object.__setattr__(self, "inputs", descriptor_vector("inputs", self.inputs, n))

        if self.g_bounds is None:
            bounds = tuple(act.bound for act in self.g)
        else:
            if len(self.g_bounds) != n:
                raise ShapeError(f"g_bounds needs {n} entries, got {len(self.g_bounds)}")
            bounds = tuple(self.g_bounds)
        for j, bound in enumerate(bounds):
            if bound is None or not bound > 0:
                raise SpecError(
                    f"g_{j + 1} ({self.g[j].name}) needs a positive bound m_j for "
                    "second-order terms"
                )
        object.__setattr__(self, "g_bounds", bounds)

    @property
    def n_channels(self) -> int:
        return self.n

    def coefficient_descriptors(self) -> Iterator[Descriptor]:
        yield from self.leakage
        for table in (self.a, self.b, self.delays_tau, self.delays_xi):
            yield from flatten(table)
        yield from self.inputs

    def delay_descriptors(self) -> Iterator[tuple[str, Descriptor]]:
        for i, j, p in indices(self.n, self.n, self.n):
            label = f"[{i + 1},{j + 1},{p + 1}]"
            yield f"delays_tau{label}", self.delays_tau[i][j][p]
            yield f"delays_xi{label}", self.delays_xi[i][j][p]

    def lower(self, d: Sequence[Scalar] | None = None) -> SystemDefinition:
        return lower_high_order(self, d)

    def _sups(self, sampled: bool) -> tuple[list[Scalar], list[list[Scalar]], list]:
        sup = sup_of_descriptor if sampled else (lambda desc: desc.analytic_sup())
        n = self.n
        c_plus = [sup(c) for c in self.leakage]
        a_plus = [[sup(self.a[i][j]) for j in range(n)] for i in range(n)]
        b_plus = [
            [[sup(self.b[i][j][p]) for p in range(n)] for j in range(n)] for i in range(n)
        ]
        return c_plus, a_plus, b_plus

    def lipschitz_data(
        self, d: Sequence[Scalar] | None = None, *, sampled: bool = False
    ) -> LipschitzData:
        """H_ij = d_i^{-1} a+_ij d_j F_j + sum_l d_i^{-1} b+_ijl (m_j d_l G_l + m_l d_j G_j)."""
        n = self.n
        d = check_witness(d, n) if d is not None else (Fraction(1),) * n
        c_plus, a_plus, b_plus = self._sups(sampled)
        F = [act.lipschitz for act in self.f]
        G = [act.lipschitz for act in self.g]
        m = self.g_bounds
        H = tuple(
            tuple(
                (
                    a_plus[i][j] * d[j] * F[j]
                    + sum(
                        (
                            b_plus[i][j][p] * (m[j] * d[p] * G[p] + m[p] * d[j] * G[j])
                            for p in range(n)
                        ),
                        Fraction(0),
                    )
                )
                * inverse(d[i])
                for j in range(n)
            )
            for i in range(n)
        )
        return LipschitzData(H=H, c_plus=tuple(c_plus))

    def rescaled(self, d: Sequence[Scalar]) -> HighOrderSpec:
        """The model for y_i = d_i^{-1} x_i with f~_j(u) = f_j(d_j u) and g~_j(u) = g_j(d_j u)."""
        d = check_witness(d, self.n)
        n = self.n
        return HighOrderSpec(
            n=n,
            tau=self.tau,
            leakage=self.leakage,
            a={(i, j): ScaledDescriptor(self.a[i][j], inverse(d[i])) for i, j in indices(n, n)},
            b={
                (i, j, p): ScaledDescriptor(self.b[i][j][p], inverse(d[i]))
                for i, j, p in indices(n, n, n)
            },
            delays_tau=self.delays_tau,
            delays_xi=self.delays_xi,
            f=[act.scaled(d[j]) for j, act in enumerate(self.f)],
            g=[act.scaled(d[j]) for j, act in enumerate(self.g)],
            g_bounds=self.g_bounds,
            inputs=[ScaledDescriptor(v, inverse(d[i])) for i, v in enumerate(self.inputs)],
            name=f"{self.name} (rescaled)",
        )


def high_order_condition(spec: HighOrderSpec, d: Sequence[Scalar]) -> tuple[Scalar, ...]:
    """Weighted margins of the high-order model for a positive vector d.

        margin_i = d_i (1 - c_i+)
                   - sum_j (d_j F_j a+_ij + sum_l b+_ijl (m_j d_l G_l + m_l d_j G_j))

    All margins positive means the weighted condition holds for this d.
    """
    n = spec.n
    d = check_witness(d, n)
    c_plus, a_plus, b_plus = spec._sups(sampled=False)
    F = [act.lipschitz for act in spec.f]
    G = [act.lipschitz for act in spec.g]
    m = spec.g_bounds
    margins = []
    for i in range(n):
        load = sum(
            (
                d[j] * F[j] * a_plus[i][j]
                + sum(
                    (b_plus[i][j][p] * (m[j] * d[p] * G[p] + m[p] * d[j] * G[j]) for p in range(n)),
                    Fraction(0),
                )
                for j in range(n)
            ),
            Fraction(0),
        )
        margins.append(d[i] * (1 - c_plus[i]) - load)
    return tuple(margins)


def high_order_comparison_matrix(spec: HighOrderSpec) -> tuple[tuple[Scalar, ...], ...]:
    """Q with (Q d)_i equal to the weighted margin of row i.

    Q = diag(1 - c+) - A with A_ik = F_k a+_ik + G_k sum_l m_l (b+_ilk + b+_ikl).
    """
    n = spec.n
    c_plus, a_plus, b_plus = spec._sups(sampled=False)
    F = [act.lipschitz for act in spec.f]
    G = [act.lipschitz for act in spec.g]
    m = spec.g_bounds
    rows = []
    for i in range(n):
        row = []
        for k in range(n):
            coupling = F[k] * a_plus[i][k] + G[k] * sum(
                (m[p] * (b_plus[i][p][k] + b_plus[i][k][p]) for p in range(n)), Fraction(0)
            )
            row.append((1 - c_plus[i] if i == k else 0) - coupling)
        rows.append(tuple(row))
    return tuple(rows)


def search_high_order_witness(spec: HighOrderSpec) -> MMatrixReport:
    """Look for d > 0 with positive weighted margins through the comparison matrix."""
    return certify_m_matrix(high_order_comparison_matrix(spec))


def lower_high_order(spec: HighOrderSpec, d: Sequence[Scalar] | None = None) -> SystemDefinition:
    """Lower the model, in y = d^{-1} x coordinates when d is given."""
    if d is not None and any(v != 1 for v in check_witness(d, spec.n)):
        spec = spec.rescaled(d)
    n = spec.n
    a, b, f, g = spec.a, spec.b, spec.f, spec.g

    def leakage_coeff(i: int, m: int) -> float:
        return spec.leakage[i](m)

    def nonlinearity(i: int, m: int, state: HistoryState) -> float:
        total = 0.0
        share = spec.inputs[i](m) / n
        for j in range(n):
            hij = a[i][j](m) * f[j](state.at(j, 0))
            for p in range(n):
                lag_j = delay_at(spec.delays_tau[i][j][p], m)
                lag_l = delay_at(spec.delays_xi[i][j][p], m)
                hij += b[i][j][p](m) * g[j](state.at(j, -lag_j)) * g[p](state.at(p, -lag_l))
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
        name=spec.name,
    )
