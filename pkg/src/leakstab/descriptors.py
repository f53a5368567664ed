"""Coefficient descriptors: time-dependent coefficients with known period and supremum."""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from collections.abc import Callable, Iterable
from dataclasses import dataclass
from fractions import Fraction
from typing import Any

from leakstab.errors import SpecError, UnboundedDescriptorError
from leakstab.linalg import Scalar, format_scalar, is_exact_scalar


def _scalar(value: Scalar) -> Scalar:
    """Keep ints and Fractions exact, everything else becomes float."""
    if is_exact_scalar(value):
        return Fraction(value)
    return float(value)


class Descriptor(ABC):
    """A coefficient m -> value on the nonnegative integers."""

    kind: str = ""

    @property
    @abstractmethod
    def period(self) -> int | None:
        """Smallest known period, or None when the descriptor is not periodic."""

    @abstractmethod
    def __call__(self, m: int) -> float: ...

    @abstractmethod
    def analytic_sup(self) -> Scalar:
        """A closed-form bound on sup_m |value|, exact when the parameters are."""

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind}

    @property
    def is_constant(self) -> bool:
        return self.period == 1

    @property
    def is_zero(self) -> bool:
        return self.period == 1 and self.analytic_sup() == 0


@dataclass(frozen=True)
class ConstDescriptor(Descriptor):
    value: Scalar
    kind = "const"

    def __post_init__(self) -> None:
        object.__setattr__(self, "value", _scalar(self.value))

    @property
    def period(self) -> int:
        return 1

    def __call__(self, m: int) -> float:
        return float(self.value)

    def analytic_sup(self) -> Scalar:
        return abs(self.value)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "value": format_scalar(self.value)}


@dataclass(frozen=True)
class TableDescriptor(Descriptor):
    """values[m mod len(values)]."""

    values: tuple[Scalar, ...]
    kind = "table"

    def __post_init__(self) -> None:
        if not self.values:
            raise SpecError("A table descriptor needs at least one value")
        object.__setattr__(self, "values", tuple(_scalar(v) for v in self.values))
        object.__setattr__(self, "_floats", tuple(float(v) for v in self.values))

    @property
    def period(self) -> int:
        return len(self.values)

    def __call__(self, m: int) -> float:
        return self._floats[m % len(self._floats)]

    def analytic_sup(self) -> Scalar:
        return max(abs(v) for v in self.values)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "values": [format_scalar(v) for v in self.values]}


@dataclass(frozen=True)
class TrigDescriptor(Descriptor):
    """amplitude * cos(2 pi m / omega) or amplitude * sin(2 pi m / omega).

    Evaluated at m mod omega so that values repeat bitwise with period omega.
    """

    function: str
    amplitude: Scalar
    omega: int
    kind = "trig"

    def __post_init__(self) -> None:
        if self.function not in ("cos", "sin"):
            raise SpecError(f"Trigonometric descriptor must be cos or sin, got {self.function!r}")
        if self.omega < 1:
            raise SpecError(f"Trigonometric period must be >= 1, got {self.omega}")
        object.__setattr__(self, "amplitude", _scalar(self.amplitude))

    @property
    def period(self) -> int:
        return 1 if self.amplitude == 0 else self.omega

    def __call__(self, m: int) -> float:
        phase = 2.0 * math.pi * (m % self.omega) / self.omega
        wave = math.cos(phase) if self.function == "cos" else math.sin(phase)
        return float(self.amplitude) * wave

    def analytic_sup(self) -> Scalar:
        return abs(self.amplitude)

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.function,
            "amplitude": format_scalar(self.amplitude),
            "period": self.omega,
        }


@dataclass(frozen=True)
class AltDescriptor(Descriptor):
    """base + amplitude * (-1)^m."""

    base: Scalar
    amplitude: Scalar
    kind = "alt"

    def __post_init__(self) -> None:
        object.__setattr__(self, "base", _scalar(self.base))
        object.__setattr__(self, "amplitude", _scalar(self.amplitude))

    @property
    def period(self) -> int:
        return 1 if self.amplitude == 0 else 2

    def __call__(self, m: int) -> float:
        value = self.base + self.amplitude if m % 2 == 0 else self.base - self.amplitude
        return float(value)

    def analytic_sup(self) -> Scalar:
        return max(abs(self.base + self.amplitude), abs(self.base - self.amplitude))

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "base": format_scalar(self.base),
            "amplitude": format_scalar(self.amplitude),
        }


@dataclass(frozen=True)
class ScaledDescriptor(Descriptor):
    """factor * inner(m); used by changes of variables."""

    inner: Descriptor
    factor: Scalar
    kind = "scaled"

    def __post_init__(self) -> None:
        object.__setattr__(self, "factor", _scalar(self.factor))

    @property
    def period(self) -> int | None:
        return self.inner.period

    def __call__(self, m: int) -> float:
        return float(self.factor) * self.inner(m)

    def analytic_sup(self) -> Scalar:
        return abs(self.factor) * self.inner.analytic_sup()

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "factor": format_scalar(self.factor),
            "inner": self.inner.to_dict(),
        }


@dataclass(frozen=True)
class FunctionDescriptor(Descriptor):
    """An arbitrary Python callable. Simulation only; it has no certified supremum."""

    fn: Callable[[int], float]
    name: str = "function"
    declared_period: int | None = None
    kind = "function"

    @property
    def period(self) -> int | None:
        return self.declared_period

    def __call__(self, m: int) -> float:
        return float(self.fn(m))

    def analytic_sup(self) -> Scalar:
        raise UnboundedDescriptorError(
            f"Descriptor {self.name!r} has no closed-form bound; give it as a constant, "
            "a periodic table or a trigonometric term to certify"
        )

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "name": self.name}


ZERO = ConstDescriptor(0)


def as_descriptor(value: Descriptor | Scalar | Callable[[int], float]) -> Descriptor:
    """Numbers become constants; callables become function descriptors."""
    if isinstance(value, Descriptor):
        return value
    if callable(value):
        return FunctionDescriptor(value, getattr(value, "__name__", "function"))
    return ConstDescriptor(value)


def sup_of_descriptor(desc: Descriptor) -> float:
    """max |desc(m)| over one period, by enumeration of m = 0..period-1."""
    period = desc.period
    if period is None:
        raise UnboundedDescriptorError(
            f"Cannot bound a {desc.kind} descriptor without a period or table"
        )
    return max(abs(desc(m)) for m in range(period))


def combined_period(descriptors: Iterable[Descriptor]) -> int | None:
    """lcm of all periods; None as soon as one descriptor is aperiodic."""
    period = 1
    for desc in descriptors:
        if desc.period is None:
            return None
        period = math.lcm(period, desc.period)
    return period


def delay_bound(desc: Descriptor, label: str = "delay") -> int:
    """max over one period of an integer-valued, nonnegative delay descriptor."""
    if desc.period is None:
        raise SpecError(f"{label} must be periodic to bound the history window")
    values = [desc(m) for m in range(desc.period)]
    for m, v in enumerate(values):
        if v < 0 or v != int(v):
            raise SpecError(f"{label} takes value {v!r} at m={m}; delays are nonnegative integers")
    return int(max(values))


def delay_at(desc: Descriptor, m: int) -> int:
    return int(desc(m))
