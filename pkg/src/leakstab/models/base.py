"""ModelSpec abstract base class and shared helpers for the model families."""

from __future__ import annotations

import itertools
from abc import ABC, abstractmethod
from collections.abc import Iterable, Iterator, Mapping, Sequence
from typing import Any, ClassVar

from leakstab.certificates import LipschitzData, comparison_matrix
from leakstab.descriptors import ZERO, Descriptor, as_descriptor, combined_period, delay_bound
from leakstab.errors import DomainError, ShapeError
from leakstab.linalg import Scalar
from leakstab.state import SystemDefinition

Index = tuple[int, ...]


class ModelSpec(ABC):
    """Interface for declarative network models that lower to a SystemDefinition."""

    kind: ClassVar[str] = ""
    tau: int

    @property
    @abstractmethod
    def n_channels(self) -> int:
        """Number of channels of the lowered system."""

    @abstractmethod
    def coefficient_descriptors(self) -> Iterator[Descriptor]:
        """Every time-dependent coefficient, delays included."""

    @abstractmethod
    def delay_descriptors(self) -> Iterator[tuple[str, Descriptor]]:
        """(label, descriptor) for every transmission delay."""

    @abstractmethod
    def lower(self) -> SystemDefinition:
        """The general system this model is a particular case of."""

    @abstractmethod
    def lipschitz_data(self) -> LipschitzData:
        """Constant bounds H_ij and c_i+ for the lowered system."""

    @property
    def period(self) -> int | None:
        return combined_period(self.coefficient_descriptors())

    @property
    def is_autonomous(self) -> bool:
        """True when every coefficient and delay is constant in time."""
        return self.period == 1

    @property
    def window_start(self) -> int:
        """r = -max(all delays, tau)."""
        depth = max(
            (delay_bound(desc, label) for label, desc in self.delay_descriptors()), default=0
        )
        return -max(depth, self.tau)

    def comparison_matrix(self) -> tuple[tuple[Scalar, ...], ...]:
        return comparison_matrix(self.lipschitz_data())

    def describe(self) -> dict[str, Any]:
        return {
            "model": self.kind,
            "n_channels": self.n_channels,
            "tau": self.tau,
            "window_start": self.window_start,
            "period": self.period,
        }


def check_tau(tau: int) -> None:
    if tau < 0:
        raise DomainError(f"Leakage delay tau must be >= 0, got {tau}")


def descriptor_vector(
    name: str, values: Sequence[Any] | None, length: int, default: Descriptor = ZERO
) -> tuple[Descriptor, ...]:
    if values is None:
        return (default,) * length
    if len(values) != length:
        raise ShapeError(f"{name} needs {length} entries, got {len(values)}")
    return tuple(as_descriptor(v) for v in values)


def descriptor_table(
    name: str,
    entries: Mapping[Index, Any] | Sequence[Any] | None,
    shape: Sequence[int],
    default: Descriptor = ZERO,
) -> tuple:
    """Nested tuples of descriptors of the given shape.

    ``entries`` is either nested sequences of the full shape or a sparse mapping from
    zero-based index tuples to values; missing entries take ``default``.
    """
    if entries is None or isinstance(entries, Mapping):
        sparse = dict(entries or {})
        for idx in sparse:
            if len(idx) != len(shape) or any(
                not 0 <= k < n for k, n in zip(idx, shape, strict=True)
            ):
                raise ShapeError(f"{name} index {idx} outside shape {tuple(shape)}")
        return _build(shape, (), lambda idx: as_descriptor(sparse.get(idx, default)))
    return _nested(name, entries, shape, ())


def _build(shape: Sequence[int], prefix: Index, leaf: Any) -> tuple:
    if len(shape) == 1:
        return tuple(leaf((*prefix, k)) for k in range(shape[0]))
    return tuple(_build(shape[1:], (*prefix, k), leaf) for k in range(shape[0]))


def _nested(name: str, values: Sequence[Any], shape: Sequence[int], prefix: Index) -> tuple:
    if len(values) != shape[0]:
        raise ShapeError(f"{name}{list(prefix)} needs {shape[0]} entries, got {len(values)}")
    if len(shape) == 1:
        return tuple(as_descriptor(v) for v in values)
    return tuple(_nested(name, v, shape[1:], (*prefix, k)) for k, v in enumerate(values))


def flatten(table: Any) -> Iterator[Any]:
    """Leaves of nested tuples."""
    if isinstance(table, tuple):
        for item in table:
            yield from flatten(item)
    else:
        yield table


def indices(*shape: int) -> Iterable[Index]:
    return itertools.product(*(range(n) for n in shape))
