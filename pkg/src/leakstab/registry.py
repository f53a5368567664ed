"""Activation registry -- maps activation names to functions and their constants."""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np
from scipy.special import expit

from leakstab.errors import SpecError
from leakstab.linalg import Scalar, format_scalar, is_exact_scalar


@dataclass(frozen=True)
class Activation:
    """A Lipschitz activation u -> f(u).

    ``lipschitz`` is the constant F with |f(u) - f(v)| <= F |u - v|; ``bound`` is
    sup |f| when f is bounded (required for second-order terms).
    """

    name: str
    fn: Callable[[float], float] = field(compare=False)
    lipschitz: Scalar
    bound: Scalar | None = None
    scale: Scalar = Fraction(1)
    params: dict[str, Any] = field(default_factory=dict, compare=False)
    vector_fn: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    def __call__(self, u: float) -> float:
        if self.scale == 1:
            return float(self.fn(u))
        return float(self.fn(float(self.scale) * u))

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Elementwise f over an array; falls back to a per-element loop without vector_fn."""
        u = np.asarray(values, dtype=float)
        if self.scale != 1:
            u = float(self.scale) * u
        if self.vector_fn is None:
            return np.vectorize(self.fn, otypes=[float])(u)
        return np.asarray(self.vector_fn(u), dtype=float)

    def scaled(self, factor: Scalar) -> Activation:
        """u -> f(factor * u), with Lipschitz constant factor * F and the same bound."""
        if not factor > 0:
            raise SpecError(f"Activation scale must be positive, got {factor}")
        return Activation(
            name=self.name,
            fn=self.fn,
            lipschitz=self.lipschitz * factor,
            bound=self.bound,
            scale=self.scale * factor,
            params=self.params,
            vector_fn=self.vector_fn,
        )

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "name": self.name,
            "lipschitz": format_scalar(self.lipschitz),
            "bound": None if self.bound is None else format_scalar(self.bound),
        }
        if self.scale != 1:
            data["scale"] = format_scalar(self.scale)
        if "points" in self.params:
            data["points"] = self.params["points"]
        return data


ActivationFactory = Callable[..., Activation]


def _satlin(u: float) -> float:
    return min(1.0, max(-1.0, u))


def _logistic(u: float) -> float:
    return 1.0 / (1.0 + math.exp(-u)) if u >= 0 else math.exp(u) / (1.0 + math.exp(u))


def _library(
    name: str,
    fn: Callable[[float], float],
    lipschitz: Scalar,
    bound: Scalar | None,
    vector_fn: Callable[[np.ndarray], np.ndarray] | None = None,
) -> ActivationFactory:
    def factory(lipschitz_override: Scalar | None = None) -> Activation:
        constant = lipschitz
        if lipschitz_override is not None:
            if lipschitz_override < lipschitz:
                raise SpecError(
                    f"Lipschitz constant {lipschitz_override} is below the true constant "
                    f"{lipschitz} of {name}"
                )
            constant = lipschitz_override
        return Activation(
            name=name, fn=fn, lipschitz=constant, bound=bound, vector_fn=vector_fn
        )

    return factory


def table_activation(
    points: Sequence[Sequence[float]], lipschitz_override: Scalar | None = None
) -> Activation:
    """Piecewise-linear interpolation through (u, f(u)) points, constant outside them."""
    if lipschitz_override is None:
        raise SpecError("A table activation needs an explicit Lipschitz constant")
    pts = sorted((float(u), float(v)) for u, v in points)
    if len(pts) < 2:
        raise SpecError("A table activation needs at least two points")
    xs = np.array([u for u, _ in pts])
    ys = np.array([v for _, v in pts])
    if np.any(np.diff(xs) <= 0):
        raise SpecError("Table activation abscissae must be distinct")
    slopes = np.abs(np.diff(ys) / np.diff(xs))
    if float(slopes.max()) > float(lipschitz_override) * (1 + 1e-12):
        raise SpecError(
            f"Table activation has slope {slopes.max():.6g} above its Lipschitz constant "
            f"{lipschitz_override}"
        )

    def fn(u: float) -> float:
        return float(np.interp(u, xs, ys))

    return Activation(
        name="table",
        fn=fn,
        lipschitz=lipschitz_override,
        bound=float(np.abs(ys).max()),
        params={"points": [list(p) for p in pts]},
        vector_fn=lambda u: np.interp(u, xs, ys),
    )


class ActivationRegistry:
    """Central registry mapping activation names to factories."""

    def __init__(self, factories: dict[str, ActivationFactory]) -> None:
        self._factories = factories

    def names(self) -> list[str]:
        return sorted(self._factories)

    def create(self, name: str, **params: Any) -> Activation:
        """Build an activation by name; unknown names raise SpecError."""
        factory = self._factories.get(name)
        if factory is None:
            raise SpecError(f"Unknown activation {name!r}; known: {', '.join(self.names())}")
        return factory(**params)

    def register(self, name: str, factory: ActivationFactory) -> None:
        if name in self._factories:
            raise SpecError(f"Duplicate activation name {name!r}")
        self._factories[name] = factory


def build_registry() -> ActivationRegistry:
    """The default activation library."""
    one = Fraction(1)
    return ActivationRegistry(
        {
            "tanh": _library("tanh", math.tanh, one, one, np.tanh),
            "arctan": _library("arctan", math.atan, one, math.pi / 2, np.arctan),
            "satlin": _library("satlin", _satlin, one, one, lambda u: np.clip(u, -1.0, 1.0)),
            "logistic": _library("logistic", _logistic, Fraction(1, 4), one, expit),
            "identity": _library("identity", float, one, None, np.asarray),
            "table": table_activation,
        }
    )


DEFAULT_REGISTRY = build_registry()


def activation(name: str, **params: Any) -> Activation:
    """Shortcut for DEFAULT_REGISTRY.create."""
    return DEFAULT_REGISTRY.create(name, **params)


def is_exact_activation(act: Activation) -> bool:
    return is_exact_scalar(act.lipschitz) and (act.bound is None or is_exact_scalar(act.bound))
