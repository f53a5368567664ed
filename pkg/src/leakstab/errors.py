"""Exception hierarchy for leakstab."""

from __future__ import annotations


class LeakstabError(Exception):
    """Base error for leakstab."""


class ShapeError(LeakstabError):
    """States, systems or matrices have incompatible dimensions."""


class DomainError(LeakstabError):
    """An argument lies outside the domain of the operation."""


class WindowIndexError(DomainError, IndexError):
    """A step index outside [0, horizon] was requested from a trajectory."""


class DivergenceError(LeakstabError):
    """A simulation produced a non-finite value."""

    def __init__(self, step: int, channel: int | None, value: float) -> None:
        self.step = step
        self.channel = channel
        self.value = value
        where = f"channel {channel + 1}" if channel is not None else "the nonlinearity"
        super().__init__(f"Non-finite value {value!r} in {where} at step {step}")


class ConfigurationError(LeakstabError):
    """The system is not configured for the requested operation."""


class NonConvergenceError(LeakstabError):
    """Poincaré iteration did not reach the requested tolerance."""

    def __init__(self, message: str, residuals: list[float]) -> None:
        self.residuals = residuals
        super().__init__(message)


class HypothesisViolation(LeakstabError):
    """Sampled data violate a hypothesis the computation relies on."""


class CertificateError(LeakstabError):
    """Certificate algebra reached a state its preconditions rule out."""


class SpecError(LeakstabError):
    """A model specification is invalid."""


class UnboundedDescriptorError(SpecError):
    """A supremum was requested for a descriptor without a finite period."""
