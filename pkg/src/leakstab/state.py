"""History-window state space X^N, its sup norm, and trajectory storage."""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from leakstab.errors import DomainError, HypothesisViolation, ShapeError, WindowIndexError

LeakageFn = Callable[[int, int], float]
NonlinearityFn = Callable[[int, int, "HistoryState"], float]
BatchNonlinearityFn = Callable[[int, "HistoryState"], np.ndarray]


def depth_to_window_start(depth: int) -> int:
    """Convert a user-facing history depth d >= 0 into the window start r = -d."""
    if depth < 0:
        raise DomainError(f"History depth must be nonnegative, got {depth}")
    return -depth


@dataclass(frozen=True, eq=False)
class HistoryState:
    """An element of X^N: N channels of reals on the integer window [r, 0].

    ``values[i, k]`` holds alpha_i(r + k), so column 0 is the oldest sample and the last
    column is alpha_i(0).
    """

    window_start: int
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.window_start > 0:
            raise DomainError(f"Window start r must be <= 0, got {self.window_start}")
        values = np.array(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] < 1:
            raise ShapeError(f"State values must be a non-empty N x (|r|+1) grid: {values.shape}")
        if values.shape[1] != 1 - self.window_start:
            raise ShapeError(
                f"Window [{self.window_start}, 0] needs {1 - self.window_start} samples "
                f"per channel, got {values.shape[1]}"
            )
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def n_channels(self) -> int:
        return self.values.shape[0]

    @property
    def offsets(self) -> range:
        """The window offsets j = r, ..., 0."""
        return range(self.window_start, 1)

    def at(self, channel: int, offset: int) -> float:
        """alpha_channel(offset) for offset in [r, 0]."""
        if not self.window_start <= offset <= 0:
            raise WindowIndexError(f"Offset {offset} outside [{self.window_start}, 0]")
        return float(self.values[channel, offset - self.window_start])

    def current(self) -> np.ndarray:
        """The vector alpha(0)."""
        return self.values[:, -1]

    def __sub__(self, other: HistoryState) -> HistoryState:
        _check_same_shape(self, other)
        return HistoryState(self.window_start, self.values - other.values)

    @classmethod
    def zeros(cls, n_channels: int, window_start: int) -> HistoryState:
        return cls(window_start, np.zeros((n_channels, 1 - window_start)))

    @classmethod
    def constant(cls, n_channels: int, window_start: int, value: float) -> HistoryState:
        return cls(window_start, np.full((n_channels, 1 - window_start), float(value)))

    @classmethod
    def from_function(
        cls, n_channels: int, window_start: int, fn: Callable[[int, int], float]
    ) -> HistoryState:
        """Sample fn(i, j) for channels i = 0..N-1 (zero-based) and offsets j = r..0."""
        values = [[fn(i, j) for j in range(window_start, 1)] for i in range(n_channels)]
        return cls(window_start, np.asarray(values, dtype=float))


def _check_same_shape(a: HistoryState, b: HistoryState) -> None:
    if a.n_channels != b.n_channels or a.window_start != b.window_start:
        raise ShapeError(
            f"States differ in shape: (N={a.n_channels}, r={a.window_start}) vs "
            f"(N={b.n_channels}, r={b.window_start})"
        )


def sup_norm(state: HistoryState) -> float:
    """max over channels i and offsets j of |alpha_i(j)|."""
    return float(np.max(np.abs(state.values)))


def state_distance(a: HistoryState, b: HistoryState) -> float:
    """sup_norm(a - b)."""
    _check_same_shape(a, b)
    return float(np.max(np.abs(a.values - b.values)))


@dataclass(frozen=True)
class SystemDefinition:
    """x_i(m+1) = c_i(m) x_i(m - tau) + h_i(m, x_m) for i = 1..N.

    Channels are zero-based in code. ``batch_nonlinearity`` is an optional fast path
    returning the whole vector (h_1, ..., h_N)(m, state); when present it must agree with
    ``nonlinearity`` and the engine uses it exclusively.
    """

    n_channels: int
    leakage_delay: int
    window_start: int
    leakage_coeff: LeakageFn
    nonlinearity: NonlinearityFn
    period: int | None = None
    batch_nonlinearity: BatchNonlinearityFn | None = None
    name: str = ""

    def __post_init__(self) -> None:
        if self.n_channels < 1:
            raise DomainError(f"System needs at least one channel, got {self.n_channels}")
        if self.leakage_delay < 0:
            raise DomainError(f"Leakage delay must be >= 0, got {self.leakage_delay}")
        if self.window_start > -self.leakage_delay:
            raise DomainError(
                f"Window start r={self.window_start} must satisfy r <= -tau = "
                f"{-self.leakage_delay}"
            )
        if self.period is not None and self.period < 1:
            raise DomainError(f"Period must be a positive integer, got {self.period}")

    def leakage(self, m: int) -> np.ndarray:
        """The vector (c_1(m), ..., c_N(m)); every entry must lie in (-1, 1)."""
        c = np.array([self.leakage_coeff(i, m) for i in range(self.n_channels)], dtype=float)
        bad = np.flatnonzero(~(np.abs(c) < 1.0))
        if bad.size:
            i = int(bad[0])
            raise HypothesisViolation(
                f"Leakage coefficient c_{i + 1}({m}) = {c[i]!r} is outside (-1, 1)"
            )
        return c

    def h(self, m: int, state: HistoryState) -> np.ndarray:
        """The vector (h_1, ..., h_N)(m, state)."""
        if self.batch_nonlinearity is not None:
            return np.asarray(self.batch_nonlinearity(m, state), dtype=float)
        return np.array(
            [self.nonlinearity(i, m, state) for i in range(self.n_channels)], dtype=float
        )

    def check_state(self, state: HistoryState) -> None:
        """Raise unless the state can seed this system."""
        if state.n_channels != self.n_channels or state.window_start != self.window_start:
            raise ShapeError(
                f"State (N={state.n_channels}, r={state.window_start}) does not match "
                f"system (N={self.n_channels}, r={self.window_start})"
            )


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Dense record of x(m) for m in [r, horizon].

    ``samples[i, k]`` holds x_i(r + k). The array is frozen once the simulation returns.
    """

    system: SystemDefinition
    samples: np.ndarray

    def __post_init__(self) -> None:
        if self.samples.ndim != 2 or self.samples.shape[0] != self.system.n_channels:
            raise ShapeError(f"Samples of shape {self.samples.shape} do not match the system")
        if self.samples.shape[1] < 1 - self.system.window_start:
            raise ShapeError("Samples must cover at least the initial window")
        self.samples.flags.writeable = False

    @property
    def window_start(self) -> int:
        return self.system.window_start

    @property
    def horizon(self) -> int:
        return self.samples.shape[1] - 1 + self.window_start

    @property
    def times(self) -> np.ndarray:
        """The time indices r, ..., horizon matching the sample columns."""
        return np.arange(self.window_start, self.horizon + 1)

    def x(self, m: int) -> np.ndarray:
        """The vector x(m) for m in [r, horizon]."""
        if not self.window_start <= m <= self.horizon:
            raise WindowIndexError(f"Time {m} outside [{self.window_start}, {self.horizon}]")
        return self.samples[:, m - self.window_start]

    def window(self, m: int) -> HistoryState:
        """x_m, the history state with x_m(j) = x(m + j) for j in [r, 0]."""
        if not 0 <= m <= self.horizon:
            raise WindowIndexError(f"Step {m} outside [0, {self.horizon}]")
        # column of time m + r is m, column of time m is m - r
        return HistoryState(self.window_start, self.samples[:, m : m - self.window_start + 1])


def window(traj: Trajectory, m: int) -> HistoryState:
    """x_m of a trajectory, for 0 <= m <= horizon."""
    return traj.window(m)
