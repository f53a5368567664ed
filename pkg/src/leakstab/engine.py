"""Simulation engine: recurrence stepping, Poincaré map, periodic orbits, bound oracles."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from leakstab.errors import (
    ConfigurationError,
    DivergenceError,
    DomainError,
    NonConvergenceError,
    ShapeError,
)
from leakstab.state import HistoryState, SystemDefinition, Trajectory, state_distance, sup_norm

logger = logging.getLogger("leakstab.engine")

DEFAULT_TOLERANCE = 1e-10
DEFAULT_MAX_ITERS = 500
# relative-absolute slack for bound checks: eps = BOUND_SLACK * (1 + |bound|)
BOUND_SLACK = 1e-9
# residuals below this multiple of eps * max(1, |state|) are round-off
_FLOOR_ULPS = 64.0


def simulate(system: SystemDefinition, initial: HistoryState, steps: int) -> Trajectory:
    """Iterate x_i(m+1) = c_i(m) x_i(m - tau) + h_i(m, x_m) for m = 0..steps-1."""
    system.check_state(initial)
    if steps < 0:
        raise DomainError(f"Number of steps must be >= 0, got {steps}")

    r = system.window_start
    tau = system.leakage_delay
    width = 1 - r
    samples = np.empty((system.n_channels, width + steps))
    samples[:, :width] = initial.values

    for m in range(steps):
        k = m - r  # column holding time m
        state = HistoryState(r, samples[:, m : k + 1])
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                nxt = system.leakage(m) * samples[:, k - tau] + system.h(m, state)
        except OverflowError:
            raise DivergenceError(m + 1, None, math.inf) from None
        finite = np.isfinite(nxt)
        if not finite.all():
            i = int(np.flatnonzero(~finite)[0])
            raise DivergenceError(m + 1, i, float(nxt[i]))
        samples[:, k + 1] = nxt

    return Trajectory(system, samples)


def _require_period(system: SystemDefinition) -> int:
    if system.period is None:
        raise ConfigurationError(
            f"System {system.name or '<unnamed>'} has no period; the Poincaré map is undefined"
        )
    return system.period


def poincare_map(system: SystemDefinition, state: HistoryState) -> HistoryState:
    """P(alpha) = x_omega(., alpha)."""
    omega = _require_period(system)
    return simulate(system, state, omega).window(omega)


def partition_index(m: int, tau: int) -> tuple[int, int]:
    """The unique (s, n) with s in {0..tau}, n >= 1 and m = n(tau+1) - s."""
    if m <= 0:
        raise DomainError(f"Partition index needs m >= 1, got {m}")
    if tau < 0:
        raise DomainError(f"tau must be >= 0, got {tau}")
    n = -(-m // (tau + 1))
    return n * (tau + 1) - m, n


def window_distances(a: Trajectory, b: Trajectory) -> np.ndarray:
    """||x_m - y_m|| for m = 0..min(horizons)."""
    if a.samples.shape[0] != b.samples.shape[0] or a.window_start != b.window_start:
        raise ShapeError("Trajectories differ in channel count or window")
    cols = min(a.samples.shape[1], b.samples.shape[1])
    pointwise = np.max(np.abs(a.samples[:, :cols] - b.samples[:, :cols]), axis=0)
    return sliding_window_view(pointwise, 1 - a.window_start).max(axis=1)


def contraction_power(C: float, zeta: float, omega: int) -> int:
    """Smallest p >= 1 with C * zeta^(p*omega) < 1."""
    if C <= 1.0:
        return 1
    return max(1, math.floor(math.log(C) / (-omega * math.log(zeta))) + 1)


def _roundoff_floor(state: HistoryState) -> float:
    return _FLOOR_ULPS * np.finfo(float).eps * max(1.0, sup_norm(state))


# ---------------------------------------------------------------------------
# Periodic orbits
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PeriodicOrbitResult:
    """Fixed point of the Poincaré map and the orbit it starts."""

    fixed_point: HistoryState
    orbit: Trajectory
    iterations: int
    residual: float
    contraction_estimate: float
    residuals: list[float] = field(default_factory=list)
    residual_floor: float = 0.0
    floor_reached: bool = False
    contraction_power: int | None = None

    @property
    def period(self) -> int:
        return self.orbit.horizon


def _probe_contraction(
    system: SystemDefinition, center: HistoryState, probes: int, seed: int
) -> float:
    """Largest measured ||P(a) - P(b)|| / ||a - b|| over random probe pairs near center."""
    rng = np.random.default_rng(seed)
    scale = max(1.0, sup_norm(center))
    shape = center.values.shape
    ratio = 0.0
    for _ in range(probes):
        a = HistoryState(center.window_start, center.values + scale * rng.uniform(-1, 1, shape))
        b = HistoryState(center.window_start, center.values + scale * rng.uniform(-1, 1, shape))
        gap = state_distance(a, b)
        if gap > 0.0:
            image_gap = state_distance(poincare_map(system, a), poincare_map(system, b))
            ratio = max(ratio, image_gap / gap)
    return ratio


def find_periodic_orbit(
    system: SystemDefinition,
    seed: HistoryState | None = None,
    tol: float = DEFAULT_TOLERANCE,
    max_iters: int = DEFAULT_MAX_ITERS,
    *,
    envelope: tuple[float, float] | None = None,
    probe_pairs: int = 4,
    probe_seed: int = 0,
) -> PeriodicOrbitResult:
    """Iterate alpha <- P(alpha) until ||P(alpha) - alpha|| <= tol.

    The returned fixed point is the last iterate alpha whose image met the tolerance, so
    the orbit endpoint differs from it by exactly ``residual``. When the residual stalls at
    the round-off floor above ``tol`` the floor is accepted and reported. ``envelope`` is an
    optional certified (C, zeta) pair used to report the contraction power p.
    """
    omega = _require_period(system)
    if tol <= 0:
        raise DomainError(f"Tolerance must be positive, got {tol}")
    state = seed if seed is not None else HistoryState.zeros(system.n_channels, system.window_start)
    system.check_state(state)

    residuals: list[float] = []
    floor = _roundoff_floor(state)
    floor_reached = False
    for iteration in range(1, max_iters + 1):
        image = poincare_map(system, state)
        residual = state_distance(image, state)
        residuals.append(residual)
        floor = _roundoff_floor(image)
        logger.debug("Poincaré iteration %d: residual %.3e", iteration, residual)
        if residual <= tol:
            break
        if residual <= floor and len(residuals) > 1 and residual >= residuals[-2]:
            floor_reached = True
            logger.warning(
                "Residual stalled at round-off floor %.3e above tolerance %.3e", residual, tol
            )
            break
        state = image
    else:
        raise NonConvergenceError(
            f"No fixed point within {max_iters} Poincaré iterations "
            f"(last residual {residuals[-1]:.3e}); the stability hypotheses may not hold",
            residuals,
        )

    accepted = max(tol, floor) if floor_reached else tol
    two_periods = simulate(system, state, 2 * omega)
    drift = state_distance(two_periods.window(2 * omega), state)
    if drift > 10 * accepted:
        raise NonConvergenceError(
            f"Orbit is not {omega}-periodic: drift {drift:.3e} after two periods exceeds "
            f"{10 * accepted:.3e}",
            residuals,
        )

    orbit = simulate(system, state, omega)
    power = contraction_power(*envelope, omega) if envelope is not None else None
    logger.info(
        "Periodic orbit found after %d iterations (residual %.3e)", len(residuals), residuals[-1]
    )
    return PeriodicOrbitResult(
        fixed_point=state,
        orbit=orbit,
        iterations=len(residuals),
        residual=residuals[-1],
        contraction_estimate=_probe_contraction(system, state, probe_pairs, probe_seed),
        residuals=residuals,
        residual_floor=floor,
        floor_reached=floor_reached,
        contraction_power=power,
    )


def find_equilibrium(
    system: SystemDefinition,
    tol: float = DEFAULT_TOLERANCE,
    max_iters: int = 10_000,
) -> np.ndarray:
    """Equilibrium of an autonomous system, found as a 1-periodic orbit.

    The caller asserts the system is autonomous; any declared period is replaced by 1.
    """
    result = find_periodic_orbit(replace(system, period=1), tol=tol, max_iters=max_iters)
    return result.fixed_point.current().copy()


# ---------------------------------------------------------------------------
# Bound oracles
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BoundCheckReport:
    """Outcome of comparing observed distances against a bound.

    ``max_violation`` is the most negative slack (bound minus observed) over all pairs and
    steps; a nonnegative value means every comparison held. The series belong to the
    worst pair.
    """

    pairs_tested: int
    max_violation: float
    passed: bool
    steps: np.ndarray
    slack: np.ndarray
    bound: np.ndarray
    observed: np.ndarray
    worst_pair: int = 0


def _slack_passes(slack: np.ndarray, bound: np.ndarray) -> bool:
    return bool(np.all(slack >= -BOUND_SLACK * (1.0 + np.abs(bound))))


def check_exponential_bound(
    system: SystemDefinition,
    alpha: HistoryState,
    beta: HistoryState,
    C: float,
    zeta: float,
    steps: int,
) -> BoundCheckReport:
    """Check ||x_m(alpha) - x_m(beta)|| <= C zeta^m ||alpha - beta|| for m = 0..steps."""
    if C <= 0:
        raise DomainError(f"C must be positive, got {C}")
    if not 0 < zeta < 1:
        raise DomainError(f"zeta must lie in (0, 1), got {zeta}")
    observed = window_distances(simulate(system, alpha, steps), simulate(system, beta, steps))
    m = np.arange(steps + 1)
    bound = C * np.power(zeta, m) * state_distance(alpha, beta)
    slack = bound - observed
    return BoundCheckReport(
        pairs_tested=1,
        max_violation=float(slack.min()),
        passed=_slack_passes(slack, bound),
        steps=m,
        slack=slack,
        bound=bound,
        observed=observed,
    )


def merge_reports(reports: Sequence[BoundCheckReport]) -> BoundCheckReport:
    """Combine per-pair reports; the worst pair is the first with the lowest slack."""
    if not reports:
        raise DomainError("Cannot merge an empty list of reports")
    worst = min(range(len(reports)), key=lambda k: reports[k].max_violation)
    chosen = reports[worst]
    return BoundCheckReport(
        pairs_tested=sum(rep.pairs_tested for rep in reports),
        max_violation=chosen.max_violation,
        passed=all(rep.passed for rep in reports),
        steps=chosen.steps,
        slack=chosen.slack,
        bound=chosen.bound,
        observed=chosen.observed,
        worst_pair=worst,
    )


def check_exponential_bound_batch(
    system: SystemDefinition,
    pairs: Sequence[tuple[HistoryState, HistoryState]],
    C: float,
    zeta: float,
    steps: int,
    workers: int = 1,
) -> tuple[BoundCheckReport, list[BoundCheckReport]]:
    """Run check_exponential_bound over many pairs; results keep the pair order."""

    def _one(pair: tuple[HistoryState, HistoryState]) -> BoundCheckReport:
        return check_exponential_bound(system, pair[0], pair[1], C, zeta, steps)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_one, pairs))
    else:
        reports = [_one(pair) for pair in pairs]
    for k, rep in enumerate(reports):
        logger.debug("Pair %d: min slack %.3e", k, rep.max_violation)
    return merge_reports(reports), reports


def check_lemma_inequality(
    system: SystemDefinition,
    alpha: HistoryState,
    beta: HistoryState,
    lipschitz_bound: Callable[[int, int], float],
    n_max: int,
) -> BoundCheckReport:
    """Evaluate both sides of the per-channel difference estimate along two solutions.

    For every channel i, residue s in {0..tau} and n in {1..n_max}, with t_l = l(tau+1)+tau-s:

        |x_i(n(tau+1)-s) - y_i(n(tau+1)-s)|
            <= prod_{k<n} |c_i(t_k)| ||alpha - beta||
               + sum_{l<n} prod_{l<k<n} |c_i(t_k)| H_i(t_l) ||x_{t_l} - y_{t_l}||

    The right side obeys R_n = |c_i(t_{n-1})| R_{n-1} + H_i(t_{n-1}) D(t_{n-1}) with
    R_0 = ||alpha - beta||. Slack series are indexed by m = n(tau+1) - s, minimized over i.
    """
    if n_max < 1:
        raise DomainError(f"n_max must be >= 1, got {n_max}")
    tau = system.leakage_delay
    horizon = n_max * (tau + 1)
    xa = simulate(system, alpha, horizon)
    xb = simulate(system, beta, horizon)
    dist = window_distances(xa, xb)
    gap0 = state_distance(alpha, beta)
    leak = np.abs(np.array([system.leakage(t) for t in range(horizon)]))

    slack = np.full(horizon + 1, np.inf)
    rhs_at = np.zeros(horizon + 1)
    lhs_at = np.zeros(horizon + 1)
    for i in range(system.n_channels):
        for s in range(tau + 1):
            rhs = gap0
            for n in range(1, n_max + 1):
                t = (n - 1) * (tau + 1) + tau - s
                rhs = leak[t, i] * rhs + lipschitz_bound(i, t) * dist[t]
                m = n * (tau + 1) - s
                lhs = abs(xa.x(m)[i] - xb.x(m)[i])
                if rhs - lhs < slack[m]:
                    slack[m] = rhs - lhs
                    rhs_at[m] = rhs
                    lhs_at[m] = lhs

    steps = np.arange(1, horizon + 1)
    series = slack[1:]
    return BoundCheckReport(
        pairs_tested=1,
        max_violation=float(series.min()),
        passed=_slack_passes(series, rhs_at[1:]),
        steps=steps,
        slack=series,
        bound=rhs_at[1:],
        observed=lhs_at[1:],
    )
