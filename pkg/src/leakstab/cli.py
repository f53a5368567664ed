"""CLI commands -- certify, simulate, periodic, verify-bounds and the bundled example."""

from __future__ import annotations

import itertools
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from leakstab.certificates import StabilityCertificate
from leakstab.config import (
    ConfigError,
    LoadedModel,
    RunConfig,
    bundled_fixture,
    load_model,
    parse_seed_pair,
    random_states,
    seed_state,
)
from leakstab.engine import (
    BoundCheckReport,
    PeriodicOrbitResult,
    check_exponential_bound_batch,
    check_lemma_inequality,
    find_periodic_orbit,
    merge_reports,
    simulate,
)
from leakstab.errors import DivergenceError, LeakstabError, NonConvergenceError
from leakstab.linalg import format_scalar
from leakstab.models import ModelSpec
from leakstab.reporting import (
    distances_frame,
    format_matrix,
    orbit_frame,
    orbit_payload,
    render_certificate_summary,
    residuals_frame,
    slack_frame,
    trajectory_frame,
    write_csv,
    write_json,
    write_plot_script,
)
from leakstab.routes import certify_spec
from leakstab.state import HistoryState, SystemDefinition, state_distance

logger = logging.getLogger("leakstab.cli")

# Exit codes
EXIT_SUCCESS = 0
EXIT_NOT_CERTIFIED = 1
EXIT_CONFIG_ERROR = 2
EXIT_NO_CONVERGENCE = 3
EXIT_REFUSED = 4
EXIT_DIVERGED = 5

# distance to the orbit the example expects within CONVERGENCE_STEPS steps
CONVERGENCE_TARGET = 1e-6
CONVERGENCE_STEPS = 300


def _error(message: str, code: int) -> int:
    print(f"Error: {message}", file=sys.stderr)
    return code


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(config: RunConfig) -> LoadedModel:
    if not config.model_path:
        raise ConfigError("Model file required (--model)")
    return load_model(config.model_path)


def _write_table(
    config: RunConfig, name: str, frame: pd.DataFrame, plot_title: str | None = None
) -> Path:
    """Write a table as <name>.csv or <name>.json; optionally add a plot script next to it."""
    out = _out_dir(config)
    if config.format == "json":
        return write_json(
            out / f"{name}.json",
            {"columns": list(frame.columns), "data": frame.to_dict(orient="list")},
        )
    path = write_csv(out / f"{name}.csv", frame)
    if config.plot_script and plot_title is not None:
        n_channels = sum(1 for col in frame.columns if col.startswith("x_"))
        write_plot_script(out / f"plot_{name}.py", path.name, n_channels, plot_title)
    return path


def _seed_states(config: RunConfig, loaded: LoadedModel) -> list[HistoryState]:
    """--seed values when given, else the model file's seeds."""
    spec = loaded.spec
    entries: Sequence[Any] = config.seeds or loaded.seeds
    return [seed_state(entry, spec.n_channels, spec.window_start) for entry in entries]


def _seed_pairs(config: RunConfig, loaded: LoadedModel) -> list[tuple[HistoryState, HistoryState]]:
    """--seed-pair values, else every pair of model seeds, then the random pairs."""
    spec = loaded.spec
    n, r = spec.n_channels, spec.window_start
    if config.seed_pairs:
        pairs = [(seed_state(a, n, r), seed_state(b, n, r)) for a, b in config.seed_pairs]
    else:
        pairs = list(itertools.combinations(_seed_states(config, loaded), 2))
    randoms = random_states(2 * config.random_pairs, n, r, rng_seed=config.rng_seed)
    pairs.extend(zip(randoms[0::2], randoms[1::2], strict=True))
    return pairs


def _certify(config: RunConfig, loaded: LoadedModel) -> StabilityCertificate:
    cert = certify_spec(loaded.spec, config.certificate)
    out = _out_dir(config)
    model = loaded.spec.describe()
    payload = {"source": loaded.source, "model": model, "certificate": cert.to_dict()}
    write_json(out / "certificate.json", payload)
    (out / "summary.txt").write_text(render_certificate_summary(cert, model), encoding="utf-8")
    return cert


def _guard(cert: StabilityCertificate, config: RunConfig, command: str) -> int | None:
    """Refuse uncertified models unless --force is given."""
    if cert.certified:
        return None
    if not config.force:
        return _error(
            f"Model is {cert.verdict.value}; {command} needs a certified model (use --force)",
            EXIT_REFUSED,
        )
    logger.warning("Running %s on a %s model (--force)", command, cert.verdict.value)
    return None


# --- certify ---


def cmd_certify(config: RunConfig) -> int:
    """Certify the model; exit 0 when Certified, 1 otherwise."""
    try:
        loaded = _load(config)
        cert = _certify(config, loaded)
    except ConfigError as e:
        return _error(str(e), EXIT_CONFIG_ERROR)
    except LeakstabError as e:
        return _error(f"Certification failed: {e}", EXIT_CONFIG_ERROR)

    print(render_certificate_summary(cert, loaded.spec.describe()), end="")
    logger.info("Certificate written to %s", Path(config.output) / "certificate.json")
    return EXIT_SUCCESS if cert.certified else EXIT_NOT_CERTIFIED


# --- simulate ---


def cmd_simulate(config: RunConfig) -> int:
    """Simulate every seed over the horizon and write one trajectory table per seed."""
    try:
        loaded = _load(config)
        states = _seed_states(config, loaded)
    except ConfigError as e:
        return _error(str(e), EXIT_CONFIG_ERROR)
    except LeakstabError as e:
        return _error(str(e), EXIT_CONFIG_ERROR)

    spec = loaded.spec
    if not states:
        states = [HistoryState.zeros(spec.n_channels, spec.window_start)]
    system = spec.lower()
    for k, state in enumerate(states, start=1):
        try:
            traj = simulate(system, state, config.horizon)
        except DivergenceError as e:
            return _error(f"Seed {k} diverged: {e}", EXIT_DIVERGED)
        except LeakstabError as e:
            return _error(f"Seed {k}: {e}", EXIT_CONFIG_ERROR)
        path = _write_table(
            config, f"trajectory_{k}", trajectory_frame(traj), plot_title=f"trajectory {k}"
        )
        print(f"trajectory {k}: {config.horizon} steps -> {path}")
    return EXIT_SUCCESS


# --- periodic ---


def _solve_orbit(
    config: RunConfig, loaded: LoadedModel, cert: StabilityCertificate
) -> PeriodicOrbitResult | int:
    """The orbit, or an exit code after reporting the failure."""
    spec = loaded.spec
    system = spec.lower()
    if system.period is None:
        return _error(f"Model {loaded.source} is not periodic", EXIT_CONFIG_ERROR)
    seeds = _seed_states(config, loaded) if config.seeds else []
    seed = seeds[0] if seeds else None
    envelope = None
    if cert.certified and cert.envelope_constant is not None and cert.zeta is not None:
        envelope = (cert.envelope_constant, cert.zeta)
    try:
        result = find_periodic_orbit(
            system, seed, tol=config.tolerance, max_iters=config.max_iters, envelope=envelope
        )
    except NonConvergenceError as e:
        path = _write_table(config, "residuals", residuals_frame(e.residuals))
        return _error(f"{e} (residual trace in {path})", EXIT_NO_CONVERGENCE)
    except DivergenceError as e:
        return _error(f"Poincaré iteration diverged: {e}", EXIT_DIVERGED)

    _write_table(config, "residuals", residuals_frame(result.residuals))
    if config.format == "json":
        write_json(_out_dir(config) / "orbit.json", orbit_payload(result))
    else:
        title = f"{system.period}-periodic orbit"
        _write_table(config, "orbit", orbit_frame(result), plot_title=title)
    return result


def _orbit_line(result: PeriodicOrbitResult) -> str:
    line = (
        f"orbit: period {result.period}, {result.iterations} iterations, "
        f"residual {result.residual:.3e}"
    )
    if result.floor_reached:
        line += f" (round-off floor {result.residual_floor:.3e})"
    if result.contraction_power is not None:
        line += f", contraction power {result.contraction_power}"
    return line


def cmd_periodic(config: RunConfig) -> int:
    """Find the periodic orbit of a certified periodic model."""
    try:
        loaded = _load(config)
        cert = _certify(config, loaded)
    except ConfigError as e:
        return _error(str(e), EXIT_CONFIG_ERROR)
    except LeakstabError as e:
        return _error(str(e), EXIT_CONFIG_ERROR)

    refused = _guard(cert, config, "periodic")
    if refused is not None:
        return refused
    try:
        result = _solve_orbit(config, loaded, cert)
    except LeakstabError as e:
        return _error(str(e), EXIT_CONFIG_ERROR)
    if isinstance(result, int):
        return result
    print(_orbit_line(result))
    return EXIT_SUCCESS


# --- verify-bounds ---


def _lipschitz_rows(spec: ModelSpec) -> list[float]:
    """Constant H_i = sum_j H_ij bounding the nonlinearity of row i at every m."""
    return [float(v) for v in spec.lipschitz_data().row_sums]


def _tagged(reports: Sequence[BoundCheckReport]) -> pd.DataFrame:
    frames = [slack_frame(rep).assign(pair=k) for k, rep in enumerate(reports, start=1)]
    frame = pd.concat(frames, ignore_index=True)
    return frame[["pair", "m", "observed", "bound", "slack"]]


def _verify(
    config: RunConfig,
    system: SystemDefinition,
    spec: ModelSpec,
    cert: StabilityCertificate,
    pairs: Sequence[tuple[HistoryState, HistoryState]],
) -> bool:
    """Exponential envelope and per-channel difference estimate over every pair."""
    passed = True
    summary: dict[str, Any] = {"pairs": len(pairs)}
    if cert.certified and cert.envelope_constant is not None and cert.zeta is not None:
        merged, reports = check_exponential_bound_batch(
            system, pairs, cert.envelope_constant, cert.zeta, config.horizon, config.workers
        )
        _write_table(config, "slack", _tagged(reports))
        print(
            f"exponential bound: {merged.pairs_tested} pairs, min slack "
            f"{merged.max_violation:.3e} -> {'pass' if merged.passed else 'FAIL'}"
        )
        summary["exponential"] = {
            "C": cert.envelope_constant,
            "zeta": cert.zeta,
            "min_slack": merged.max_violation,
            "worst_pair": merged.worst_pair + 1,
            "passed": merged.passed,
            "per_pair_min_slack": [rep.max_violation for rep in reports],
        }
        passed = merged.passed
    else:
        logger.warning("No decay constants; only the difference estimate is checked")

    rows = _lipschitz_rows(spec)
    lemma_reports = [
        check_lemma_inequality(system, a, b, lambda i, _t: rows[i], config.n_max)
        for a, b in pairs
    ]
    lemma = merge_reports(lemma_reports)
    _write_table(config, "lemma_slack", _tagged(lemma_reports))
    print(
        f"difference estimate: {lemma.pairs_tested} pairs, min slack "
        f"{lemma.max_violation:.3e} -> {'pass' if lemma.passed else 'FAIL'}"
    )
    summary["difference_estimate"] = {
        "n_max": config.n_max,
        "min_slack": lemma.max_violation,
        "worst_pair": lemma.worst_pair + 1,
        "passed": lemma.passed,
    }
    write_json(_out_dir(config) / "bounds.json", summary)
    return passed and lemma.passed


def cmd_verify_bounds(config: RunConfig) -> int:
    """Check the certified envelope on trajectory pairs; exit 0 iff every slack holds."""
    try:
        loaded = _load(config)
        cert = _certify(config, loaded)
        pairs = _seed_pairs(config, loaded)
    except ConfigError as e:
        return _error(str(e), EXIT_CONFIG_ERROR)
    except LeakstabError as e:
        return _error(str(e), EXIT_CONFIG_ERROR)

    refused = _guard(cert, config, "verify-bounds")
    if refused is not None:
        return refused
    if not pairs:
        message = "No seed pairs; give --seed-pair, model seeds or --random-pairs"
        return _error(message, EXIT_CONFIG_ERROR)
    try:
        passed = _verify(config, loaded.spec.lower(), loaded.spec, cert, pairs)
    except DivergenceError as e:
        return _error(f"Simulation diverged: {e}", EXIT_DIVERGED)
    return EXIT_SUCCESS if passed else EXIT_NOT_CERTIFIED


# --- example ---


def orbit_distances(
    system: SystemDefinition, orbit: PeriodicOrbitResult, state: HistoryState, steps: int
) -> np.ndarray:
    """||x_m - p_m|| for m = 0..steps, where p is the periodic solution."""
    traj = simulate(system, state, steps)
    omega = orbit.period
    return np.array(
        [state_distance(traj.window(m), orbit.orbit.window(m % omega)) for m in range(steps + 1)]
    )


def cmd_example(config: RunConfig) -> int:
    """certify -> periodic -> convergence -> verify-bounds on the bundled network."""
    if not config.model_path:
        config.model_path = str(bundled_fixture())
    try:
        loaded = _load(config)
        cert = _certify(config, loaded)
        pairs = _seed_pairs(config, loaded)
    except ConfigError as e:
        return _error(str(e), EXIT_CONFIG_ERROR)
    except LeakstabError as e:
        return _error(str(e), EXIT_CONFIG_ERROR)

    spec = loaded.spec
    if cert.m_matrix is not None:
        print(f"M = {format_matrix(cert.m_matrix.matrix)}")
        minors = ", ".join(str(format_scalar(v)) for v in cert.m_matrix.leading_minors)
        print(f"leading minors: {minors}")
    print(f"verdict: {cert.verdict.value} via {cert.route}")
    if not cert.certified:
        return EXIT_NOT_CERTIFIED

    try:
        result = _solve_orbit(config, loaded, cert)
    except LeakstabError as e:
        return _error(str(e), EXIT_CONFIG_ERROR)
    if isinstance(result, int):
        return result
    print(_orbit_line(result))

    system = spec.lower()
    try:
        series = {
            f"seed_{k}": orbit_distances(system, result, state, config.horizon)
            for k, state in enumerate(_seed_states(config, loaded), start=1)
        }
        _write_table(config, "convergence", distances_frame(series))
        for label, dist in series.items():
            reached = np.flatnonzero(dist <= CONVERGENCE_TARGET)
            when = f"step {int(reached[0])}" if reached.size else "not reached"
            print(f"{label}: distance to orbit <= {CONVERGENCE_TARGET:g} at {when}")
            if not reached.size or reached[0] > CONVERGENCE_STEPS:
                logger.warning("%s converges slower than %d steps", label, CONVERGENCE_STEPS)
        passed = _verify(config, system, spec, cert, pairs)
    except DivergenceError as e:
        return _error(f"Simulation diverged: {e}", EXIT_DIVERGED)
    return EXIT_SUCCESS if passed else EXIT_NOT_CERTIFIED


COMMANDS = {
    "certify": cmd_certify,
    "simulate": cmd_simulate,
    "periodic": cmd_periodic,
    "verify-bounds": cmd_verify_bounds,
    "example": cmd_example,
}


def parse_pairs(values: Sequence[str]) -> list[tuple[str, str]]:
    return [parse_seed_pair(v) for v in values]
