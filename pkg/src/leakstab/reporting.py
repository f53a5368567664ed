"""Report writers -- versioned CSV tables, certificate JSON and rendered text summaries."""

from __future__ import annotations

import json
import logging
from collections.abc import Mapping, Sequence
from fractions import Fraction
from pathlib import Path
from typing import Any

import jinja2
import numpy as np
import pandas as pd

from leakstab.certificates import StabilityCertificate
from leakstab.engine import BoundCheckReport, PeriodicOrbitResult
from leakstab.errors import ShapeError
from leakstab.linalg import format_scalar
from leakstab.state import HistoryState, Trajectory

logger = logging.getLogger("leakstab.reporting")

FORMAT_VERSION = 1
FLOAT_FORMAT = "%.17g"
_HEADER = f"# format_version: {FORMAT_VERSION}\n"

_TEMPLATE_DIR = Path(__file__).parent / "templates"
_env = jinja2.Environment(
    loader=jinja2.FileSystemLoader(str(_TEMPLATE_DIR)),
    autoescape=False,
    keep_trailing_newline=True,
    trim_blocks=True,
    lstrip_blocks=True,
)
_env.filters["scalar"] = lambda v: v if isinstance(v, str) else str(format_scalar(v))
_env.filters["sci"] = lambda v: "n/a" if v is None else f"{v:.6g}"


# --- CSV ---


def channel_columns(n_channels: int) -> list[str]:
    return [f"x_{i + 1}" for i in range(n_channels)]


def write_csv(path: str | Path, frame: pd.DataFrame) -> Path:
    """Write a frame behind the format_version comment line, 17 significant digits."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", encoding="utf-8", newline="") as fh:
        fh.write(_HEADER)
        frame.to_csv(fh, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.debug("Wrote %s (%d rows)", p, len(frame))
    return p


def read_csv(path: str | Path) -> pd.DataFrame:
    return pd.read_csv(path, comment="#", float_precision="round_trip")


def trajectory_frame(traj: Trajectory) -> pd.DataFrame:
    """Columns m, x_1, ..., x_N for every m in [r, horizon]."""
    frame = pd.DataFrame(traj.samples.T, columns=channel_columns(traj.system.n_channels))
    frame.insert(0, "m", traj.times)
    return frame


def orbit_frame(result: PeriodicOrbitResult) -> pd.DataFrame:
    """The fixed-point window (m = r..0) followed by one period (m = 1..omega)."""
    return trajectory_frame(result.orbit)


def state_from_frame(frame: pd.DataFrame, window_start: int, at: int = 0) -> HistoryState:
    """The window x_at read back from a trajectory or orbit table."""
    rows = frame.set_index("m").loc[at + window_start : at]
    if len(rows) != 1 - window_start:
        raise ShapeError(
            f"Table has {len(rows)} rows for m in [{at + window_start}, {at}], "
            f"expected {1 - window_start}"
        )
    columns = [c for c in rows.columns if c.startswith("x_")]
    return HistoryState(window_start, rows[columns].to_numpy(dtype=float).T.copy())


def residuals_frame(residuals: Sequence[float]) -> pd.DataFrame:
    return pd.DataFrame(
        {"iteration": np.arange(1, len(residuals) + 1), "residual": np.asarray(residuals)}
    )


def slack_frame(report: BoundCheckReport) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "m": report.steps,
            "observed": report.observed,
            "bound": report.bound,
            "slack": report.slack,
        }
    )


def distances_frame(series: Mapping[str, np.ndarray]) -> pd.DataFrame:
    """Column m plus one distance column per label, truncated to the shortest series."""
    if not series:
        return pd.DataFrame({"m": np.arange(0)})
    length = min(len(v) for v in series.values())
    frame = pd.DataFrame({label: np.asarray(v)[:length] for label, v in series.items()})
    frame.insert(0, "m", np.arange(length))
    return frame


# --- JSON ---


def _json_default(value: Any) -> Any:
    if isinstance(value, Fraction):
        return format_scalar(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def to_json(payload: Mapping[str, Any]) -> str:
    return json.dumps(
        {"format_version": FORMAT_VERSION, **payload}, indent=2, default=_json_default
    )


def write_json(path: str | Path, payload: Mapping[str, Any]) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(to_json(payload) + "\n", encoding="utf-8")
    logger.debug("Wrote %s", p)
    return p


def read_json(path: str | Path) -> dict[str, Any]:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def certificate_payload(cert: StabilityCertificate, model: Mapping[str, Any]) -> dict[str, Any]:
    return {"model": dict(model), "certificate": cert.to_dict()}


def orbit_payload(result: PeriodicOrbitResult) -> dict[str, Any]:
    frame = orbit_frame(result)
    return {
        "period": result.period,
        "iterations": result.iterations,
        "residual": result.residual,
        "residual_floor": result.residual_floor,
        "floor_reached": result.floor_reached,
        "contraction_estimate": result.contraction_estimate,
        "contraction_power": result.contraction_power,
        "m": frame["m"].tolist(),
        "x": [frame[col].tolist() for col in frame.columns if col != "m"],
    }


# --- Rendered text ---


def format_matrix(matrix: Sequence[Sequence[Any]]) -> str:
    """[[1/2, -1/6], [-1/2, 1/3]]."""
    rows = ", ".join("[" + ", ".join(str(format_scalar(v)) for v in row) + "]" for row in matrix)
    return f"[{rows}]"


def render(template: str, **context: Any) -> str:
    return _env.get_template(template).render(**context)


def render_certificate_summary(
    cert: StabilityCertificate, model: Mapping[str, Any]
) -> str:
    matrix = cert.m_matrix.matrix if cert.m_matrix is not None else ()
    return render(
        "summary.txt.j2",
        cert=cert,
        model=model,
        matrix=format_matrix(matrix) if matrix else None,
    )


def write_plot_script(path: str | Path, csv_name: str, n_channels: int, title: str) -> Path:
    """Companion script for plotting an exported table with an external tool."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(
        render(
            "plot_orbit.py.j2",
            csv_name=csv_name,
            columns=channel_columns(n_channels),
            title=title,
        ),
        encoding="utf-8",
    )
    return p
