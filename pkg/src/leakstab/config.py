"""Model file loading, seed parsing and run settings."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from leakstab.descriptors import (
    AltDescriptor,
    ConstDescriptor,
    Descriptor,
    TableDescriptor,
    TrigDescriptor,
)
from leakstab.errors import LeakstabError
from leakstab.linalg import Scalar
from leakstab.models import BAMSpec, HighOrderSpec, HopfieldSpec, ModelSpec
from leakstab.registry import DEFAULT_REGISTRY, Activation, ActivationRegistry
from leakstab.state import HistoryState

FORMAT_VERSION = 1
MODEL_KINDS = ("hopfield", "bam", "high_order")


class ConfigError(LeakstabError):
    """Raised on model file loading or validation errors.

    ``offset`` is the byte offset of a YAML syntax error when one is known.
    """

    def __init__(self, message: str, offset: int | None = None) -> None:
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)


# --- Settings ---


@dataclass(frozen=True)
class EngineSettings:
    tolerance: float = 1e-10
    max_iters: int = 500
    horizon: int = 500
    lemma_n_max: int = 20
    bound_slack: float = 1e-9


@dataclass(frozen=True)
class CertificateSettings:
    """Numeric choices for certificates.

    ``mu_fraction`` scales mu below the largest feasible value; at the supremum the
    lambda bound approaches 1 and C grows without bound.
    """

    mu_fraction: float = 0.5
    n_max: int = 200


@dataclass
class RunConfig:
    command: str
    model_path: str | None = None
    horizon: int = 500
    tolerance: float = 1e-10
    seeds: list[str] = field(default_factory=list)
    seed_pairs: list[tuple[str, str]] = field(default_factory=list)
    output: str = "out"
    format: str = "csv"
    force: bool = False
    max_iters: int = 500
    workers: int = 1
    mu_fraction: float = 0.5
    n_max: int = 20
    random_pairs: int = 0
    rng_seed: int = 0
    plot_script: bool = False

    def __post_init__(self) -> None:
        if not self.tolerance > 0:
            raise ConfigError(f"tolerance must be positive, got {self.tolerance!r}")
        if self.horizon < 0:
            raise ConfigError(f"horizon must be >= 0, got {self.horizon}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.format!r}")
        if not 0 < self.mu_fraction <= 1:
            raise ConfigError(f"mu fraction must lie in (0, 1], got {self.mu_fraction!r}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.random_pairs < 0:
            raise ConfigError(f"random pairs must be >= 0, got {self.random_pairs}")

    @property
    def engine(self) -> EngineSettings:
        return EngineSettings(
            tolerance=self.tolerance,
            max_iters=self.max_iters,
            horizon=self.horizon,
            lemma_n_max=self.n_max,
        )

    @property
    def certificate(self) -> CertificateSettings:
        return CertificateSettings(mu_fraction=self.mu_fraction)


@dataclass
class LoadedModel:
    spec: ModelSpec
    seeds: list[list[Any]] = field(default_factory=list)
    source: str = "<string>"
    raw: dict[str, Any] = field(default_factory=dict)


# --- Helpers ---


def _require(data: dict, key: str, context: str) -> Any:
    """Get a required key from a dict or raise ConfigError."""
    if key not in data or data[key] is None:
        where = f"{context}.{key}" if context else key
        raise ConfigError(f"Missing required config: {where}")
    return data[key]


def _coerce_int(value: Any, field_name: str) -> int:
    if isinstance(value, bool):
        raise ConfigError(f"Cannot convert {field_name} to int: {value!r}")
    try:
        number = _coerce_scalar(value, field_name)
    except ConfigError:
        raise ConfigError(f"Cannot convert {field_name} to int: {value!r}") from None
    if number != int(number):
        raise ConfigError(f"{field_name} must be an integer, got {value!r}")
    return int(number)


def _coerce_scalar(value: Any, field_name: str) -> Scalar:
    """YAML ints and numeric strings load exactly as Fractions, YAML floats as floats."""
    if isinstance(value, bool):
        raise ConfigError(f"{field_name} must be a number, got {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ConfigError(f"{field_name} must be finite, got {value!r}")
        return value
    if isinstance(value, str):
        try:
            return Fraction(value.replace(" ", ""))
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"{field_name} is not a number or fraction: {value!r}") from None
    raise ConfigError(f"{field_name} must be a number, got {value!r}")


def _mapping(value: Any, context: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{context} must be a mapping, got {type(value).__name__}")
    return value


def _list(value: Any, context: str) -> list:
    if not isinstance(value, list):
        raise ConfigError(f"{context} must be a list, got {type(value).__name__}")
    return value


# --- Descriptors ---


def parse_descriptor(raw: Any, context: str, period: int | None = None) -> Descriptor:
    """A number, a fraction string or a {kind: ...} mapping."""
    if not isinstance(raw, dict):
        return ConstDescriptor(_coerce_scalar(raw, context))
    kind = _require(raw, "kind", context)
    if kind == "const":
        return ConstDescriptor(_coerce_scalar(_require(raw, "value", context), f"{context}.value"))
    if kind == "table":
        values = _list(_require(raw, "values", context), f"{context}.values")
        if not values:
            raise ConfigError(f"{context}.values must not be empty")
        return TableDescriptor(
            tuple(_coerce_scalar(v, f"{context}.values[{k}]") for k, v in enumerate(values))
        )
    if kind in ("cos", "sin"):
        omega_raw = raw.get("period", period)
        if omega_raw is None:
            raise ConfigError(f"{context} needs a period (or a model-level period)")
        omega = _coerce_int(omega_raw, f"{context}.period")
        if omega < 1:
            raise ConfigError(f"{context}.period must be >= 1, got {omega}")
        amplitude = _coerce_scalar(_require(raw, "amplitude", context), f"{context}.amplitude")
        return TrigDescriptor(kind, amplitude, omega)
    if kind == "alt":
        return AltDescriptor(
            _coerce_scalar(raw.get("base", 0), f"{context}.base"),
            _coerce_scalar(_require(raw, "amplitude", context), f"{context}.amplitude"),
        )
    raise ConfigError(f"{context}.kind must be const, table, cos, sin or alt, got {kind!r}")


def _descriptor_list(raw: Any, length: int, context: str, period: int | None) -> list[Descriptor]:
    items = _list(raw, context)
    if len(items) != length:
        raise ConfigError(f"{context} needs {length} entries, got {len(items)}")
    return [parse_descriptor(item, f"{context}[{k}]", period) for k, item in enumerate(items)]


def _index(raw: Any, shape: tuple[int, ...], context: str) -> tuple[int, ...]:
    idx = _list(_require(_mapping(raw, context), "index", context), f"{context}.index")
    if len(idx) != len(shape):
        raise ConfigError(f"{context}.index needs {len(shape)} entries, got {len(idx)}")
    zero_based = tuple(_coerce_int(v, f"{context}.index") - 1 for v in idx)
    for k, n in zip(zero_based, shape, strict=True):
        if not 0 <= k < n:
            raise ConfigError(f"{context}.index {idx} is outside 1..{n}")
    return zero_based


def _indexed_descriptors(
    raw: Any, shape: tuple[int, ...], context: str, period: int | None
) -> dict[tuple[int, ...], Descriptor]:
    """Entries {index: [i, j, ...], <descriptor keys>} with 1-based indices."""
    if raw is None:
        return {}
    table: dict[tuple[int, ...], Descriptor] = {}
    for k, entry in enumerate(_list(raw, context)):
        where = f"{context}[{k}]"
        idx = _index(entry, shape, where)
        if idx in table:
            raise ConfigError(f"{where} repeats index {[v + 1 for v in idx]}")
        body = {key: value for key, value in entry.items() if key != "index"}
        if "kind" not in body:
            body = _require(entry, "value", where)
        table[idx] = parse_descriptor(body, where, period)
    return table


# --- Activations ---


def parse_activation(raw: Any, context: str, registry: ActivationRegistry) -> Activation:
    data = _mapping(raw, context)
    name = _require(data, "name", context)
    params: dict[str, Any] = {}
    if data.get("lipschitz") is not None:
        params["lipschitz_override"] = _coerce_scalar(data["lipschitz"], f"{context}.lipschitz")
    if name == "table":
        points = _list(_require(data, "points", context), f"{context}.points")
        params["points"] = [
            [float(_coerce_scalar(v, f"{context}.points[{k}]")) for v in _list(p, context)]
            for k, p in enumerate(points)
        ]
    try:
        act = registry.create(name, **params)
    except LeakstabError as e:
        raise ConfigError(f"{context}: {e}") from e
    if data.get("bound") is not None:
        act = replace(act, bound=_coerce_scalar(data["bound"], f"{context}.bound"))
    return act


def _activation_table(
    raw: Any, shape: tuple[int, ...], context: str, registry: ActivationRegistry
) -> Activation | dict[tuple[int, ...], Activation]:
    """A single activation for every index, or a list of indexed entries.

    An entry without ``index`` sets the default for indices not listed.
    """
    if raw is None:
        raise ConfigError(f"Missing required config: {context}")
    if isinstance(raw, dict):
        return parse_activation(raw, context, registry)
    default: Activation | None = None
    table: dict[tuple[int, ...], Activation] = {}
    for k, entry in enumerate(_list(raw, context)):
        where = f"{context}[{k}]"
        if "index" not in _mapping(entry, where):
            default = parse_activation(entry, where, registry)
            continue
        table[_index(entry, shape, where)] = parse_activation(entry, where, registry)
    full: dict[tuple[int, ...], Activation] = {}
    for idx in np.ndindex(*shape):
        act = table.get(idx, default)
        if act is None:
            raise ConfigError(f"{context} has no activation for index {[v + 1 for v in idx]}")
        full[idx] = act
    return full


def _activation_vector(
    raw: Any, length: int, context: str, registry: ActivationRegistry
) -> list[Activation]:
    table = _activation_table(raw, (length,), context, registry)
    if isinstance(table, Activation):
        return [table] * length
    return [table[(k,)] for k in range(length)]


# --- Models ---


def _positive_int(data: dict, key: str, context: str = "") -> int:
    value = _coerce_int(_require(data, key, context), key)
    if value < 1:
        raise ConfigError(f"{key} must be >= 1, got {value}")
    return value


def _tau(data: dict) -> int:
    tau = _coerce_int(data.get("tau", 0), "tau")
    if tau < 0:
        raise ConfigError(f"tau must be >= 0, got {tau}")
    return tau


def _parse_hopfield(data: dict, period: int | None, registry: ActivationRegistry) -> HopfieldSpec:
    n = _positive_int(data, "n")
    k = _positive_int(data, "k")
    shape = (n, n, k)
    return HopfieldSpec(
        n=n,
        k=k,
        tau=_tau(data),
        leakage=_descriptor_list(_require(data, "leakage", ""), n, "leakage", period),
        weights=_indexed_descriptors(data.get("weights"), shape, "weights", period),
        delays=_indexed_descriptors(data.get("delays"), shape, "delays", period),
        activations=_activation_table(data.get("activations"), shape, "activations", registry),
        inputs=_descriptor_list(data["inputs"], n, "inputs", period)
        if data.get("inputs") is not None
        else None,
        name=str(data.get("name", "hopfield")),
    )


def _parse_bam(data: dict, period: int | None, registry: ActivationRegistry) -> BAMSpec:
    n1 = _positive_int(data, "n1")
    n2 = _positive_int(data, "n2")
    hat, tilde = (n1, n2), (n2, n1)

    def vector(key: str, length: int, required: bool = False) -> list[Descriptor] | None:
        if data.get(key) is None:
            if required:
                raise ConfigError(f"Missing required config: {key}")
            return None
        return _descriptor_list(data[key], length, key, period)

    return BAMSpec(
        n1=n1,
        n2=n2,
        tau=_tau(data),
        c_hat=vector("c_hat", n1, required=True),
        c_tilde=vector("c_tilde", n2, required=True),
        a_hat=_indexed_descriptors(data.get("a_hat"), hat, "a_hat", period),
        b_hat=_indexed_descriptors(data.get("b_hat"), hat, "b_hat", period),
        tau_hat=_indexed_descriptors(data.get("tau_hat"), hat, "tau_hat", period),
        i_hat=vector("i_hat", n1),
        a_tilde=_indexed_descriptors(data.get("a_tilde"), tilde, "a_tilde", period),
        b_tilde=_indexed_descriptors(data.get("b_tilde"), tilde, "b_tilde", period),
        tau_tilde=_indexed_descriptors(data.get("tau_tilde"), tilde, "tau_tilde", period),
        i_tilde=vector("i_tilde", n2),
        f=_activation_vector(data.get("f"), n2, "f", registry),
        g=_activation_vector(data.get("g"), n1, "g", registry),
        name=str(data.get("name", "bam")),
    )


def _parse_high_order(
    data: dict, period: int | None, registry: ActivationRegistry
) -> HighOrderSpec:
    n = _positive_int(data, "n")
    cube = (n, n, n)
    bounds = data.get("g_bounds")
    return HighOrderSpec(
        n=n,
        tau=_tau(data),
        leakage=_descriptor_list(_require(data, "leakage", ""), n, "leakage", period),
        a=_indexed_descriptors(data.get("a"), (n, n), "a", period),
        b=_indexed_descriptors(data.get("b"), cube, "b", period),
        delays_tau=_indexed_descriptors(data.get("delays_tau"), cube, "delays_tau", period),
        delays_xi=_indexed_descriptors(data.get("delays_xi"), cube, "delays_xi", period),
        f=_activation_vector(data.get("f"), n, "f", registry),
        g=_activation_vector(data.get("g"), n, "g", registry),
        g_bounds=None
        if bounds is None
        else [_coerce_scalar(v, f"g_bounds[{k}]") for k, v in enumerate(_list(bounds, "g_bounds"))],
        inputs=_descriptor_list(data["inputs"], n, "inputs", period)
        if data.get("inputs") is not None
        else None,
        name=str(data.get("name", "high_order")),
    )


_PARSERS = {
    "hopfield": _parse_hopfield,
    "bam": _parse_bam,
    "high_order": _parse_high_order,
}


def parse_model(
    raw: Any, source: str = "<string>", registry: ActivationRegistry | None = None
) -> LoadedModel:
    """Build a ModelSpec from the parsed YAML document."""
    registry = registry or DEFAULT_REGISTRY
    if raw is None:
        raise ConfigError(f"Model file {source} is empty", offset=0)
    data = _mapping(raw, "model file")
    version = _coerce_int(_require(data, "format_version", ""), "format_version")
    if version != FORMAT_VERSION:
        raise ConfigError(f"Unsupported format_version {version}; expected {FORMAT_VERSION}")
    kind = _require(data, "model", "")
    if kind not in _PARSERS:
        raise ConfigError(f"model must be one of {', '.join(MODEL_KINDS)}, got {kind!r}")
    period = None
    if data.get("period") is not None:
        period = _coerce_int(data["period"], "period")
        if period < 1:
            raise ConfigError(f"period must be >= 1, got {period}")

    try:
        spec = _PARSERS[kind](data, period, registry)
    except ConfigError:
        raise
    except LeakstabError as e:
        raise ConfigError(f"Invalid {kind} model in {source}: {e}") from e

    seeds = [
        _list(seed, f"seeds[{k}]") for k, seed in enumerate(_list(data.get("seeds") or [], "seeds"))
    ]
    for k, seed in enumerate(seeds):
        if len(seed) != spec.n_channels:
            raise ConfigError(
                f"seeds[{k}] needs {spec.n_channels} channel entries, got {len(seed)}"
            )
    return LoadedModel(spec=spec, seeds=seeds, source=source, raw=data)


def load_model_text(text: str, source: str = "<string>") -> LoadedModel:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        offset = len(text[: mark.index].encode()) if mark is not None else None
        raise ConfigError(f"Cannot parse {source}: {e}", offset=offset) from None
    return parse_model(raw, source)


def load_model(path: str | Path) -> LoadedModel:
    """Load and validate a model file."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"Model file not found: {path}")
    try:
        text = p.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise ConfigError(f"Cannot read model file {path}: {e}") from None
    return load_model_text(text, str(path))


# --- Seeds ---

_SEED_FUNCTIONS = {"cos": np.cos, "sin": np.sin, "exp": np.exp}
_SEED_TERM = re.compile(r"^(?:(?P<coef>[-+]?[0-9./eE+-]*)\s*\*?\s*)?(?P<name>cos|sin|exp)$")


def seed_channel(expr: Any, window_start: int) -> np.ndarray:
    """Sample one channel on j = r..0.

    Accepts a constant ("0.3", "-1"), a sampled function ("cos", "-1.5*exp") or an explicit
    list of |r|+1 values.
    """
    offsets = np.arange(window_start, 1, dtype=float)
    if isinstance(expr, list):
        if len(expr) != len(offsets):
            raise ConfigError(f"Seed table needs {len(offsets)} values, got {len(expr)}")
        return np.array([float(_coerce_scalar(v, "seed")) for v in expr])
    text = str(expr).strip().replace(" ", "")
    match = _SEED_TERM.match(text)
    if match:
        coef = match.group("coef")
        if coef in (None, "", "+"):
            scale = 1.0
        elif coef == "-":
            scale = -1.0
        else:
            scale = float(_coerce_scalar(coef, "seed coefficient"))
        return scale * _SEED_FUNCTIONS[match.group("name")](offsets)
    return np.full(len(offsets), float(_coerce_scalar(text, "seed")))


def seed_state(entries: list[Any] | str, n_channels: int, window_start: int) -> HistoryState:
    """A HistoryState from per-channel seed expressions, or a comma-separated string."""
    if isinstance(entries, str):
        entries = [part for part in entries.split(",") if part.strip()]
    if len(entries) != n_channels:
        raise ConfigError(f"Seed needs {n_channels} channel entries, got {len(entries)}")
    return HistoryState(
        window_start, np.vstack([seed_channel(e, window_start) for e in entries])
    )


def parse_seed_pair(text: str) -> tuple[str, str]:
    """'cos,sin:exp,-1' -> ('cos,sin', 'exp,-1')."""
    left, sep, right = text.partition(":")
    if not sep or not left.strip() or not right.strip():
        raise ConfigError(f"Seed pair must look like 'a,b:c,d', got {text!r}")
    return left.strip(), right.strip()


def random_states(
    count: int, n_channels: int, window_start: int, rng_seed: int = 0, scale: float = 2.0
) -> list[HistoryState]:
    rng = np.random.default_rng(rng_seed)
    shape = (n_channels, 1 - window_start)
    return [HistoryState(window_start, rng.uniform(-scale, scale, shape)) for _ in range(count)]


def bundled_fixture(name: str = "hopfield_example.yaml") -> Path:
    return Path(__file__).parent / "fixtures" / name
