"""Stability certificates: lambda, row dominance, mu-search, M-matrix tests and rescaling."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace
from enum import StrEnum
from fractions import Fraction
from typing import Any

import numpy as np
from scipy.optimize import bisect

from leakstab import linalg
from leakstab.errors import CertificateError, DomainError, HypothesisViolation, ShapeError
from leakstab.linalg import Scalar, format_scalar
from leakstab.state import SystemDefinition

logger = logging.getLogger("leakstab.certificates")

DEFAULT_N_MAX = 200
FLOAT_MARGIN_TOL = 1e-12
MU_RTOL = 1e-12
# e^{-nu_i} for rows with c_i+ = 0 is min(_ZERO_LEAK_BASE, (1 - H_i) / 2)
_ZERO_LEAK_BASE = 1e-3
# relative slack on |c_i(m)| <= c, covers the rounding of c = e^{-mu}
_LEAK_REL_SLACK = 8 * np.finfo(float).eps


class Verdict(StrEnum):
    CERTIFIED = "Certified"
    NOT_CERTIFIED = "NotCertified"
    UNIFORM_ONLY = "UniformOnly"


@dataclass(frozen=True)
class LipschitzData:
    """Constant bounds H_ij on the nonlinear parts and c_i+ = sup_m |c_i(m)|."""

    H: tuple[tuple[Scalar, ...], ...]
    c_plus: tuple[Scalar, ...]

    def __post_init__(self) -> None:
        H = tuple(tuple(row) for row in self.H)
        c_plus = tuple(self.c_plus)
        n = len(c_plus)
        if n == 0 or len(H) != n or any(len(row) != n for row in H):
            raise ShapeError(f"H must be {n} x {n} to match c_plus")
        for i, row in enumerate(H):
            for j, v in enumerate(row):
                if not math.isfinite(v) or v < 0:
                    raise DomainError(f"H[{i + 1}][{j + 1}] = {v} must be finite and >= 0")
        for i, v in enumerate(c_plus):
            if not 0 <= v < 1:
                raise HypothesisViolation(f"c_{i + 1}+ = {v} must lie in [0, 1)")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "c_plus", c_plus)

    @property
    def n_channels(self) -> int:
        return len(self.c_plus)

    @property
    def row_sums(self) -> tuple[Scalar, ...]:
        return tuple(sum(row, Fraction(0)) for row in self.H)

    @property
    def is_exact(self) -> bool:
        return linalg.is_exact(self.H) and linalg.is_exact([self.c_plus])

    def to_dict(self) -> dict[str, Any]:
        return {
            "H": [[format_scalar(v) for v in row] for row in self.H],
            "c_plus": [format_scalar(v) for v in self.c_plus],
            "row_sums": [format_scalar(v) for v in self.row_sums],
        }


@dataclass(frozen=True)
class MMatrixReport:
    is_z_matrix: bool
    leading_minors: tuple[Scalar, ...]
    is_nonsingular_m: bool
    witness_d: tuple[Scalar, ...] | None = None
    note: str = ""
    matrix: tuple[tuple[Scalar, ...], ...] = ()
    is_exact: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "matrix": [[format_scalar(v) for v in row] for row in self.matrix],
            "is_z_matrix": self.is_z_matrix,
            "leading_minors": [format_scalar(v) for v in self.leading_minors],
            "is_nonsingular_m": self.is_nonsingular_m,
            "witness_d": None
            if self.witness_d is None
            else [format_scalar(v) for v in self.witness_d],
            "exact": self.is_exact,
            "note": self.note,
        }


@dataclass(frozen=True)
class LambdaEstimate:
    """Truncated scan of lambda and an upper bound valid for every n.

    ``value`` maximizes the inner sums over channels, residues s and n <= n_max;
    ``upper`` adds the geometric tail for n > n_max and is +inf when the sampled leakage
    reaches c. ``argmax`` is the (channel, s, n) attaining ``value``, zero-based channel.
    """

    value: float
    upper: float
    n_max: int
    argmax: tuple[int, int, int] = (0, 0, 1)
    per_channel: tuple[float, ...] = ()


@dataclass(frozen=True)
class MuSearchResult:
    mu: float
    nu: tuple[float, ...]
    c: float
    zeta: float
    C: float
    lambda_bound: float
    mu_supremum: float


@dataclass(frozen=True)
class StabilityCertificate:
    """Verdict plus the data that justifies it.

    When a witness d is present the decay constants hold for y = d^{-1} x; in the original
    coordinates the envelope constant grows by ``coordinate_factor`` = max(d) / min(d).
    """

    verdict: Verdict
    route: str
    per_row_margin: tuple[Scalar, ...]
    witness_d: tuple[Scalar, ...] | None = None
    mu: float | None = None
    nu: tuple[float, ...] = ()
    c: float | None = None
    lambda_bound: float | None = None
    lambda_numeric: float | None = None
    lambda_upper: float | None = None
    C: float | None = None
    zeta: float | None = None
    coordinate_factor: float = 1.0
    lipschitz: LipschitzData | None = None
    m_matrix: MMatrixReport | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def certified(self) -> bool:
        return self.verdict is Verdict.CERTIFIED

    @property
    def envelope_constant(self) -> float | None:
        """C in the original coordinates."""
        if self.C is None:
            return None
        return self.C * self.coordinate_factor

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "verdict": self.verdict.value,
            "route": self.route,
            "per_row_margin": [format_scalar(v) for v in self.per_row_margin],
            "witness_d": None
            if self.witness_d is None
            else [format_scalar(v) for v in self.witness_d],
            "mu": self.mu,
            "nu": list(self.nu),
            "c": self.c,
            "zeta": self.zeta,
            "C": self.C,
            "envelope_constant": self.envelope_constant,
            "lambda_bound": self.lambda_bound,
            "lambda_numeric": self.lambda_numeric,
            "lambda_upper": self.lambda_upper,
            "coordinate_factor": self.coordinate_factor,
            "notes": list(self.notes),
        }
        if self.lipschitz is not None:
            data["lipschitz"] = self.lipschitz.to_dict()
        if self.m_matrix is not None:
            data["m_matrix"] = self.m_matrix.to_dict()
        return data


# ---------------------------------------------------------------------------
# lambda
# ---------------------------------------------------------------------------


def lambda_numeric(
    leakage: Callable[[int, int], float],
    lipschitz: Callable[[int, int], float],
    *,
    n_channels: int,
    tau: int,
    r: int,
    c: float,
    n_max: int = DEFAULT_N_MAX,
    period: int | None = None,
) -> LambdaEstimate:
    """Scan the inner sums of lambda for n <= n_max.

    With t_k = k(tau+1) + tau - s and e = (r - s - 1)/(tau + 1) the inner sum obeys

        S_1 = H_i(t_0) c^e,    S_{n+1} = (|c_i(t_n)| / c) S_n + H_i(t_n) c^e

    and, with q_i = sup |c_i| / c < 1, every S_n for n > n_max is at most
    max(S_{n_max}, sup H_i c^e / (1 - q_i)). Samples of c_i and H_i are taken over the
    scanned range, extended to a full period when one is given.
    """
    if not 0 < c <= 1:
        raise DomainError(f"c must lie in (0, 1], got {c}")
    if n_max < 1:
        raise DomainError(f"n_max must be >= 1, got {n_max}")
    if r > -tau:
        raise DomainError(f"r={r} must satisfy r <= -tau = {-tau}")

    span = max(n_max * (tau + 1), period or 0)
    leak = np.abs(np.array([[leakage(i, m) for i in range(n_channels)] for m in range(span)]))
    lip = np.array([[lipschitz(i, m) for i in range(n_channels)] for m in range(span)])
    bad = np.argwhere(leak > c * (1 + _LEAK_REL_SLACK))
    if bad.size:
        m, i = (int(v) for v in bad[0])
        raise HypothesisViolation(f"|c_{i + 1}({m})| = {leak[m, i]!r} exceeds c = {c!r}")

    best, argmax, upper = 0.0, (0, 0, 1), 0.0
    per_channel = []
    for i in range(n_channels):
        q = float(leak[:, i].max()) / c
        h_sup = float(lip[:, i].max())
        channel_best = 0.0
        for s in range(tau + 1):
            scale = c ** ((r - s - 1) / (tau + 1))
            total = 0.0
            for n in range(1, n_max + 1):
                t_prev = (n - 1) * (tau + 1) + tau - s
                if n == 1:
                    total = lip[t_prev, i] * scale
                else:
                    total = leak[t_prev, i] / c * total + lip[t_prev, i] * scale
                if total > channel_best:
                    channel_best = total
                if total > best:
                    best, argmax = total, (i, s, n)
            if h_sup == 0.0:
                tail = 0.0
            elif q >= 1.0:
                tail = math.inf
            else:
                tail = h_sup * scale / (1.0 - q)
            upper = max(upper, total, tail)
        per_channel.append(channel_best)
    upper = max(upper, best)
    return LambdaEstimate(
        value=float(best),
        upper=float(upper),
        n_max=n_max,
        argmax=argmax,
        per_channel=tuple(float(v) for v in per_channel),
    )


def lambda_for_lipschitz(
    lip: LipschitzData, tau: int, r: int, c: float, n_max: int = DEFAULT_N_MAX
) -> LambdaEstimate:
    """lambda for the majorant system |c_i(m)| = c_i+ and H_i(m) = sum_j H_ij."""
    c_plus = [float(v) for v in lip.c_plus]
    rows = [float(v) for v in lip.row_sums]
    return lambda_numeric(
        lambda i, _m: c_plus[i],
        lambda i, _m: rows[i],
        n_channels=lip.n_channels,
        tau=tau,
        r=r,
        c=c,
        n_max=n_max,
        period=1,
    )


# ---------------------------------------------------------------------------
# mu-search and row dominance
# ---------------------------------------------------------------------------


def _nu(lip: LipschitzData) -> tuple[float, ...]:
    nu = []
    for c_plus, h in zip(lip.c_plus, lip.row_sums, strict=True):
        if c_plus > 0:
            nu.append(-math.log(float(c_plus)))
        else:
            # min rather than max: e^{-nu_i} must stay below 1 - H_i so slack(0) > 0
            nu.append(-math.log(min(_ZERO_LEAK_BASE, (1.0 - float(h)) / 2.0)))
    return tuple(nu)


def _feasibility(
    nu: Sequence[float], rows: Sequence[float], tau: int, r: int
) -> Callable[[float], float]:
    def slack(mu: float) -> float:
        shrink = math.exp(mu * r / (tau + 1))
        return min(
            math.expm1(v - mu) * math.exp(-v) * shrink - h for v, h in zip(nu, rows, strict=True)
        )

    return slack


def _lambda_bound(mu: float, nu: Sequence[float], rows: Sequence[float], tau: int, r: int) -> float:
    grow = math.exp(-mu * r / (tau + 1))
    return max(
        (grow * math.exp(v) / math.expm1(v - mu) * h if h else 0.0)
        for v, h in zip(nu, rows, strict=True)
    )


def mu_search(
    lip: LipschitzData, tau: int, r: int, *, fraction: float = 1.0
) -> MuSearchResult:
    """Largest mu in (0, min nu_i) with (e^{nu_i - mu} - 1) e^{-nu_i} e^{mu r/(tau+1)} > H_i.

    ``fraction`` in (0, 1] scales the returned mu below the bisected supremum; smaller
    values trade decay rate for a smaller constant C.
    """
    if not 0 < fraction <= 1:
        raise DomainError(f"mu fraction must lie in (0, 1], got {fraction}")
    if r > -tau:
        raise DomainError(f"r={r} must satisfy r <= -tau = {-tau}")
    failing = [i + 1 for i, v in enumerate(row_margins(lip)) if not v > 0]
    if failing:
        raise CertificateError(
            f"Row dominance fails on rows {failing}; mu_search needs 1 - c_i+ > sum_j H_ij"
        )
    nu = _nu(lip)
    rows = [float(v) for v in lip.row_sums]
    slack = _feasibility(nu, rows, tau, r)
    nu_min = min(nu)

    if slack(0.0) <= 0:
        raise CertificateError(
            "Row dominance fails at mu = 0; mu_search needs 1 - c_i+ > sum_j H_ij"
        )
    if slack(nu_min) >= 0:
        mu_sup = nu_min
    else:
        mu_sup = bisect(slack, 0.0, nu_min, rtol=MU_RTOL, xtol=1e-300)

    # back off geometrically until the computed slack is positive
    mu, step = mu_sup * (1.0 - MU_RTOL), 1e-9
    for _ in range(64):
        if mu > 0 and slack(mu) > 0:
            break
        mu *= 1.0 - step
        step = min(2.0 * step, 0.5)
    else:
        raise CertificateError(f"No feasible mu found below {mu_sup!r}")
    mu *= fraction

    c = math.exp(-mu)
    lam = _lambda_bound(mu, nu, rows, tau, r)
    if not lam < 1:
        raise CertificateError(f"lambda bound {lam!r} is not below 1 at mu = {mu!r}")
    result = MuSearchResult(
        mu=mu,
        nu=nu,
        c=c,
        zeta=c ** (1.0 / (tau + 1)),
        C=c ** (r / (tau + 1) - 1) / (1.0 - lam),
        lambda_bound=lam,
        mu_supremum=mu_sup,
    )
    logger.debug("mu-search: mu=%.6g (sup %.6g), lambda bound %.6g", mu, mu_sup, lam)
    return result


def row_margins(lip: LipschitzData) -> tuple[Scalar, ...]:
    """1 - c_i+ - sum_j H_ij per row."""
    return tuple(1 - c - h for c, h in zip(lip.c_plus, lip.row_sums, strict=True))


def margins_positive(margins: Sequence[Scalar], tol: float = FLOAT_MARGIN_TOL) -> bool:
    """Strict positivity; exact values compare with 0, floats with tol."""
    return all(v > 0 if linalg.is_exact_scalar(v) else v > tol for v in margins)


def certify_row_dominance(
    lip: LipschitzData,
    tau: int,
    r: int,
    *,
    mu_fraction: float = 1.0,
    n_max: int = DEFAULT_N_MAX,
    route: str = "row-dominance",
    margin_tol: float = FLOAT_MARGIN_TOL,
) -> StabilityCertificate:
    """Certify 1 - c_i+ > sum_j H_ij for every row, with decay constants when it holds.

    ``margin_tol`` only applies to float margins; exact margins compare with 0.
    """
    margins = row_margins(lip)
    if not margins_positive(margins, margin_tol):
        failing = [i + 1 for i, v in enumerate(margins) if not margins_positive([v], margin_tol)]
        logger.info("Row dominance fails on rows %s", failing)
        return StabilityCertificate(
            verdict=Verdict.NOT_CERTIFIED,
            route=route,
            per_row_margin=margins,
            lipschitz=lip,
            notes=[f"row dominance fails on rows {failing}"],
        )

    found = mu_search(lip, tau, r, fraction=mu_fraction)
    estimate = lambda_for_lipschitz(lip, tau, r, found.c, n_max)
    return StabilityCertificate(
        verdict=Verdict.CERTIFIED,
        route=route,
        per_row_margin=margins,
        mu=found.mu,
        nu=found.nu,
        c=found.c,
        lambda_bound=found.lambda_bound,
        lambda_numeric=estimate.value,
        lambda_upper=estimate.upper,
        C=found.C,
        zeta=found.zeta,
        lipschitz=lip,
    )


# ---------------------------------------------------------------------------
# M-matrices and rescaling
# ---------------------------------------------------------------------------


def _as_matrix(matrix: Sequence[Sequence[Scalar]]) -> tuple[tuple[Scalar, ...], ...]:
    linalg.check_square(matrix)
    return tuple(tuple(row) for row in matrix)


def certify_m_matrix(
    matrix: Sequence[Sequence[Scalar]], *, tol: float = FLOAT_MARGIN_TOL
) -> MMatrixReport:
    """Nonsingular M-matrix test by leading principal minors, with witness d = M^{-1} 1.

    Rational input takes the exact path. Float minors count as positive above
    tol * ||M||_inf^k for the k-th minor.
    """
    M = _as_matrix(matrix)
    n = len(M)
    exact = linalg.is_exact(M)
    is_z = linalg.is_z_matrix(M)

    if exact:
        minors: tuple[Scalar, ...] = tuple(linalg.exact_leading_minors(M))
        positive = [v > 0 for v in minors]
    else:
        minors = tuple(linalg.float_leading_minors(M))
        norm = max(linalg.infinity_norm(M), 1.0)
        positive = [v > tol * norm ** (k + 1) for k, v in enumerate(minors)]

    report = MMatrixReport(
        is_z_matrix=is_z,
        leading_minors=minors,
        is_nonsingular_m=False,
        matrix=M,
        is_exact=exact,
    )
    if not is_z:
        return replace(report, note="off-diagonal entry is positive; not a Z-matrix")
    if not all(positive):
        return replace(report, note=f"leading minor {positive.index(False) + 1} is not positive")

    ones = [Fraction(1)] * n if exact else [1.0] * n
    d = linalg.exact_solve(M, ones) if exact else linalg.float_solve(M, ones)
    image = linalg.matvec(M, d)
    if not (margins_positive(d, 0.0) and margins_positive(image, 0.0)):
        return replace(report, note="witness d = M^{-1} 1 failed the positivity check")
    return replace(report, is_nonsingular_m=True, witness_d=tuple(d))


def comparison_matrix(lip: LipschitzData) -> tuple[tuple[Scalar, ...], ...]:
    """I - diag(c+) - H."""
    n = lip.n_channels
    return tuple(
        tuple((1 - lip.c_plus[i] if i == j else 0) - lip.H[i][j] for j in range(n))
        for i in range(n)
    )


def check_witness(d: Sequence[Scalar], n: int) -> tuple[Scalar, ...]:
    if len(d) != n:
        raise ShapeError(f"Witness has length {len(d)}, expected {n}")
    if any(not v > 0 for v in d):
        raise DomainError(f"Witness entries must be positive, got {list(d)}")
    return tuple(d)


def rescale_by_witness(lip: LipschitzData, d: Sequence[Scalar]) -> LipschitzData:
    """H~_ij = d_i^{-1} H_ij d_j; c+ is unchanged."""
    d = check_witness(d, lip.n_channels)
    return LipschitzData(
        H=tuple(
            tuple(h * d[j] / d[i] for j, h in enumerate(row)) for i, row in enumerate(lip.H)
        ),
        c_plus=lip.c_plus,
    )


def coordinate_factor(d: Sequence[Scalar]) -> float:
    return float(max(d)) / float(min(d))


def certify_via_m_matrix(
    lip: LipschitzData,
    tau: int,
    r: int,
    *,
    mu_fraction: float = 1.0,
    n_max: int = DEFAULT_N_MAX,
    route: str = "m-matrix",
) -> StabilityCertificate:
    """Certify through the comparison matrix and the d-rescaled row dominance."""
    report = certify_m_matrix(comparison_matrix(lip))
    if not report.is_nonsingular_m:
        logger.info("Comparison matrix is not a nonsingular M-matrix: %s", report.note)
        return StabilityCertificate(
            verdict=Verdict.NOT_CERTIFIED,
            route=route,
            per_row_margin=row_margins(lip),
            lipschitz=lip,
            m_matrix=report,
            notes=[report.note],
        )
    d = report.witness_d
    assert d is not None
    # M d = 1 puts the rescaled margins at 1/d_i, so the float tolerance scales with max(d)
    cert = certify_row_dominance(
        rescale_by_witness(lip, d),
        tau,
        r,
        mu_fraction=mu_fraction,
        n_max=n_max,
        route=route,
        margin_tol=FLOAT_MARGIN_TOL / max(1.0, float(max(d))),
    )
    if not cert.certified:
        raise CertificateError("M-matrix witness did not yield row dominance after rescaling")
    return replace(
        cert,
        witness_d=d,
        coordinate_factor=coordinate_factor(d),
        m_matrix=report,
    )


# ---------------------------------------------------------------------------
# Direct route from the hypotheses on a general system
# ---------------------------------------------------------------------------


def certify_hypotheses(
    system: SystemDefinition,
    lipschitz_bound: Callable[[int, int], float],
    c: float,
    n_max: int = DEFAULT_N_MAX,
) -> StabilityCertificate:
    """Check lambda < 1 for a caller-chosen c in (0, 1].

    c < 1 with lambda < 1 certifies exponential stability with the envelope
    C = c^{r/(tau+1) - 1} / (1 - lambda) and zeta = c^{1/(tau+1)}. c = 1 gives uniform
    stability only, with no decay constants.
    """
    tau, r = system.leakage_delay, system.window_start
    estimate = lambda_numeric(
        system.leakage_coeff,
        lipschitz_bound,
        n_channels=system.n_channels,
        tau=tau,
        r=r,
        c=c,
        n_max=n_max,
        period=system.period,
    )
    margins = tuple(1.0 - v for v in estimate.per_channel)
    common: dict[str, Any] = {
        "route": "hypotheses",
        "per_row_margin": margins,
        "c": c,
        "lambda_numeric": estimate.value,
        "lambda_upper": estimate.upper,
    }
    if not estimate.upper < 1:
        return StabilityCertificate(
            verdict=Verdict.NOT_CERTIFIED,
            notes=[f"lambda upper bound {estimate.upper:.6g} is not below 1"],
            **common,
        )
    if c == 1:
        return StabilityCertificate(verdict=Verdict.UNIFORM_ONLY, mu=0.0, **common)
    return StabilityCertificate(
        verdict=Verdict.CERTIFIED,
        mu=-math.log(c),
        lambda_bound=estimate.upper,
        C=c ** (r / (tau + 1) - 1) / (1.0 - estimate.upper),
        zeta=c ** (1.0 / (tau + 1)),
        **common,
    )
