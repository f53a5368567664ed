"""Certification dispatcher -- routes each model family to its certificate routes."""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import replace

from leakstab.certificates import (
    StabilityCertificate,
    certify_m_matrix,
    certify_row_dominance,
    certify_via_m_matrix,
    comparison_matrix,
    coordinate_factor,
)
from leakstab.config import CertificateSettings
from leakstab.errors import CertificateError
from leakstab.models import (
    BAMSpec,
    HighOrderSpec,
    HopfieldSpec,
    ModelSpec,
    high_order_condition,
    search_high_order_witness,
)

logger = logging.getLogger("leakstab.routes")


def _certify_linear(
    spec: HopfieldSpec | BAMSpec, settings: CertificateSettings, matrix_route: str
) -> StabilityCertificate:
    """Direct row dominance first, then the comparison matrix with its witness."""
    lip = spec.lipschitz_data()
    tau, r = spec.tau, spec.window_start
    report = certify_m_matrix(comparison_matrix(lip))
    direct = certify_row_dominance(
        lip, tau, r, mu_fraction=settings.mu_fraction, n_max=settings.n_max
    )
    if direct.certified:
        return replace(direct, m_matrix=report)
    cert = certify_via_m_matrix(
        lip, tau, r, mu_fraction=settings.mu_fraction, n_max=settings.n_max, route=matrix_route
    )
    if not cert.certified:
        return replace(cert, per_row_margin=direct.per_row_margin, notes=direct.notes + cert.notes)
    return cert


def _certify_hopfield(spec: ModelSpec, settings: CertificateSettings) -> StabilityCertificate:
    assert isinstance(spec, HopfieldSpec)
    return _certify_linear(spec, settings, "m-matrix")


def _certify_bam(spec: ModelSpec, settings: CertificateSettings) -> StabilityCertificate:
    assert isinstance(spec, BAMSpec)
    return _certify_linear(spec, settings, "p-matrix")


def _certify_high_order(spec: ModelSpec, settings: CertificateSettings) -> StabilityCertificate:
    """Weighted condition with d = 1, otherwise with the witness of the comparison matrix."""
    assert isinstance(spec, HighOrderSpec)
    tau, r = spec.tau, spec.window_start
    report = search_high_order_witness(spec)
    unit = spec.lipschitz_data()
    direct = certify_row_dominance(
        unit, tau, r, mu_fraction=settings.mu_fraction, n_max=settings.n_max, route="high-order"
    )
    if direct.certified:
        return replace(direct, m_matrix=report)
    if not report.is_nonsingular_m:
        logger.info("High-order comparison matrix has no witness: %s", report.note)
        return replace(direct, m_matrix=report, notes=[*direct.notes, report.note])

    d = report.witness_d
    assert d is not None
    if not all(v > 0 for v in high_order_condition(spec, d)):
        raise CertificateError("Comparison-matrix witness does not satisfy the weighted condition")
    cert = certify_row_dominance(
        spec.lipschitz_data(d),
        tau,
        r,
        mu_fraction=settings.mu_fraction,
        n_max=settings.n_max,
        route="high-order",
    )
    if not cert.certified:
        raise CertificateError("Weighted condition holds but rescaled row dominance fails")
    return replace(cert, witness_d=d, coordinate_factor=coordinate_factor(d), m_matrix=report)


ROUTES: dict[str, Callable[[ModelSpec, CertificateSettings], StabilityCertificate]] = {
    "hopfield": _certify_hopfield,
    "bam": _certify_bam,
    "high_order": _certify_high_order,
}


def certify_spec(
    spec: ModelSpec, settings: CertificateSettings | None = None
) -> StabilityCertificate:
    """Certify a model through every route its family supports."""
    settings = settings or CertificateSettings()
    route = ROUTES.get(spec.kind)
    if route is None:
        raise CertificateError(f"No certification route for model kind {spec.kind!r}")
    cert = route(spec, settings)
    logger.info(
        "Model %s: %s via %s",
        getattr(spec, "name", spec.kind),
        cert.verdict.value,
        cert.route,
    )
    return cert

