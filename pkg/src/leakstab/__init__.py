"""leakstab: stability certificates and periodic orbits for delay difference equations with
leakage delay."""

from leakstab.certificates import (
    LipschitzData,
    StabilityCertificate,
    Verdict,
    certify_hypotheses,
    certify_m_matrix,
    certify_row_dominance,
    certify_via_m_matrix,
    lambda_numeric,
    mu_search,
    rescale_by_witness,
)
from leakstab.config import ConfigError, load_model
from leakstab.engine import (
    check_exponential_bound,
    check_lemma_inequality,
    find_equilibrium,
    find_periodic_orbit,
    poincare_map,
    simulate,
)
from leakstab.errors import LeakstabError
from leakstab.models import BAMSpec, HighOrderSpec, HopfieldSpec
from leakstab.routes import certify_spec
from leakstab.state import HistoryState, SystemDefinition, Trajectory, state_distance, sup_norm

__all__ = [
    "BAMSpec",
    "ConfigError",
    "HighOrderSpec",
    "HistoryState",
    "HopfieldSpec",
    "LeakstabError",
    "LipschitzData",
    "StabilityCertificate",
    "SystemDefinition",
    "Trajectory",
    "Verdict",
    "certify_hypotheses",
    "certify_m_matrix",
    "certify_row_dominance",
    "certify_spec",
    "certify_via_m_matrix",
    "check_exponential_bound",
    "check_lemma_inequality",
    "find_equilibrium",
    "find_periodic_orbit",
    "lambda_numeric",
    "load_model",
    "mu_search",
    "poincare_map",
    "rescale_by_witness",
    "simulate",
    "state_distance",
    "sup_norm",
]
