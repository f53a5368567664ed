"""Neural-network model families that lower to the general leakage-delay system."""

from __future__ import annotations

from collections.abc import Sequence

from leakstab.certificates import LipschitzData, rescale_by_witness
from leakstab.linalg import Scalar
from leakstab.models.bam import BAMSpec, bam_p_matrix, lower_bam
from leakstab.models.base import ModelSpec
from leakstab.models.high_order import (
    HighOrderSpec,
    high_order_comparison_matrix,
    high_order_condition,
    lower_high_order,
    search_high_order_witness,
)
from leakstab.models.hopfield import HopfieldSpec, hopfield_m_matrix, lower_hopfield


def lipschitz_data(
    spec: ModelSpec, d: Sequence[Scalar] | None = None, *, sampled: bool = False
) -> LipschitzData:
    """Bounds H and c+ of any model; a witness d rescales them to y = d^{-1} x."""
    if isinstance(spec, HighOrderSpec):
        return spec.lipschitz_data(d, sampled=sampled)
    lip = spec.lipschitz_data(sampled=sampled)
    if d is None:
        return lip
    return rescale_by_witness(lip, d)


__all__ = [
    "BAMSpec",
    "HighOrderSpec",
    "HopfieldSpec",
    "ModelSpec",
    "bam_p_matrix",
    "high_order_comparison_matrix",
    "high_order_condition",
    "hopfield_m_matrix",
    "lipschitz_data",
    "lower_bam",
    "lower_high_order",
    "lower_hopfield",
    "search_high_order_witness",
]
