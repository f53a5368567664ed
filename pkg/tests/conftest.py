"""Shared fixtures: the bundled two-neuron network."""

from __future__ import annotations

import pytest

from leakstab.config import LoadedModel, bundled_fixture, load_model, seed_state
from leakstab.models import HopfieldSpec
from leakstab.state import HistoryState, SystemDefinition


@pytest.fixture()
def example() -> LoadedModel:
    return load_model(bundled_fixture())


@pytest.fixture()
def example_spec(example: LoadedModel) -> HopfieldSpec:
    return example.spec


@pytest.fixture()
def example_system(example_spec: HopfieldSpec) -> SystemDefinition:
    return example_spec.lower()


@pytest.fixture()
def example_seeds(example: LoadedModel) -> list[HistoryState]:
    spec = example.spec
    return [seed_state(s, spec.n_channels, spec.window_start) for s in example.seeds]
