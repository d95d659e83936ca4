from pathlib import Path

import pytest

from sliceforge.gateway.scenario import build_context, load_scenario

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture
def reference_scenario():
    return load_scenario(SCENARIOS / "reference.yaml")


@pytest.fixture
def operator_scenario():
    return load_scenario(SCENARIOS / "operator.yaml")


@pytest.fixture
def sweep_scenario():
    return load_scenario(SCENARIOS / "sweep.yaml")


@pytest.fixture
def reference_context(reference_scenario):
    return build_context(reference_scenario)


@pytest.fixture
def operator_context(operator_scenario):
    return build_context(operator_scenario)


@pytest.fixture
def sweep_context(sweep_scenario):
    return build_context(sweep_scenario)
