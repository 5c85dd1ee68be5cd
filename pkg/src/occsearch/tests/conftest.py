import pytest

from occsearch.simulator import ENVIRONMENT_VARIABLE


@pytest.fixture(autouse=True)
def no_simulator_override(monkeypatch):
    monkeypatch.delenv(ENVIRONMENT_VARIABLE, raising=False)
