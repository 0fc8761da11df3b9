import os

import pytest

from config.settings import settings
from lattice.corpus import ghz, plus_product
from lattice.gates import GateSet
from oracle.service import OracleConfig

SCENARIO_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "data", "scenarios")


def scenario_path(name: str) -> str:
    return os.path.join(SCENARIO_DIR, f"{name}.json")


@pytest.fixture
def gate_set():
    return GateSet.default()


@pytest.fixture
def exact_oracle():
    return OracleConfig(mode="exact", budget=6)


@pytest.fixture
def ghz2():
    return ghz(2)


@pytest.fixture
def plus2():
    return plus_product(2)


@pytest.fixture(autouse=True)
def no_cache_dir(monkeypatch, tmp_path):
    monkeypatch.setattr(settings, "CACHE_DIR", str(tmp_path / "cache"))
    monkeypatch.setattr(settings, "CACHE_ENABLED", False)
