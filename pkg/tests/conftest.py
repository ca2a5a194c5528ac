from importlib.resources import files
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from evsound.ir import parse_program

GOLDEN = Path(__file__).parent / "golden"

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def fig1_text() -> str:
    return files("evsound").joinpath("data/fig1.ir").read_text()


def golden(name: str) -> str:
    return (GOLDEN / name).read_text()


@pytest.fixture
def fig1():
    return parse_program(fig1_text())
