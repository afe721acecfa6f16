from pathlib import Path

import pytest

from ringup import SystemParams, diagonalize
from ringup.config import load_config
from ringup.runner import Context

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"

ACCEPTANCE_LINES: list[str] = []


def scenario(name: str):
    return load_config(SCENARIOS / f"{name}.yaml")


@pytest.fixture(scope="session")
def default_basis():
    return diagonalize(SystemParams())


@pytest.fixture(scope="session")
def small_basis():
    return diagonalize(SystemParams(n_res=60))


@pytest.fixture(scope="session")
def fig2_ctx():
    return Context(scenario("fig2"))


@pytest.fixture(scope="session")
def fig3a_ctx():
    return Context(scenario("fig3a"))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
