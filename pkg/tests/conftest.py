import pytest

from servipricer.model import TariffPlan, table3_params
from servipricer.simulate import ObservationLaw, SimulationConfig, simulate_portfolio

_ACCEPTANCE_LINES: list[str] = []


def record_acceptance(name: str, passed: bool, detail: str) -> str:
    line = f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}"
    _ACCEPTANCE_LINES.append(line)
    print(line)
    return line


@pytest.fixture(scope="session")
def acceptance_log():
    return record_acceptance


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def truth():
    return table3_params()


@pytest.fixture(scope="session")
def plan_c():
    return TariffPlan.named("c")


@pytest.fixture(scope="session")
def small_dataset(truth):
    """400 machines over five years at the reference parameters."""
    return simulate_portfolio(SimulationConfig(400, ObservationLaw("fixed", 5.0), 11, truth))


@pytest.fixture(scope="session")
def medium_dataset(truth):
    return simulate_portfolio(SimulationConfig(1000, ObservationLaw("fixed", 5.0), 5, truth))
