import pytest

from cqed_readout.experiments import simulate_pair
from cqed_readout.models import PhysicalParams


def pytest_configure(config):
    config.acceptance_lines = {}


def pytest_terminal_summary(terminalreporter, config):
    lines = config.acceptance_lines
    if not lines:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for key in sorted(lines, key=lambda k: (int("".join(c for c in k if c.isdigit())), k)):
        terminalreporter.write_line(lines[key])


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line: criterion(label, ok, detail)."""

    def record(label, ok, detail):
        line = f"criterion {label}: {'PASS' if ok else 'FAIL'}  {detail}"
        request.config.acceptance_lines[label] = line
        print(line)
        return ok

    return record


@pytest.fixture(scope="session")
def defaults():
    return PhysicalParams()


@pytest.fixture(scope="session")
def three_level_pair(defaults):
    return simulate_pair("three_level", defaults)


@pytest.fixture(scope="session")
def four_level_pair(defaults):
    return simulate_pair("four_level", defaults)
