import numpy as np
import pytest

from semitreat import from_arms


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def normal_view():
    r = np.random.default_rng(2024)
    return from_arms(r.standard_normal(4000), r.standard_normal(4000))


@pytest.fixture(scope="session")
def cauchy_view():
    r = np.random.default_rng(99)
    return from_arms(r.standard_cauchy(4000), r.standard_cauchy(4000))


# acceptance lines, echoed in the terminal summary so they are visible
# even when pytest captures output
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
