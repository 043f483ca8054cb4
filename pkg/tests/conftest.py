import numpy as np
import pytest

from circfluct.brownian import TimeGrid, generate_ensemble


@pytest.fixture(scope="session")
def ensemble_201():
    """The moderate ensemble most statistical tests share: n=201, R=10^4."""
    return generate_ensemble(201, TimeGrid((0.0, 0.5, 1.0)), 10_000, seed=1234)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
