import numpy as np
import pytest

from fflsim.datagen import gen_ridge_scenario


@pytest.fixture
def ridge5():
    return gen_ridge_scenario(5, [20, 30, 40, 50, 60], seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
