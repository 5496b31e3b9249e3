import math

import numpy as np
import pytest

from borncount import gaussian_ket, halfline_partition, uniform_grid

# Upper standard-normal tail at x = 1, i.e. 0.5 * erfc(1 / sqrt 2).
GAUSS_TAIL_1 = 0.15865525393145707


@pytest.fixture(scope="session")
def gauss_grid():
    return uniform_grid(-8.0, 8.0, 2**16)


@pytest.fixture(scope="session")
def gauss_psi(gauss_grid):
    return gaussian_ket(gauss_grid)


@pytest.fixture(scope="session")
def halfline(gauss_grid):
    return halfline_partition(gauss_grid, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def gauss_tail_oracle(x):
    return 0.5 * math.erfc(x / math.sqrt(2.0))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
