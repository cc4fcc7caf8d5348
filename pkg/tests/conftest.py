import numpy as np
import pytest

from capstrip.geometry import StripSampling, flat_shape, wavy_shape
from capstrip.spectral import TorusGrid


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def grid1():
    return TorusGrid(1, 64)


@pytest.fixture(scope="session")
def grid2():
    return TorusGrid(2, 24)


@pytest.fixture(scope="session")
def sampling1(grid1):
    return StripSampling(grid1, 32)


@pytest.fixture(scope="session")
def wavy1(grid1):
    return wavy_shape(grid1, 0.1, bottom_amplitude=0.1)


@pytest.fixture(scope="session")
def flat1(grid1):
    return flat_shape(grid1)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance") or __import__("sys").modules.get(
        "tests.test_acceptance")
    lines = getattr(mod, "RESULTS", {}) if mod else {}
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
