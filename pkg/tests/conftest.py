import numpy as np
import pytest

from extdicke.model import ModelParams


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def fig2_params():
    """omega=1, delta=1, Omega=-0.2, kappa=0.5: inside the transition window."""
    return ModelParams(1.0, 1.0, 0.0, -0.2, 0.5, 16)


_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(number, ok, detail)``; asserts ``ok``."""

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _CRITERIA[number] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])
