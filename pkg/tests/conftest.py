from __future__ import annotations

import numpy as np
import pytest

from nsklab.spectral import Grid


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=[1, 2], ids=["1d", "2d"])
def grid(request):
    return Grid(request.param, 64 if request.param == 1 else 32)


def rel_err(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    den = max(float(np.max(np.abs(b))), 1e-300)
    return float(np.max(np.abs(a - b))) / den


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
