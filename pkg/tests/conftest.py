import sys

import numpy as np
import pytest

from ptdlp.energy import LogQuadraticModel
from ptdlp.space import DiscreteSpace


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def lq2():
    """A fixed d=2 binary log-quadratic target with unequal state masses."""
    return LogQuadraticModel(DiscreteSpace.binary(2), [[0.3, -0.4], [-0.4, 0.1]], [0.5, -0.2])


def three_sigma(p, n):
    return 3.0 * np.sqrt(np.asarray(p) * (1 - np.asarray(p)) / n)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
