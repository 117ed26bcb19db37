import numpy as np
import pytest

from tractorcurves.models import make_model


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def hyperbolic():
    return make_model("hyperbolic", 3)


@pytest.fixture(scope="session")
def sphere():
    return make_model("sphere", 3)


@pytest.fixture(scope="session")
def euclidean():
    return make_model("euclidean", 3)


@pytest.fixture(scope="session")
def anisotropic():
    return make_model("anisotropic", 3)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
