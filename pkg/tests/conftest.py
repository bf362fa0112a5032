from pathlib import Path

import numpy as np
import pytest

from pvqa.problems import GppInstance, QkpInstance, gen_gpp, qkp_ensemble

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def gpp8():
    """Ten seeded 8-node graphs at edge density 0.5."""
    return [gen_gpp(8, 0.5, seed=s) for s in range(10)]


@pytest.fixture(scope="session")
def qkp8():
    return qkp_ensemble(8, 10, seed=0)


@pytest.fixture
def path_graph():
    return GppInstance(4, ((0, 1), (1, 2), (2, 3)))


@pytest.fixture
def k4():
    return GppInstance(4, tuple((i, j) for i in range(4) for j in range(i + 1, 4)))


@pytest.fixture
def toy_qkp():
    return QkpInstance(2, {(0, 0): 3, (1, 1): 5, (0, 1): 2}, (1, 1), 2)


def random_qubo(n, rng, density=0.7):
    from pvqa.model import Qubo

    linear = {i: float(rng.normal()) for i in range(n)}
    quad = {(i, j): float(rng.normal()) for i in range(n) for j in range(i + 1, n) if rng.random() < density}
    return Qubo(n, linear, quad, float(rng.normal()))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(lines):
        terminalreporter.write_line(lines[key])
