import numpy as np
import pytest

from quenched_clt import Cosine, Ensemble, MapSystem, SelectionProcess


@pytest.fixture
def beta23():
    return MapSystem.beta((2.0, 3.0))


@pytest.fixture
def sticky_chain():
    return SelectionProcess.markov(((0.9, 0.1), (0.1, 0.9)))


@pytest.fixture
def cos2pi():
    return Cosine(1)


@pytest.fixture
def small_sample():
    return Ensemble.sample(2048, seed=11)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


# acceptance results, printed as one line per criterion at the end of the session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
