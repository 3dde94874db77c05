import numpy as np
import pytest

from bilapeig.model import RadialGrid, default_potential
from bilapeig.persistence import persistence_report
from bilapeig.spectral import find_eigenvalue

# modes covered by the shared persistence report; enough for k = 1, 2, 5 oracles
REPORT_KMAX = 6


@pytest.fixture(scope="session")
def grid():
    return RadialGrid.uniform()


@pytest.fixture(scope="session")
def potential(grid):
    return default_potential(grid)


@pytest.fixture(scope="session")
def spec(potential):
    return find_eigenvalue(potential)


@pytest.fixture(scope="session")
def report(spec):
    return persistence_report(spec, REPORT_KMAX)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
