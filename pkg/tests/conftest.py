import numpy as np
import pytest

from src.fem.assembly import MaterialParams
from src.fem.mesh import build_interval_mesh, build_rect_mesh
from src.linalg.solvers import SolverConfig, SolverMethod


def pytest_addoption(parser):
    parser.addoption("--seed", action="store", type=int, default=1234,
                     help="seed of the randomized property tests")


@pytest.fixture
def seed(request):
    return request.config.getoption("--seed")


@pytest.fixture
def rng(seed):
    return np.random.default_rng(seed)


@pytest.fixture
def mesh_1d():
    return build_interval_mesh(0.0, 1.0, 32)


@pytest.fixture
def coarse_mesh_1d():
    return build_interval_mesh(0.0, 1.0, 16)


@pytest.fixture
def mesh_2d():
    return build_rect_mesh((0.0, 1.0), (0.0, 1.0), 4, 4)


@pytest.fixture
def material():
    return MaterialParams()


@pytest.fixture
def direct():
    return SolverConfig(method=SolverMethod.DIRECT)
