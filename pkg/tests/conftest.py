import pytest

from hkforge.models import ov_model, pentagon_model
from hkforge.semiflat import ModelPoint
from hkforge.solver import solve


@pytest.fixture(scope="session")
def ov():
    return ov_model()


@pytest.fixture(scope="session")
def pentagon():
    return pentagon_model()


@pytest.fixture(scope="session")
def ov_point():
    return ModelPoint(0.5, 1.0, (0.3, 1.1))


@pytest.fixture(scope="session")
def ov_solution(ov, ov_point):
    return solve(ov, ov_point)


@pytest.fixture(scope="session")
def pentagon_point():
    # strong-coupling point with asymmetric |Z| so corrections are visible
    return ModelPoint(1.5 + 0.2j, 2.0, (0.37, 1.29))


@pytest.fixture(scope="session")
def pentagon_solution(pentagon, pentagon_point):
    return solve(pentagon, pentagon_point, tol_iter=1e-12)
