import pytest
from hypothesis import settings

from qtube.fileio import toy3x2, toy3x2_q0

settings.register_profile("suite", max_examples=200, derandomize=True, deadline=None)
settings.load_profile("suite")
from qtube.geometry import toy_basis, tube_from_report
from qtube.solver import solve_qstar


@pytest.fixture(scope="session")
def toy():
    return toy3x2()


@pytest.fixture(scope="session")
def toy_report(toy):
    return solve_qstar(toy, tol=1e-10)


@pytest.fixture(scope="session")
def toy_tube(toy_report):
    return tube_from_report(toy_report)


@pytest.fixture(scope="session")
def toy_plane():
    return toy_basis()


@pytest.fixture(scope="session")
def toy_q0():
    return toy3x2_q0()
