import numpy as np
import pytest

from lcdroplet import build_operators, build_structured_mesh


@pytest.fixture(scope="session")
def mesh2():
    return build_structured_mesh(2, 2)


@pytest.fixture(scope="session")
def ops2(mesh2):
    return build_operators(mesh2)


@pytest.fixture(scope="session")
def mesh4():
    return build_structured_mesh(4, 4)


@pytest.fixture(scope="session")
def ops4(mesh4):
    return build_operators(mesh4)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
