import numpy as np
import pytest

from meshgen import bar_mesh, two_shell_mesh, unit_tet

from cdskin import MaterialField, assemble_operators


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)


@pytest.fixture(scope="session")
def small_bar():
    return bar_mesh(3, 1, 1)


@pytest.fixture(scope="session")
def small_bar_ops(small_bar):
    mat = MaterialField.homogeneous(small_bar.t, mu=2.0, density=1.5)
    return mat, assemble_operators(small_bar, mat)


@pytest.fixture(scope="session")
def shell_mesh():
    return two_shell_mesh()


@pytest.fixture
def single_tet():
    return unit_tet()
