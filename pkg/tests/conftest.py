import numpy as np
import pytest

from graspforge.geometry import (
    box_mesh,
    build_surface_model,
    icosphere,
    tetrahedron_mesh,
)


@pytest.fixture(scope="session")
def unit_sphere_mesh():
    return icosphere(1.0, 3)


@pytest.fixture(scope="session")
def unit_sphere_model(unit_sphere_mesh):
    return build_surface_model(unit_sphere_mesh, 64)


@pytest.fixture(scope="session")
def unit_cube_mesh():
    return box_mesh([1.0, 1.0, 1.0])


@pytest.fixture(scope="session")
def unit_cube_model(unit_cube_mesh):
    return build_surface_model(unit_cube_mesh, 64)


@pytest.fixture(scope="session")
def tetra_model():
    return build_surface_model(tetrahedron_mesh(0.1), 32)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
