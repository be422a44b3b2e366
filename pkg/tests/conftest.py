"""
Pytest configuration and fixtures: domains, metrics and meshes
"""
import numpy as np
import pytest

from polyscal.fields import FlatMetric, MetricFactory
from polyscal.geometry import PolyhedralDomain
from polyscal.mesh import slice_mesh


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: minimizer, foliation and eigen-solver runs on finer meshes")


UNIT_SQUARE = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]


@pytest.fixture(scope="session")
def cube() -> PolyhedralDomain:
    """Unit cube as a prism over the unit square"""
    return PolyhedralDomain.unit_cube()


@pytest.fixture(scope="session")
def square_cone() -> PolyhedralDomain:
    """Right cone over the unit square with apex above its center"""
    return PolyhedralDomain.cone(UNIT_SQUARE, [0.5, 0.5, 1.0])


@pytest.fixture(scope="session")
def triangle_cone() -> PolyhedralDomain:
    """Oblique cone over a triangle"""
    return PolyhedralDomain.cone([[0.0, 0.0], [1.0, 0.0], [0.3, 0.9]], [0.4, 0.3, 0.8])


@pytest.fixture(scope="session")
def frustum() -> PolyhedralDomain:
    """Prism with a shrunken top, side faces at a constant angle to the base"""
    return PolyhedralDomain.prism(UNIT_SQUARE, 0.5, [0.25, 0.25, 0.5])


@pytest.fixture(scope="session")
def flat_cube(cube):
    """Euclidean metric on the cube's metric box"""
    return FlatMetric(cube.metric_box())


@pytest.fixture(scope="session")
def flat_cone(square_cone):
    """Euclidean metric on the square cone's metric box"""
    return FlatMetric(square_cone.metric_box())


@pytest.fixture(scope="session")
def saddle_cube(cube):
    """Conformal metric with R > 0 and mean convex cube faces"""
    return MetricFactory.create("conformal_saddle", box=cube.metric_box(), eps=0.1, delta=0.05)


@pytest.fixture(scope="session")
def gaussian_cone(square_cone):
    """Conformal Gaussian bump centered at the cone's apex"""
    return MetricFactory.create("conformal_gaussian", box=square_cone.metric_box(),
                                eps=0.1, sigma=1.0, center=[0.5, 0.5, 1.0])


@pytest.fixture
def cube_slice(cube):
    """Mid-height slice of the unit cube, 8 divisions per side"""
    return slice_mesh(cube, 0.5, 8)


@pytest.fixture
def cone_slice(square_cone):
    """Half-height slice of the square cone, 8 divisions per side"""
    return slice_mesh(square_cone, 0.5, 8)


@pytest.fixture
def rng():
    """Seeded random generator"""
    return np.random.default_rng(0)
