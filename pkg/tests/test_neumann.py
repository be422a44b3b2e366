"""
Tests for the Neumann solver on a cornered polygon mesh
"""
import numpy as np
import pytest

from polyscal.errors import Incompatible
from polyscal.mesh import slice_mesh
from polyscal.solver import neumann_solve


@pytest.fixture
def square(cube):
    """Unit square at mid-height of the cube, 16 divisions"""
    return slice_mesh(cube, 0.5, 16)


def test_cosine_mode(square, flat_cube):
    """Laplace cos(pi x) = -pi^2 cos(pi x) with zero normal derivative"""
    x = square.vertices[:, 0]
    exact = np.cos(np.pi * x)
    u = neumann_solve(square, -np.pi ** 2 * exact, field=flat_cube)
    assert np.max(np.abs(u - exact)) < 0.02


def test_boundary_flux(square, flat_cube):
    """u = x^2 / 2 has Laplace u = 1, outward derivative 1 on x = 1 and 0 on the other sides"""
    x = square.vertices[:, 0]
    g = np.zeros(square.n_vertices)
    g[np.isclose(x, 1.0)] = 1.0
    # corners carry half a segment on the flux-free side
    g[np.intersect1d(square.corners, np.flatnonzero(np.isclose(x, 1.0)))] = 0.5
    u = neumann_solve(square, np.ones(square.n_vertices), g, field=flat_cube)
    exact = 0.5 * x ** 2
    exact -= exact.mean()
    assert np.max(np.abs((u - u.mean()) - exact)) < 0.02


def test_zero_mean(square, flat_cube):
    u = neumann_solve(square, -np.pi ** 2 * np.cos(np.pi * square.vertices[:, 1]), field=flat_cube)
    assert abs(float(np.mean(u))) < 1e-3


def test_incompatible_data(square):
    """A constant source without boundary flux cannot be balanced"""
    with pytest.raises(Incompatible):
        neumann_solve(square, np.ones(square.n_vertices))


def test_zero_data(square):
    assert np.array_equal(neumann_solve(square, np.zeros(square.n_vertices)), np.zeros(square.n_vertices))
