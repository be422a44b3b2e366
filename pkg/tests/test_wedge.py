"""
Tests for closed-form wedge geometry and flat slices of the model polyhedra
"""
import numpy as np
import pytest

from polyscal.errors import BadAngle, EmptySlice, NoSolution, Tangential
from polyscal.geometry import (
    Plane,
    Wedge,
    angle_window,
    cone_slice_identity,
    corner_angle,
    corner_angle_from_planes,
    corner_angle_monotonicity_check,
    measure_contact_angles,
    plane_from_contact_angles,
    slice_section,
)


def _random_triples(rng, count, margin=0.05):
    """Contact angle pairs with openings kept away from the window boundary"""
    triples = []
    while len(triples) < count:
        g1, g2 = rng.uniform(0.1, np.pi - 0.1, size=2)
        lo, hi = angle_window(g1, g2)
        if hi - lo <= 2 * margin:
            continue
        triples.append((g1, g2, rng.uniform(lo + margin, hi - margin)))
    return triples


def test_right_angle_wedge():
    """Right contact angles in a right wedge give the plane normal to the edge"""
    wedge = Wedge.from_opening(np.pi / 2)
    nu = plane_from_contact_angles(wedge, np.pi / 2, np.pi / 2)
    assert np.allclose(nu, [0.0, 0.0, 1.0])
    assert corner_angle(np.pi / 2, np.pi / 2, np.pi / 2) == pytest.approx(np.pi / 2)


def test_window_bounds():
    """The window is (|pi - g1 - g2|, pi - |g1 - g2|)"""
    lo, hi = angle_window(np.pi / 3, np.pi / 4)
    assert lo == pytest.approx(np.pi - 7 * np.pi / 12)
    assert hi == pytest.approx(np.pi - np.pi / 12)
    with pytest.raises(BadAngle):
        angle_window(0.0, 1.0)


def test_opening_outside_window():
    """pi/4 contact angles need an opening above pi/2"""
    wedge = Wedge.from_opening(np.pi / 3)
    with pytest.raises(NoSolution):
        plane_from_contact_angles(wedge, np.pi / 4, np.pi / 4)
    with pytest.raises(NoSolution):
        corner_angle(np.pi / 4, np.pi / 4, np.pi / 3)


def test_opening_on_window_boundary():
    """An opening exactly on the boundary is tangential"""
    lo, _ = angle_window(np.pi / 3, np.pi / 3)
    with pytest.raises(Tangential):
        corner_angle(np.pi / 3, np.pi / 3, lo)


def test_bad_opening():
    with pytest.raises(BadAngle):
        Wedge.from_opening(np.pi)


def test_random_planes_reproduce_contact_angles(rng):
    """The constructed plane meets both faces at the requested angles"""
    for g1, g2, opening in _random_triples(rng, 5000):
        wedge = Wedge.from_opening(opening)
        nu = plane_from_contact_angles(wedge, g1, g2)
        assert np.linalg.norm(nu) == pytest.approx(1.0, abs=1e-14)
        assert nu @ wedge.edge > 0
        m1, m2 = measure_contact_angles(wedge, nu)
        assert abs(m1 - g1) < 1e-10 and abs(m2 - g2) < 1e-10


@pytest.mark.slow
def test_plane_exists_exactly_inside_window(rng):
    """10^5 random triples: a plane exists iff the opening lies inside the window, and it reproduces the angles"""
    count = 100_000
    g = rng.uniform(0.2, np.pi - 0.2, size=(count, 2))
    opening = rng.uniform(0.2, np.pi - 0.2, size=count)
    lo = np.abs(np.pi - g.sum(axis=1))
    hi = np.pi - np.abs(g[:, 0] - g[:, 1])
    margin = np.minimum(np.abs(opening - lo), np.abs(opening - hi))
    keep = margin > 1e-6
    inside = (lo < opening) & (opening < hi)
    assert 0.2 < inside[keep].mean() < 0.8

    worst = 0.0
    for (g1, g2), t, expected in zip(g[keep], opening[keep], inside[keep]):
        wedge = Wedge.from_opening(t)
        if expected:
            nu = plane_from_contact_angles(wedge, g1, g2)
            m1, m2 = measure_contact_angles(wedge, nu)
            worst = max(worst, abs(m1 - g1), abs(m2 - g2))
        else:
            with pytest.raises(NoSolution):
                plane_from_contact_angles(wedge, g1, g2)
    assert worst < 1e-12


def test_corner_angle_formula_matches_plane_traces(rng):
    """The closed form agrees with the angle between the traces of the constructed plane"""
    for g1, g2, opening in _random_triples(rng, 1000):
        wedge = Wedge.from_opening(opening)
        assert corner_angle_from_planes(wedge, g1, g2) == pytest.approx(corner_angle(g1, g2, opening), abs=1e-9)


def test_corner_angle_increases_with_opening(rng):
    """For fixed contact angles a wider wedge has a wider corner"""
    for g1, g2, _ in _random_triples(rng, 500):
        lo, hi = angle_window(g1, g2)
        a, b = np.sort(rng.uniform(lo + 0.05, hi - 0.05, size=2))
        assert corner_angle_monotonicity_check(g1, g2, a, b)
    with pytest.raises(ValueError):
        corner_angle_monotonicity_check(1.0, 1.0, 1.5, 1.2)


def test_domain_edge_wedge(square_cone):
    """Wedges built from model edges have the model dihedral angles"""
    model = square_cone.model_angles()
    for j in range(square_cone.k):
        wedge = Wedge.from_domain_edge(square_cone, j)
        wedge.validate()
        assert wedge.opening == pytest.approx(model.theta[j])


def test_base_corner_angle_from_model(square_cone):
    """Corners of a horizontal slice have the base polygon's angles"""
    model = square_cone.model_angles()
    g = model.gamma[0]
    assert corner_angle(g, g, model.theta[0]) == pytest.approx(model.alpha[0], abs=1e-12)


def test_horizontal_slice_identity(square_cone, triangle_cone):
    """A plane parallel to the base has zero energy with the model contact angles"""
    for domain in (square_cone, triangle_cone):
        for height in (0.1, 0.4, 0.7):
            identity = cone_slice_identity(domain, Plane.horizontal(height))
            assert abs(identity.residual) < 1e-12


def test_tilted_slice_identity(triangle_cone):
    """A tilted plane has zero energy against its own contact angles"""
    plane = Plane.through([0.1, 0.05, 1.0], [0.4, 0.3, 0.4])
    gamma = [np.arccos(plane.normal @ face.normal) for face in triangle_cone.faces]
    assert abs(cone_slice_identity(triangle_cone, plane, gamma).residual) < 1e-12
    assert len(slice_section(triangle_cone, plane)) == triangle_cone.k


def test_slice_energy_negative_below_actual_angles(square_cone):
    """Prescribing angles smaller than the slice's own gives a negative energy"""
    gamma = square_cone.model_angles().gamma - 0.1
    identity = cone_slice_identity(square_cone, Plane.horizontal(0.5), gamma)
    assert identity.residual < -1e-3


def test_slice_missing_the_cone(square_cone):
    with pytest.raises(EmptySlice):
        cone_slice_identity(square_cone, Plane.horizontal(1.5))
