"""
Tests for polyhedral domains and their face and edge measurements
"""
import numpy as np
import pytest

from polyscal.errors import BadAngle, InvalidDomain, OutOfDomain
from polyscal.fields import FlatMetric, MetricFactory
from polyscal.geometry import (
    ModelAngles,
    PolyhedralDomain,
    check_hypotheses,
    check_mean_convexity,
    dihedral_angle,
    face_mean_curvature,
)


def test_cube_model_angles(cube):
    """All dihedral and base angles of the cube are right angles"""
    model = cube.model_angles()
    assert np.allclose(model.gamma, np.pi / 2)
    assert np.allclose(model.theta, np.pi / 2)
    assert np.allclose(model.alpha, np.pi / 2)
    assert model.exterior_angle_sum() == pytest.approx(2 * np.pi)


def test_square_cone_model_angles(square_cone):
    """Side faces of the right square cone rise at arctan(2) with obtuse side dihedrals"""
    model = square_cone.model_angles()
    assert np.allclose(model.gamma, np.arctan(2.0))
    assert np.allclose(model.theta, np.arccos(-0.2))
    assert np.allclose(model.alpha, np.pi / 2)


def test_model_angles_are_validated(triangle_cone):
    """Computed angles pass validation; a flattened dihedral does not"""
    model = triangle_cone.model_angles()
    assert np.all((model.theta > 0) & (model.theta < np.pi))
    flattened = ModelAngles(gamma=model.gamma, theta=np.append(model.theta[:-1], np.pi), alpha=model.alpha)
    with pytest.raises(BadAngle):
        flattened.validate()
    with pytest.raises(BadAngle):
        ModelAngles(gamma=np.zeros(3), theta=model.theta, alpha=model.alpha).validate()


def test_frustum_contact_angles(frustum):
    """A shrunken top gives the same base angle on every side face"""
    assert not frustum.is_cone
    assert np.allclose(frustum.model_angles().gamma, np.arctan(2.0))
    assert frustum.height == pytest.approx(0.5)


def test_ruled_parametrization(square_cone, frustum):
    """X(y, 0) is the base, X(y, height) the apex or top, and Y = dX/dz"""
    base = square_cone.base[:, :2]
    assert np.allclose(square_cone.ruled_point(base, 0.0), square_cone.base)
    assert np.allclose(square_cone.ruled_point(base, square_cone.height), np.tile(square_cone.apex, (4, 1)))
    assert np.allclose(frustum.ruled_point(frustum.base[:, :2], frustum.height), frustum.top)

    y = np.array([[0.3, 0.6], [0.5, 0.1]])
    z, dz = 0.3, 1e-6
    fd = (frustum.ruled_point(y, z + dz) - frustum.ruled_point(y, z - dz)) / (2 * dz)
    assert np.allclose(frustum.flow_vector(y), fd, atol=1e-8)


def test_base_coordinates_invert_ruled_map(triangle_cone):
    """base_coordinates recovers y from X(y, z)"""
    y = np.array([[0.4, 0.3], [0.5, 0.2], [0.35, 0.5]])
    points = triangle_cone.ruled_point(y, np.array([0.1, 0.4, 0.6]))
    assert np.allclose(triangle_cone.base_coordinates(points)[:, :2], y)


def test_sample_interior_points_are_inside(triangle_cone):
    """Seeded interior sampling respects the margin"""
    pts = triangle_cone.sample_interior(50, seed=3, margin=0.01)
    assert pts.shape == (50, 3)
    assert np.all(triangle_cone.contains(pts))
    assert np.all(triangle_cone.distance_to_faces(pts) >= 0.01 - 1e-12)
    assert np.allclose(pts, triangle_cone.sample_interior(50, seed=3, margin=0.01))


def test_contact_angle_policies(cube):
    """Model, scalar and per-face policies resolve to k angles in (0, pi)"""
    assert np.allclose(cube.contact_angles("model"), np.pi / 2)
    assert np.allclose(cube.contact_angles(1.0), 1.0)
    assert np.allclose(cube.contact_angles([1.0, 1.1, 1.2, 1.3]), [1.0, 1.1, 1.2, 1.3])
    with pytest.raises(BadAngle):
        cube.contact_angles([1.0, 1.1])
    with pytest.raises(BadAngle):
        cube.contact_angles(np.pi)
    with pytest.raises(BadAngle):
        cube.contact_angles("steep")


@pytest.mark.parametrize("config", [
    {"kind": "prism", "top_scale": 1.0},
    {"kind": "cone", "base": [[0, 0], [1, 0], [0, 1]]},
    {"kind": "pyramid", "base": [[0, 0], [1, 0], [0, 1]]},
    {"kind": "cone", "base": [[0, 0], [0, 1], [1, 0]], "apex": [0.2, 0.2, 1.0]},
    {"kind": "cone", "base": [[0, 0], [1, 0], [0.5, 0.2], [0.5, 1]], "apex": [0.5, 0.5, 1.0]},
    {"kind": "cone", "base": [[0, 0], [1, 0], [0, 1]], "apex": [0.2, 0.2, -1.0]},
])
def test_invalid_domain_configs(config):
    """Missing fields, clockwise or non-convex bases and low apexes are rejected"""
    with pytest.raises(InvalidDomain):
        PolyhedralDomain.from_config(config)


def test_config_round_trip(frustum, triangle_cone):
    """to_config / from_config reproduce the same polyhedron"""
    for domain in (frustum, triangle_cone):
        again = PolyhedralDomain.from_config(domain.to_config())
        assert again.kind == domain.kind
        assert np.allclose(again.vertices, domain.vertices)


def test_flat_dihedral_angles_match_model(square_cone, flat_cone):
    """Euclidean dihedral angles equal the model angles anywhere along an edge"""
    model = square_cone.model_angles()
    edge = square_cone.edges[1]
    for s in (0.0, 0.5 * edge.length, edge.length):
        assert dihedral_angle(square_cone, flat_cone, 1, s) == pytest.approx(model.theta[1], abs=1e-12)
    with pytest.raises(OutOfDomain):
        dihedral_angle(square_cone, flat_cone, 1, 2 * edge.length)


def test_shear_metric_changes_cube_edge_angles(cube):
    """An off-diagonal perturbation bends the vertical cube dihedrals"""
    field = MetricFactory.create("shear_perturb", box=cube.metric_box(), eps=0.2, sigma=0.5)
    angle = dihedral_angle(cube, field, 0, 0.5)
    assert abs(angle - np.pi / 2) > 1e-3


def test_hypotheses_hold_for_flat_cube(cube, flat_cube):
    """Right angles satisfy the window for gamma = pi/2"""
    report = check_hypotheses(cube, flat_cube, np.pi / 2)
    assert report.angle_condition
    assert report.all_below_model
    assert report.one_sided


def test_angle_window_fails_for_small_contact_angles(square_cone, flat_cone):
    """Contact angles summing far below pi push the lower bound above the dihedral"""
    report = check_hypotheses(square_cone, flat_cone, 0.2)
    assert not report.angle_condition
    assert report.edges[0].lower_bound == pytest.approx(np.pi - 0.4)


def test_flat_faces_have_zero_mean_curvature(cube, flat_cube):
    """Planes are minimal in the Euclidean metric"""
    report = check_mean_convexity(cube, flat_cube)
    assert report.passed
    assert np.allclose(report.min_per_face, 0.0)


def test_conformal_face_mean_curvature(cube, saddle_cube):
    """For g = u^4 delta a plane has mean curvature 4 u^-3 du/dn"""
    x = np.array([0.3, 0.0, 0.6])
    u, du, _ = saddle_cube.factor(x[None, :])
    normal = cube.faces[0].normal
    expected = 4.0 * float(du[0] @ normal) / float(u[0]) ** 3
    assert face_mean_curvature(cube, saddle_cube, 0, x) == pytest.approx(expected, rel=1e-10)
    assert expected > 0
    assert check_mean_convexity(cube, saddle_cube).passed
    with pytest.raises(OutOfDomain):
        face_mean_curvature(cube, saddle_cube, 0, [0.3, 0.2, 0.6])
