"""
Tests for metric fields, the catalog factory and the curvature engine
"""
import numpy as np
import pytest

from polyscal.errors import NotSPD, OutOfDomain, StencilClipped
from polyscal.fields import (
    Box,
    CallableMetric,
    FlatMetric,
    MetricFactory,
    curvature_at,
    curvature_batch,
    evaluate_metric,
    parse_metric_spec,
    scalar_curvature,
    verify_scalar_sign,
)


@pytest.fixture
def box():
    """Symmetric box around the origin"""
    return Box(-np.ones(3), np.ones(3))


@pytest.fixture
def inner_points(rng):
    """Points well inside the box"""
    return rng.uniform(-0.5, 0.5, size=(32, 3))


def test_flat_metric_has_zero_curvature(box, inner_points):
    """The Euclidean metric has vanishing Riemann tensor"""
    batch = curvature_batch(FlatMetric(box), inner_points)
    assert np.allclose(batch.riemann, 0.0)
    assert np.allclose(batch.scalar, 0.0)


def test_conformal_gaussian_matches_oracle_with_finite_differences(box, inner_points):
    """Finite-difference scalar curvature agrees with R = -8 u^-5 Lap(u)"""
    field = MetricFactory.create("conformal_gaussian", box=box, h_fd=1e-3, eps=0.1, sigma=1.0)
    fd = scalar_curvature(field, inner_points, method="fd")
    oracle = field.scalar_curvature_oracle(inner_points)
    assert np.max(np.abs(fd - oracle)) / np.max(np.abs(oracle)) < 1e-4


def test_finite_difference_error_is_second_order(box, inner_points):
    """Halving the stencil step cuts the scalar curvature error by about four"""
    field = MetricFactory.create("conformal_gaussian", box=box, eps=0.1, sigma=1.0)
    oracle = field.scalar_curvature_oracle(inner_points)
    errors = []
    for h in (2e-2, 1e-2):
        fd = scalar_curvature(field.with_step(h), inner_points, method="fd")
        errors.append(np.max(np.abs(fd - oracle)))
    assert errors[0] / errors[1] >= 3.5


def test_analytic_path_matches_oracle(box, inner_points):
    """Analytic derivatives reproduce the closed-form scalar curvature"""
    field = MetricFactory.create("conformal_gaussian", box=box, eps=0.2, sigma=0.7)
    assert np.allclose(scalar_curvature(field, inner_points), field.scalar_curvature_oracle(inner_points),
                       atol=1e-10)


def test_conformal_saddle_has_positive_scalar_curvature(box, inner_points):
    """Saddle metric: R = 48 delta u^-5 > 0"""
    field = MetricFactory.create("conformal_saddle", box=box, eps=0.1, delta=0.05, center=[0, 0, 0])
    u, _, _ = field.factor(inner_points)
    assert np.allclose(scalar_curvature(field, inner_points), 48 * 0.05 / u ** 5, rtol=1e-10)
    report = verify_scalar_sign(field, inner_points)
    assert report.passed
    assert report.min_scalar > 0


def test_scalar_sign_detects_negative_curvature(box):
    """A positive Gaussian bump has R < 0 away from its center"""
    field = MetricFactory.create("conformal_gaussian", box=box, eps=0.2, sigma=0.5)
    points = np.array([[0.0, 0.0, 0.0], [0.6, 0.0, 0.0], [0.0, 0.7, 0.0]])
    report = verify_scalar_sign(field, points)
    assert not report.passed
    assert report.min_scalar < 0
    assert np.linalg.norm(report.argmin) > 0.5


def test_diag_perturb_curvature_symmetries(box, inner_points):
    """Riemann tensor is antisymmetric in each pair and Ricci is symmetric"""
    field = MetricFactory.create("diag_perturb", box=box, eps=0.2, center=[0, 0, 0])
    batch = curvature_batch(field, inner_points[:4])
    r = batch.riemann
    assert np.allclose(r, -r.transpose(0, 2, 1, 3, 4), atol=1e-10)
    assert np.allclose(r, -r.transpose(0, 1, 2, 4, 3), atol=1e-10)
    assert np.allclose(batch.ricci, batch.ricci.transpose(0, 2, 1))


def test_shear_perturb_analytic_and_fd_agree(box):
    """Supplied derivatives and the finite-difference stencil give the same curvature"""
    field = MetricFactory.create("shear_perturb", box=box, eps=0.1, sigma=0.5, center=[0, 0, 0])
    x = [0.1, -0.2, 0.15]
    exact = curvature_at(field, x).scalar
    fd = curvature_at(field.with_step(1e-3), x, method="fd").scalar
    assert abs(exact - fd) < 1e-4 * max(1.0, abs(exact))


def test_parse_metric_spec():
    """Catalog strings split into a lower-case name and float arguments"""
    assert parse_metric_spec("conformal_gaussian(0.1, 1)") == ("conformal_gaussian", [0.1, 1.0])
    assert parse_metric_spec("Flat") == ("flat", [])
    with pytest.raises(ValueError):
        parse_metric_spec("flat(a)")


def test_factory_rejects_unknown_metric(box):
    """Unknown names raise ValueError listing the catalog"""
    with pytest.raises(ValueError, match="Unsupported metric type"):
        MetricFactory.create("hyperbolic", box=box)
    with pytest.raises(ValueError, match="Bad arguments"):
        MetricFactory.create("flat", box=box, eps=1.0)


def test_factory_register(box):
    """Programmatic metrics can be added to the catalog"""
    class Doubled(FlatMetric):
        name = "doubled"

        def metric_components(self, points):
            return 2.0 * super().metric_components(points)

    MetricFactory.register("doubled", Doubled)
    assert "doubled" in MetricFactory.get_supported_metrics()
    field = MetricFactory.create("doubled", box=box)
    assert np.allclose(evaluate_metric(field, [0, 0, 0]), 2.0 * np.eye(3))


def test_evaluate_metric_contract(box):
    """Points outside the box and indefinite matrices are rejected"""
    with pytest.raises(OutOfDomain):
        evaluate_metric(FlatMetric(box), [2.0, 0.0, 0.0])
    bad = CallableMetric(box, lambda p: np.broadcast_to(np.diag([1.0, -1.0, 1.0]), (len(p), 3, 3)))
    with pytest.raises(NotSPD):
        evaluate_metric(bad, [0.0, 0.0, 0.0])


def test_stencil_clipped_near_box_boundary(box):
    """Finite differences refuse stencils that leave the box"""
    field = CallableMetric(box, lambda p: np.broadcast_to(np.eye(3), (len(p), 3, 3)), h_fd=1e-2)
    with pytest.raises(StencilClipped):
        scalar_curvature(field, np.array([[0.995, 0.0, 0.0]]))
