"""
Tests for the stability operator, its smallest eigenvalue, rigidity certificates
and the comparison ledger
"""
import numpy as np
import pytest

from polyscal.errors import HypothesisFailed, NotMinimal
from polyscal.fields import MetricFactory
from polyscal.mesh import graph_mesh, slice_mesh
from polyscal.solver import (
    MinimizeOptions,
    assemble,
    check_comparison_hypotheses,
    comparison_verdict,
    energy,
    lowest_eigenvalues,
    min_eigenvalue,
    quadratic_form,
    rigidity_certificate,
)


class TestStabilityOperator:

    def test_flat_slice_is_neumann_laplacian(self, cube, flat_cube, cube_slice):
        """No potential and no Robin term on the flat mid-slice"""
        op = assemble(cube, cube_slice, flat_cube)
        assert np.allclose(op.potential, 0.0, atol=1e-10)
        assert np.allclose(op.robin, 0.0, atol=1e-10)
        assert quadratic_form(op, np.ones(op.size)) == pytest.approx(0.0, abs=1e-12)
        assert op.boundary_weight.sum() == pytest.approx(4.0)
        assert op.mass.sum() == pytest.approx(1.0)

    def test_flat_slice_eigenvalues(self, cube, flat_cube, cube_slice):
        """Lowest eigenvalue 0 with a constant mode, next one close to pi^2"""
        op = assemble(cube, cube_slice, flat_cube)
        pair = min_eigenvalue(op)
        assert pair.value == pytest.approx(0.0, abs=1e-8)
        assert pair.residual < 1e-8
        assert np.allclose(pair.vector, pair.vector.mean(), rtol=1e-6)
        assert pair.shift < 0
        values = lowest_eigenvalues(op, 2)
        assert values[1] == pytest.approx(np.pi ** 2, rel=0.05)

    def test_positive_scalar_curvature_destabilizes(self, cube, saddle_cube, cube_slice):
        """The symmetric mid-slice of the saddle metric is critical with a negative direction"""
        op = assemble(cube, cube_slice, saddle_cube)
        assert np.all(op.robin[op.boundary_weight > 0] > 0)
        pair = min_eigenvalue(op)
        assert pair.value < 0
        assert pair.residual < 1e-8
        assert quadratic_form(op, pair.vector) == pytest.approx(pair.value, rel=1e-8)
        assert lowest_eigenvalues(op, 1)[0] == pytest.approx(pair.value, rel=1e-6)
        assert op.lower_bound() <= pair.value

    def test_quadratic_form_matches_energy_second_difference(self, cube, flat_cube, rng):
        """Q(f, f) against (F(S+) - 2 F(S) + F(S-)) / eps^2 for random smooth normal variations"""
        surface = slice_mesh(cube, 0.5, 16)
        op = assemble(cube, surface, flat_cube)
        normal = np.array([0.0, 0.0, 1.0])
        x, y = surface.vertices[:, 0], surface.vertices[:, 1]
        eps = 1e-3
        base = energy(cube, surface, flat_cube)
        for _ in range(20):
            coef = rng.normal(size=(3, 3))
            f = sum(coef[k, l] * np.cos(k * np.pi * x) * np.cos(l * np.pi * y)
                    for k in range(3) for l in range(3))
            plus = energy(cube, surface.with_vertices(surface.vertices + eps * f[:, None] * normal), flat_cube)
            minus = energy(cube, surface.with_vertices(surface.vertices - eps * f[:, None] * normal), flat_cube)
            second = (plus - 2 * base + minus) / eps ** 2
            assert quadratic_form(op, f) == pytest.approx(second, rel=0.03, abs=1e-6)

    def test_needs_minimal_surface(self, cube, flat_cube):
        bumped = graph_mesh(cube, 0.5, 6, lambda x: 0.1 * np.exp(-np.sum((x[:, :2] - 0.5) ** 2, axis=1) / 0.04))
        with pytest.raises(NotMinimal):
            assemble(cube, bumped, flat_cube, minimal_tolerance=1e-6)


class TestRigidity:

    def test_flat_slice_is_rigid(self, cube, flat_cube, cube_slice):
        """Every rigidity equality holds on the flat mid-slice"""
        cert = rigidity_certificate(cube, cube_slice, flat_cube)
        assert cert.rigid, cert.failing()

    def test_curved_metric_breaks_rigidity(self, cube, saddle_cube, cube_slice):
        """Positive scalar curvature shows up in the certificate"""
        cert = rigidity_certificate(cube, cube_slice, saddle_cube)
        assert not cert.rigid
        assert "scalar" in cert.failing()
        assert cert.to_dict()["rigid"] is False


@pytest.mark.slow
class TestComparison:

    def test_flat_cube_is_consistent(self, cube, flat_cube):
        """The flat cube is the rigid case: L = 0"""
        ledger = comparison_verdict(cube, flat_cube, h=0.125)
        assert ledger.verdict == "consistent"
        assert ledger.total == pytest.approx(0.0, abs=1e-8)
        assert ledger.corner_excess == pytest.approx(0.0, abs=1e-10)
        assert ledger.rigidity.rigid

    def test_saddle_cube_is_consistent(self, cube, saddle_cube):
        """Positive scalar curvature and mean convex faces give L > 0"""
        ledger = comparison_verdict(cube, saddle_cube, h=0.125, options=MinimizeOptions(max_iter=200))
        assert ledger.verdict == "consistent"
        assert ledger.bulk > 0
        assert ledger.boundary > 0
        assert ledger.lambda_min < 0
        assert ledger.gauss_bonnet_residual < 1e-10
        assert ledger.to_dict()["L"] == pytest.approx(ledger.total)

    def test_negative_scalar_curvature_fails_first(self, cube):
        """A sharp Gaussian bump has R < 0 away from its center"""
        field = MetricFactory.create("conformal_gaussian", box=cube.metric_box(), eps=0.2, sigma=0.3,
                                     center=[0.5, 0.5, 0.5])
        with pytest.raises(HypothesisFailed) as info:
            check_comparison_hypotheses(cube, field)
        assert info.value.hypothesis == "scalar curvature"
        assert info.value.exit_code == 2

    def test_angle_window_failure(self, square_cone, flat_cone):
        """Contact angles too small for the side dihedrals"""
        with pytest.raises(HypothesisFailed) as info:
            check_comparison_hypotheses(square_cone, flat_cone, 0.2)
        assert info.value.hypothesis == "angle condition"
