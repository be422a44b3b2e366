"""
Tests for the capillary energy, admissibility, obstacles and the minimizer
"""
import importlib

import numpy as np
import pytest

from polyscal.errors import BadAngle, NotAdmissible, NotConverged, ObstacleContact, SolverBreakdown
from polyscal.fields import FlatMetric
from polyscal.geometry import Plane
from polyscal.mesh import face_area, graph_mesh, slice_mesh, tilted_slice_mesh
from polyscal.solver import (
    MinimizeOptions,
    check_descent,
    energy,
    energy_gradient,
    energy_terms,
    infimum_probe,
    is_admissible,
    minimize,
    obstacle_check,
)

minimize_module = importlib.import_module("polyscal.solver.minimize")


def _bump(domain, height, amplitude):
    center = domain.section(height).mean(axis=0)
    return lambda x: amplitude * np.exp(-np.sum((x[:, :2] - center[:2]) ** 2, axis=1) / 0.04)


class TestEnergy:
    """Energy values on flat slices"""

    def test_cube_mid_slice(self, cube, flat_cube, cube_slice):
        """Right contact angles leave only the area"""
        assert energy(cube, cube_slice, flat_cube) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("t", [0.25, 0.5, 0.8])
    def test_cube_slices_at_sixty_degrees(self, cube, flat_cube, t):
        """Each side face wets t below the slice and 1 - t above it"""
        surface = slice_mesh(cube, t, 4)
        assert energy(cube, surface, flat_cube, np.pi / 3, wetted_side="bottom") == pytest.approx(1 - 2 * t, abs=1e-12)
        assert energy(cube, surface, flat_cube, np.pi / 3) == pytest.approx(2 * t - 1, abs=1e-12)

    def test_horizontal_cone_slices_have_zero_energy(self, square_cone, flat_cone):
        """With the model angles every horizontal cone slice has F = 0"""
        for height in (0.25, 0.5, 0.75):
            surface = slice_mesh(square_cone, height, 6)
            assert abs(energy(square_cone, surface, flat_cone)) < 1e-12

    def test_smaller_prescribed_angles_make_slices_negative(self, square_cone, flat_cone, cone_slice):
        """A slice whose own angles exceed the prescribed ones has negative energy"""
        gamma = square_cone.model_angles().gamma - 0.1
        assert energy(square_cone, cone_slice, flat_cone, gamma) < -1e-3

    def test_tilted_slice_is_positive(self, square_cone, flat_cone):
        """Away from horizontal the area exceeds its projection"""
        surface = tilted_slice_mesh(square_cone, Plane.through([0.2, 0.0, 1.0], [0.5, 0.5, 0.4]), 6)
        assert energy(square_cone, surface, flat_cone) > 1e-4

    def test_bottom_side_differs_by_face_areas(self, square_cone, flat_cone, gaussian_cone, cone_slice):
        """Wetting the base side with pi - gamma shifts F by sum cos(gamma) |F_j|"""
        gamma = square_cone.model_angles().gamma
        for field, rel in ((flat_cone, 1e-12), (gaussian_cone, 1e-5)):
            top = energy(square_cone, cone_slice, field, gamma)
            bottom = energy(square_cone, cone_slice, field, np.pi - gamma, wetted_side="bottom")
            faces = np.array([face_area(field, f) for f in square_cone.faces])
            assert bottom - top == pytest.approx(float(np.sum(np.cos(gamma) * faces)), rel=rel)

    @pytest.mark.parametrize("factor", [0.5, 2.5])
    def test_flat_energy_scales_quadratically(self, cube, square_cone, factor):
        """Scaling domain and surface by c multiplies F by c^2 in a flat metric"""
        for domain in (cube, square_cone):
            surface = graph_mesh(domain, 0.4, 6, _bump(domain, 0.4, 0.05))
            scaled = domain.scaled(factor)
            value = energy(domain, surface, FlatMetric(domain.metric_box()), 1.2)
            scaled_value = energy(scaled, surface.with_vertices(factor * surface.vertices),
                                  FlatMetric(scaled.metric_box()), 1.2)
            assert scaled_value == pytest.approx(factor ** 2 * value, rel=1e-10, abs=1e-12)

    def test_terms_add_up(self, square_cone, gaussian_cone, cone_slice):
        report = energy_terms(square_cone, cone_slice, gaussian_cone, 1.2)
        assert report.energy == pytest.approx(report.recomputed_energy)
        assert np.allclose(report.gamma, 1.2)

    def test_bad_gamma(self, cube, flat_cube, cube_slice):
        with pytest.raises(BadAngle):
            energy(cube, cube_slice, flat_cube, [1.0, 1.0])

    def test_gradient_matches_differences(self, square_cone, gaussian_cone):
        """Energy gradient along admissible motions against central differences"""
        surface = graph_mesh(square_cone, 0.4, 4, _bump(square_cone, 0.4, 0.05))
        gamma = np.full(4, 1.0)
        _, grad = energy_gradient(square_cone, surface, gaussian_cone, gamma)
        face = square_cone.faces[1]
        interior = int(np.flatnonzero(surface.interior_mask)[2])
        on_face = int(surface.contact_curve(1)[2])
        step = 1e-6
        for v, direction in ((interior, np.array([0.3, -0.2, 0.9])), (on_face, face.e_r), (on_face, face.e_s)):
            plus, minus = surface.vertices.copy(), surface.vertices.copy()
            plus[v] += step * direction
            minus[v] -= step * direction
            fd = (energy(square_cone, surface.with_vertices(plus), gaussian_cone, gamma, check=False)
                  - energy(square_cone, surface.with_vertices(minus), gaussian_cone, gamma, check=False)) / (2 * step)
            assert grad[v] @ direction == pytest.approx(fd, rel=1e-5, abs=1e-9)


class TestAdmissibility:
    """Separation and obstacle clearances"""

    def test_slices_are_admissible(self, cube, cube_slice, square_cone, cone_slice, triangle_cone):
        assert is_admissible(cube, cube_slice)
        assert is_admissible(square_cone, cone_slice)
        assert is_admissible(triangle_cone, slice_mesh(triangle_cone, 0.2, 5))

    def test_surface_outside_domain(self, cube, cube_slice, flat_cube):
        """A slice shifted out of the cube is rejected"""
        shifted = cube_slice.with_vertices(cube_slice.vertices + np.array([0.0, 0.0, 0.7]))
        assert not is_admissible(cube, shifted)
        with pytest.raises(NotAdmissible):
            energy(cube, shifted, flat_cube)

    def test_clearances(self, cube, cube_slice, square_cone, cone_slice):
        """Distances to the base and to the top face or apex"""
        box = obstacle_check(cube, cube_slice)
        assert box.base == pytest.approx(0.5)
        assert box.top == pytest.approx(0.5)
        cone = obstacle_check(square_cone, cone_slice)
        assert cone.top == pytest.approx(0.5)
        assert cone.minimum == pytest.approx(0.5)

    def test_infimum_probe_sign(self, square_cone, flat_cone):
        """Slices with too small prescribed angles give a negative infimum"""
        slices = [slice_mesh(square_cone, z, 4) for z in (0.3, 0.5, 0.7)]
        gamma = square_cone.model_angles().gamma - 0.1
        assert infimum_probe(square_cone, flat_cone, slices, gamma).verdict == "negative"
        assert infimum_probe(square_cone, flat_cone, slices).verdict == "zero"
        with pytest.raises(ValueError):
            infimum_probe(square_cone, flat_cone, [])


@pytest.mark.slow
class TestMinimize:
    """Projected gradient descent"""

    def test_critical_slice_needs_no_iterations(self, cube, flat_cube, cube_slice):
        """The flat mid-slice with right angles is already critical"""
        surface, report = minimize(cube, flat_cube, cube_slice)
        assert report.converged
        assert report.iterations == 0
        assert report.energy == pytest.approx(1.0)
        assert report.clearance_ok
        assert report.mean_curvature_residual < 1e-8
        assert np.max(report.angle_residual) < 1e-8

    def test_bump_is_flattened(self, cube, flat_cube):
        """A bumped slice relaxes to a plane of unit area"""
        init = graph_mesh(cube, 0.5, 4, _bump(cube, 0.5, 0.1))
        surface, report = minimize(cube, flat_cube, init, options=MinimizeOptions(max_iter=20000))
        assert report.converged
        assert report.energy == pytest.approx(1.0, abs=1e-6)
        assert np.ptp(surface.vertices[:, 2]) < 1e-3
        surface.validate(cube, tol=1e-9)

    def test_budget_exhausted(self, cube, flat_cube):
        """With raise_not_converged the best iterate travels with the error"""
        init = graph_mesh(cube, 0.5, 4, _bump(cube, 0.5, 0.1))
        with pytest.raises(NotConverged) as info:
            minimize(cube, flat_cube, init, options=MinimizeOptions(max_iter=2, raise_not_converged=True))
        assert info.value.surface is not None
        assert info.value.report.iterations == 2

    def test_small_angles_push_to_base(self, cube, flat_cube):
        """With cos(gamma) > 0 the energy falls as the slice descends, until it meets the base"""
        with pytest.raises(ObstacleContact):
            minimize(cube, flat_cube, slice_mesh(cube, 0.5, 4), 1.2)


class TestDescentGuard:
    """Every accepted step is checked against the previous energy"""

    def test_rise_is_a_breakdown(self):
        check_descent(1.0, 1.0, 1)
        check_descent(1.0, 0.5, 2)
        with pytest.raises(SolverBreakdown) as info:
            check_descent(1.0, 1.0 + 1e-12, 3)
        assert info.value.context["iteration"] == 3
        with pytest.raises(SolverBreakdown):
            check_descent(1.0, float("nan"), 4)

    def test_each_iteration_is_checked(self, cube, flat_cube, monkeypatch):
        seen = []
        real = minimize_module.check_descent

        def spy(before, after, iteration):
            seen.append((before, after))
            real(before, after, iteration)

        monkeypatch.setattr(minimize_module, "check_descent", spy)
        init = graph_mesh(cube, 0.5, 4, _bump(cube, 0.5, 0.1))
        _, report = minimize(cube, flat_cube, init, options=MinimizeOptions(max_iter=20))

        assert report.iterations > 0
        assert len(seen) == report.iterations
        assert all(after <= before for before, after in seen)
