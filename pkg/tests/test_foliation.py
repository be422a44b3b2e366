"""
Tests for CMC capillary foliations and the H' >= C H dynamics check
"""
import numpy as np
import pytest

from polyscal.errors import InsufficientLevels, LeafLeftDomain
from polyscal.mesh import slice_mesh
from polyscal.solver import (
    FoliationTrace,
    LeafProblem,
    LeafState,
    dynamics_check,
    foliate,
    leaf_solve,
)
from polyscal.solver import foliation as foliation_module


def _synthetic_leaf(p: float, lam: float, n: int = 3) -> LeafState:
    return LeafState(
        parameter=p,
        heights=np.full(n, p),
        surface=None,
        mean_curvature=lam,
        gamma=np.full(4, np.pi / 2),
        contact_length=np.zeros(4),
        mass=np.ones(n),
        flow_normal=np.ones(n),
        energy=0.0,
        mean_curvature_residual=0.0,
        angle_residual=0.0,
    )


def _difference_jacobian(problem: LeafProblem, heights: np.ndarray, lam: float, step: float = 1e-5) -> np.ndarray:
    """Central differences of the leaf rows; distance-2 colors are perturbed together"""
    reference = problem.reference
    colors = reference.distance2_coloring()
    ring = reference.rings(1)
    n = len(heights)
    out = np.zeros((n, n))
    for color in range(int(colors.max()) + 1):
        members = np.flatnonzero(colors == color)
        up, down = heights.copy(), heights.copy()
        up[members] += step
        down[members] -= step
        diff = (problem.evaluate(up, lam)[0] - problem.evaluate(down, lam)[0]) / (2 * step)
        for v in members.tolist():
            nbrs = ring.indices[ring.indptr[v]:ring.indptr[v + 1]]
            out[nbrs, v] = diff[nbrs]
    return out


def _gamma_leaf(cube, flat_cube):
    """Mid-height leaf of the flat cube with contact angle 1.45 on every side face"""
    problem = LeafProblem(cube, flat_cube, slice_mesh(cube, 0.5, 8), gamma=1.45)
    return problem, leaf_solve(problem, 0.5)


class TestNewtonOperator:

    def test_assembled_operator_matches_differences(self, cube, flat_cube, cube_slice):
        """On the flat mid-slice the bordered matrix is K / m plus the lambda column and the normalization row"""
        problem = LeafProblem(cube, flat_cube, cube_slice)
        heights = np.full(cube_slice.n_vertices, 0.5)
        rows, info = problem.evaluate(heights, 0.0)
        jac = problem.jacobian(problem.stability_operator(0.0, info), info).toarray()
        n = len(heights)

        oracle = _difference_jacobian(problem, heights, 0.0)
        assert np.max(np.abs(rows)) < 1e-10
        assert np.max(np.abs(jac[:n, :n] - oracle)) < 1e-5 * np.max(np.abs(oracle))
        assert np.allclose(jac[:n, n], info["flow_normal"])
        assert jac[n, :n].sum() == pytest.approx(1.0)
        assert jac[n, n] == 0.0

    def test_planar_start_steps_through_neumann_solver(self, cube, flat_cube, monkeypatch):
        """Flat slice, flat faces: no potential and no Robin term, so the first step is a Neumann solve"""
        calls = []
        real = foliation_module.neumann_solve

        def spy(*args, **kwargs):
            calls.append(args[1])
            return real(*args, **kwargs)

        monkeypatch.setattr(foliation_module, "neumann_solve", spy)
        problem, leaf = _gamma_leaf(cube, flat_cube)

        assert calls
        assert leaf.newton_paths[0] == "neumann"
        assert len(leaf.newton_paths) == leaf.iterations
        assert leaf.mean_curvature != 0.0
        assert leaf.mean_curvature_residual < 1e-6
        assert problem.normalization(leaf.heights, 0.5) == pytest.approx(0.0, abs=1e-8)

    def test_newton_increments_contract(self, cube, flat_cube):
        """Successive Newton increments shrink by a factor below one down to the tolerance"""
        _, leaf = _gamma_leaf(cube, flat_cube)
        increments = np.array(leaf.newton_increments)
        ratios = increments[1:] / increments[:-1]

        assert leaf.iterations >= 2
        assert np.all(ratios < 1.0)
        assert ratios[-1] < 0.5
        assert increments[-1] < 1e-4 * increments[0]


class TestLeafSolve:

    def test_horizontal_cone_slice_is_a_minimal_leaf(self, square_cone, flat_cone, cone_slice):
        """Model angles make every horizontal slice of a flat cone a minimal leaf"""
        problem = LeafProblem(square_cone, flat_cone, cone_slice)
        leaf = leaf_solve(problem, 0.5)

        assert problem.parameter_name == "rho"
        assert leaf.mean_curvature == pytest.approx(0.0, abs=1e-8)
        assert np.allclose(leaf.heights, 0.5, atol=1e-8)
        assert leaf.angle_residual < 1e-6

    def test_prism_parameter_is_height(self, cube, flat_cube, cube_slice):
        problem = LeafProblem(cube, flat_cube, cube_slice)
        assert problem.parameter_name == "t"
        assert problem.height_of(0.3) == pytest.approx(0.3)

    def test_warm_start_outside_raises(self, square_cone, flat_cone, cone_slice):
        problem = LeafProblem(square_cone, flat_cone, cone_slice)
        with pytest.raises(LeafLeftDomain):
            leaf_solve(problem, 1.0)


class TestFoliate:

    def test_flat_cone_foliation(self, square_cone, flat_cone):
        """Flat cone: minimal leaves throughout, nested, and the dynamics check holds"""
        trace = foliate(square_cone, flat_cone, 0.2, 0.6, steps=5, h=0.25)

        assert trace.complete
        assert len(trace.leaves) == 5
        assert np.allclose(trace.parameters, np.linspace(0.2, 0.6, 5))
        assert np.allclose(trace.mean_curvatures, 0.0, atol=1e-8)
        assert trace.min_gap > 0
        assert trace.decay_ratio == 0.0

        heights = np.array([leaf.heights for leaf in trace.leaves])
        assert np.all(np.diff(heights, axis=0) < 0)

        ledger = dynamics_check(trace, square_cone, flat_cone)
        assert ledger.passed
        assert len(ledger.residuals) == 3

        rows = trace.rows()
        assert set(rows[0]) == {"rho", "lambda", "C", "min_lapse", "angle_residual", "Hprime_minus_CH"}
        assert np.isnan(rows[0]["Hprime_minus_CH"])

    @pytest.mark.slow
    def test_saddle_cube_foliation_is_symmetric(self, cube, saddle_cube):
        """The metric is symmetric about z = 1/2, so lambda is odd about the middle leaf"""
        trace = foliate(cube, saddle_cube, 0.3, 0.7, steps=5, gamma=np.pi / 2, h=0.25)
        lam = trace.mean_curvatures

        assert trace.complete
        assert lam[2] == pytest.approx(0.0, abs=1e-6)
        assert lam[0] == pytest.approx(-lam[4], abs=1e-6)
        assert lam[1] == pytest.approx(-lam[3], abs=1e-6)
        assert trace.min_gap > 0
        heights = np.array([leaf.heights for leaf in trace.leaves])
        assert np.all(np.diff(heights, axis=0) > 0)

        ledger = dynamics_check(trace, cube, saddle_cube)
        assert len(ledger.residuals) == 3

    def test_needs_two_parameters(self, square_cone, flat_cone):
        with pytest.raises(ValueError):
            foliate(square_cone, flat_cone, 0.2, 0.6, steps=1)
        with pytest.raises(ValueError):
            foliate(square_cone, flat_cone, 0.4, 0.4, steps=5)

    def test_failure_attaches_partial_trace(self, square_cone, flat_cone, cone_slice):
        with pytest.raises(LeafLeftDomain) as info:
            foliate(square_cone, flat_cone, 1.0, 0.5, steps=3, reference=cone_slice)
        trace = info.value.trace
        assert not trace.complete
        assert trace.leaves == []


class TestTrace:

    def test_central_difference_derivative(self):
        """lambda = p^2 is differentiated exactly by central differences"""
        p = [0.0, 0.1, 0.2, 0.3]
        trace = FoliationTrace("t", [_synthetic_leaf(x, x ** 2) for x in p])
        d = trace.derivative()

        assert np.isnan(d[0]) and np.isnan(d[-1])
        assert d[1:-1] == pytest.approx([0.2, 0.4])

    def test_dynamics_residuals(self):
        """Unit lapse and mass, no contact term: residual is 3 H'"""
        p = [0.0, 0.1, 0.2, 0.3]
        trace = FoliationTrace("t", [_synthetic_leaf(x, x ** 2) for x in p])
        trace.assign_lapse()

        assert np.allclose(trace.leaves[1].lapse, 1.0)
        assert trace.dynamics_residuals()[1:-1] == pytest.approx([0.6, 1.2])
        assert trace.min_gap == pytest.approx(0.1)

    def test_dynamics_check_needs_three_leaves(self, cube, flat_cube):
        trace = FoliationTrace("t", [_synthetic_leaf(0.1, 0.0), _synthetic_leaf(0.2, 0.0)])
        with pytest.raises(InsufficientLevels):
            dynamics_check(trace, cube, flat_cube)
