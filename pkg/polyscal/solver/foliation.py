"""
Constant mean curvature capillary foliations

Leaves are graphs over a fixed reference slice in the flow coordinates of
Y = dX/dz: vertex i of a leaf sits at X(y_i, z_i), so face and edge vertices
stay on their face or edge for any heights z. For a leaf parameter p (rho
for cones, the height t for prisms) the unknowns (z, lambda) solve

    (dF . Y)_i / m_i + lambda <Y_i, N_i> = 0     at every vertex
    sum_i m_i^ref (z_i - z(p)) / sum m^ref = 0

The first rows are the first variation of F - lambda Vol along Y: H = lambda
in the interior and the capillary angle condition along the faces.

Newton steps linearize through the stability operator L = K - diag(m V + b q)
acting on the normal speed u = <Y, N> dz:

    (<Y, N>_i / m_i) (L u)_i + <Y, N>_i dlambda = -rows_i

When V and the Robin term vanish L is the Neumann Laplacian, dlambda is the
compatibility constant of the right-hand side and u comes from the Neumann
solver.
"""
from dataclasses import dataclass, field as dataclass_field
from typing import Dict, List, Optional, Tuple

import numpy as np
from loguru import logger
from scipy import sparse
from scipy.sparse.linalg import spsolve

from ..config import settings
from ..errors import (
    DegenerateTriangle,
    HypothesisFailed,
    Incompatible,
    InsufficientLevels,
    LeafLeftDomain,
    NewtonDiverged,
    NoConvergence,
    NumericalError,
)
from ..fields.base import MetricField
from ..fields.curvature import verify_scalar_sign
from ..geometry.domain import PolyhedralDomain
from ..geometry.measure import check_mean_convexity
from ..mesh.builders import divisions_for, slice_mesh
from ..mesh.measure import triangle_geometry, vertex_areas
from ..mesh.report import geometry_report, unit_normals
from ..mesh.surface import TriSurface
from ..monitoring import LEAVES_ACCEPTED, NEWTON_ITERATIONS
from .energy import GammaPolicy, energy_gradient
from .neumann import neumann_solve
from .stability import StabilityOperator, assemble

# relative size of diag(m V + b q) below which the Neumann solver takes the step
_PURE_NEUMANN = 1e-10


def contact_lengths(surface: TriSurface, metric: np.ndarray) -> np.ndarray:
    """g-length of the contact curve on every side face"""
    x = surface.vertices
    out = np.empty(surface.k)
    for j in range(surface.k):
        curve = surface.contact_curve(j)
        d = np.diff(x[curve], axis=0)
        g = 0.5 * (metric[curve[1:]] + metric[curve[:-1]])
        out[j] = float(np.sum(np.sqrt(np.einsum("qi,qij,qj->q", d, g, d))))
    return out


@dataclass
class LeafState:
    """One CMC capillary leaf"""
    parameter: float
    heights: np.ndarray
    surface: TriSurface
    mean_curvature: float  # lambda
    gamma: np.ndarray
    contact_length: np.ndarray  # per face
    mass: np.ndarray
    flow_normal: np.ndarray  # <Y, N> per vertex
    energy: float
    mean_curvature_residual: float  # max |H - lambda| along the flow, interior vertices
    angle_residual: float  # measured contact angles against gamma
    newton_increments: List[float] = dataclass_field(default_factory=list)
    newton_paths: List[str] = dataclass_field(default_factory=list)  # linear solver per step
    lapse: np.ndarray = dataclass_field(default_factory=lambda: np.zeros(0))

    @property
    def iterations(self) -> int:
        return len(self.newton_increments)

    @property
    def contact_term(self) -> float:
        """C = sum_j cot(gamma_j) length_j"""
        return float(np.sum(self.contact_length / np.tan(self.gamma)))

    @property
    def min_lapse(self) -> float:
        return float(np.min(self.lapse)) if len(self.lapse) else float("nan")

    def to_dict(self):
        return {
            "parameter": self.parameter,
            "mean_curvature": self.mean_curvature,
            "contact_term": self.contact_term,
            "min_lapse": self.min_lapse,
            "energy": self.energy,
            "mean_curvature_residual": self.mean_curvature_residual,
            "angle_residual": self.angle_residual,
            "newton_increments": self.newton_increments,
        }


class LeafProblem:
    """Nonlinear leaf equations over a fixed reference slice"""

    def __init__(self, domain: PolyhedralDomain, field: MetricField, reference: TriSurface,
                 gamma: GammaPolicy = "model", wetted_side: str = "top"):
        self.domain = domain
        self.field = field
        self.reference = reference
        self.gamma = domain.contact_angles(gamma)
        self.wetted_side = wetted_side
        self.base_points = domain.base_coordinates(reference.vertices)
        self.flow = domain.flow_vector(self.base_points)
        self.reference_mass = vertex_areas(reference, field)
        self.weights = self.reference_mass / np.sum(self.reference_mass)

    @property
    def parameter_name(self) -> str:
        return "rho" if self.domain.is_cone else "t"

    def height_of(self, parameter: float) -> float:
        """z of the slice with this leaf parameter"""
        return self.domain.height * (1.0 - parameter) if self.domain.is_cone else float(parameter)

    def surface_at(self, heights: np.ndarray) -> TriSurface:
        return self.reference.with_vertices(self.domain.ruled_point(self.base_points, heights))

    def inside(self, heights: np.ndarray) -> bool:
        return bool(np.all(heights > 0.0) and np.all(heights < self.domain.height))

    def evaluate(self, heights: np.ndarray, lam: float) -> Tuple[np.ndarray, Dict]:
        """Residual rows at every vertex, with the leaf quantities they were built from"""
        surface = self.surface_at(heights)
        value, grad = energy_gradient(self.domain, surface, self.field, self.gamma, self.wetted_side)
        mass = vertex_areas(surface, self.field, triangle_geometry(surface, self.field))
        g = self.field.components(surface.vertices)
        normals = unit_normals(g, surface.vertex_normals())
        flow_normal = np.einsum("qi,qij,qj->q", self.flow, g, normals)
        rows = np.einsum("qi,qi->q", grad, self.flow) / mass + lam * flow_normal
        return rows, {"surface": surface, "energy": value, "mass": mass, "metric": g,
                      "flow_normal": flow_normal}

    def normalization(self, heights: np.ndarray, target: float) -> float:
        return float(np.sum(self.weights * (heights - target)))

    def stability_operator(self, lam: float, info: Dict) -> StabilityOperator:
        """Jacobi operator with Robin term at the current iterate"""
        return assemble(self.domain, info["surface"], self.field, minimal_tolerance=np.inf, mean_curvature=lam)

    def jacobian(self, op: StabilityOperator, info: Dict) -> sparse.csc_matrix:
        """Bordered Newton matrix: diag(<Y, N> / m) L diag(<Y, N>), the lambda column and the normalization row"""
        w = info["flow_normal"]
        block = sparse.diags(w / info["mass"]) @ op.matrix @ sparse.diags(w)
        return sparse.bmat([
            [block, sparse.csr_matrix(w[:, None])],
            [sparse.csr_matrix(self.weights[None, :]), None],
        ], format="csc")

    def newton_step(self, lam: float, rows: np.ndarray, norm_row: float,
                    info: Dict) -> Tuple[np.ndarray, float, str]:
        """
        Solve the linearized leaf equations for (dz, dlambda)

        Returns:
            (dz, dlambda, path) with path "neumann" or "bordered"

        Raises:
            NewtonDiverged: the flow is tangent to the leaf somewhere or the matrix is singular
        """
        w = info["flow_normal"]
        if float(np.min(np.abs(w))) < 1e-8:
            raise NewtonDiverged("Flow vector tangent to the leaf", {"min_flow_normal": float(np.min(np.abs(w)))})
        op = self.stability_operator(lam, info)
        diagonal = op.mass * op.potential + op.boundary_weight * op.robin
        if float(np.max(np.abs(diagonal))) <= _PURE_NEUMANN * float(np.max(op.stiffness.diagonal())):
            mass = info["mass"]
            f = rows / w
            dlam = -float(np.sum(mass * f)) / float(np.sum(mass))
            try:
                u = neumann_solve(info["surface"], f + dlam, field=self.field)
            except (Incompatible, NoConvergence) as e:
                raise NewtonDiverged(f"Neumann step failed: {e.message}", e.context) from e
            shift = -(norm_row + float(np.sum(self.weights * u / w))) / float(np.sum(self.weights / w))
            return (u + shift) / w, dlam, "neumann"

        delta = spsolve(self.jacobian(op, info), -np.append(rows, norm_row))
        if not np.all(np.isfinite(delta)):
            raise NewtonDiverged("Singular leaf Jacobian", {"lambda": lam})
        return delta[:-1], float(delta[-1]), "bordered"

    def certify(self, parameter: float, heights: np.ndarray, lam: float, rows: np.ndarray,
                info: Dict, increments: List[float], paths: Optional[List[str]] = None) -> LeafState:
        surface = info["surface"]
        interior = surface.interior_mask
        flow_normal = info["flow_normal"]
        h_res = float(np.max(np.abs(rows[interior] / flow_normal[interior]))) if np.any(interior) else 0.0
        report = geometry_report(self.domain, surface, self.field)
        angle_res = float(max(np.max(np.abs(a - self.gamma[j])) for j, a in enumerate(report.contact_angles)))
        return LeafState(
            parameter=float(parameter),
            heights=heights.copy(),
            surface=surface,
            mean_curvature=float(lam),
            gamma=self.gamma,
            contact_length=contact_lengths(surface, info["metric"]),
            mass=info["mass"],
            flow_normal=flow_normal,
            energy=float(info["energy"]),
            mean_curvature_residual=h_res,
            angle_residual=angle_res,
            newton_increments=list(increments),
            newton_paths=list(paths or []),
        )


def leaf_solve(problem: LeafProblem, parameter: float, heights: Optional[np.ndarray] = None,
               lam: float = 0.0, tol: Optional[float] = None,
               max_iter: Optional[int] = None) -> LeafState:
    """
    Newton iteration for the leaf with the given parameter

    Args:
        heights: warm start (defaults to the planar slice)
        lam: warm start for the mean curvature

    Every step solves the linearization of LeafProblem.newton_step and backtracks
    on the residual norm.

    Raises:
        NewtonDiverged: no decrease of the residual or iteration budget exhausted
        LeafLeftDomain: every trial step moved the leaf out of the polyhedron
    """
    tol = settings.leaf_tol if tol is None else tol
    max_iter = max_iter or settings.newton_max_iter
    scale = problem.domain.scale
    target = problem.height_of(parameter)
    n = problem.reference.n_vertices
    z = np.full(n, target) if heights is None else np.asarray(heights, dtype=float).copy()
    if not problem.inside(z):
        raise LeafLeftDomain(f"Warm start for {problem.parameter_name}={parameter:.6g} leaves the domain")

    rows, info = problem.evaluate(z, lam)
    norm_row = problem.normalization(z, target)
    increments: List[float] = []
    paths: List[str] = []

    def small(r, c):
        return float(np.max(np.abs(r))) < tol / scale and abs(c) < tol * scale

    converged = small(rows, norm_row)
    while not converged:
        if len(increments) >= max_iter:
            raise NewtonDiverged(f"Newton did not converge in {max_iter} iterations",
                                 {"parameter": parameter, "residual": float(np.max(np.abs(rows)))})
        dz, dlam, path = problem.newton_step(lam, rows, norm_row, info)
        paths.append(path)

        merit = float(np.linalg.norm(np.append(rows, norm_row / scale ** 2)))
        step, left = 1.0, False
        for _ in range(12):
            z_try, lam_try = z + step * dz, lam + step * dlam
            if not problem.inside(z_try):
                left, step = True, 0.5 * step
                continue
            try:
                rows_try, info_try = problem.evaluate(z_try, lam_try)
            except DegenerateTriangle:
                step *= 0.5
                continue
            norm_try = problem.normalization(z_try, target)
            if float(np.linalg.norm(np.append(rows_try, norm_try / scale ** 2))) < merit or small(rows_try, norm_try):
                break
            step *= 0.5
        else:
            if left:
                raise LeafLeftDomain(f"Newton steps leave the domain at {problem.parameter_name}={parameter:.6g}",
                                     {"parameter": parameter})
            raise NewtonDiverged(f"Newton line search failed at {problem.parameter_name}={parameter:.6g}",
                                 {"parameter": parameter, "residual": merit})

        increment = float(step * max(np.max(np.abs(dz)), abs(dlam)))
        z, lam, rows, info, norm_row = z_try, lam_try, rows_try, info_try, norm_try
        increments.append(increment)
        NEWTON_ITERATIONS.inc()
        logger.debug(f"Newton {len(increments)} ({path}): |delta|={increment:.3g}, |F|={np.max(np.abs(rows)):.3g}, "
                     f"lambda={lam:.10g}")
        converged = small(rows, norm_row) or increment < tol * scale

    leaf = problem.certify(parameter, z, lam, rows, info, increments, paths)
    LEAVES_ACCEPTED.inc()
    logger.info(f"Leaf {problem.parameter_name}={parameter:.6g}: lambda={lam:.8g} after {leaf.iterations} "
                f"Newton steps (angle residual {leaf.angle_residual:.3g})")
    return leaf


# -----------------------------------
# Traces
# -----------------------------------

@dataclass
class FoliationTrace:
    """Leaves in continuation order"""
    parameter_name: str
    leaves: List[LeafState] = dataclass_field(default_factory=list)
    complete: bool = True

    @property
    def parameters(self) -> np.ndarray:
        return np.array([leaf.parameter for leaf in self.leaves])

    @property
    def mean_curvatures(self) -> np.ndarray:
        return np.array([leaf.mean_curvature for leaf in self.leaves])

    def assign_lapse(self) -> None:
        """v = (dz/dp) <Y, N> with dz/dp by differences across leaves"""
        if len(self.leaves) < 2:
            for leaf in self.leaves:
                leaf.lapse = np.full(len(leaf.heights), np.nan)
            return
        p = self.parameters
        heights = np.array([leaf.heights for leaf in self.leaves])
        dz = np.gradient(heights, p, axis=0)
        for leaf, rate in zip(self.leaves, dz):
            leaf.lapse = rate * leaf.flow_normal

    def derivative(self) -> np.ndarray:
        """Central differences of lambda in the parameter, NaN at both ends"""
        out = np.full(len(self.leaves), np.nan)
        p, lam = self.parameters, self.mean_curvatures
        for k in range(1, len(self.leaves) - 1):
            out[k] = (lam[k + 1] - lam[k - 1]) / (p[k + 1] - p[k - 1])
        return out

    def dynamics_residuals(self) -> np.ndarray:
        """H' integral(1 / v) - C H per leaf, NaN where no central difference exists"""
        hprime = self.derivative()
        out = np.full(len(self.leaves), np.nan)
        for k, leaf in enumerate(self.leaves):
            if np.isnan(hprime[k]) or not len(leaf.lapse):
                continue
            inverse_lapse = float(np.sum(leaf.mass / leaf.lapse))
            out[k] = hprime[k] * inverse_lapse - leaf.contact_term * leaf.mean_curvature
        return out

    @property
    def min_gap(self) -> float:
        """Smallest signed vertex gap between consecutive leaves (positive for a foliation)"""
        gaps = []
        for a, b in zip(self.leaves, self.leaves[1:]):
            d = b.heights - a.heights
            gaps.append(float(np.min(d * np.sign(np.mean(d)))))
        return min(gaps) if gaps else float("nan")

    @property
    def decay_ratio(self) -> float:
        """|lambda| at the parameter nearest the vertex over |lambda| at the farthest (cones)"""
        if len(self.leaves) < 2:
            return float("nan")
        p, lam = self.parameters, np.abs(self.mean_curvatures)
        near, far = int(np.argmin(p)), int(np.argmax(p))
        return float(lam[near] / lam[far]) if lam[far] > 0 else 0.0

    def rows(self) -> List[Dict]:
        """Plot-ready rows for the trace CSV"""
        residuals = self.dynamics_residuals()
        return [{
            self.parameter_name: leaf.parameter,
            "lambda": leaf.mean_curvature,
            "C": leaf.contact_term,
            "min_lapse": leaf.min_lapse,
            "angle_residual": leaf.angle_residual,
            "Hprime_minus_CH": residuals[k],
        } for k, leaf in enumerate(self.leaves)]

    def to_dict(self):
        return {
            "parameter_name": self.parameter_name,
            "complete": self.complete,
            "leaves": [leaf.to_dict() for leaf in self.leaves],
            "min_gap": self.min_gap,
            "decay_ratio": self.decay_ratio,
        }


def foliate(domain: PolyhedralDomain, field: MetricField, start: float, stop: float, steps: int = 10,
            gamma: GammaPolicy = "model", h: float = 0.125, reference: Optional[TriSurface] = None,
            wetted_side: str = "top") -> FoliationTrace:
    """
    Continue leaves from `start` to `stop`, recording one leaf per grid parameter

    Between grid parameters the step halves on a Newton failure, doubles after
    a few easy steps and never exceeds a tenth of the range. A failure that
    cannot be resolved re-raises the leaf error with the truncated trace
    attached as `error.trace`.
    """
    if steps < 2 or start == stop:
        raise ValueError("Foliation needs at least two distinct parameters")
    if reference is None:
        probe_height = domain.height * (1.0 - start) if domain.is_cone else start
        reference = slice_mesh(domain, probe_height, divisions_for(domain, h))
    problem = LeafProblem(domain, field, reference, gamma, wetted_side)
    trace = FoliationTrace(parameter_name=problem.parameter_name)
    grid = np.linspace(start, stop, steps)
    span = abs(stop - start)
    cap = span / 10.0
    min_step = 1e-6 * span

    try:
        leaf = leaf_solve(problem, grid[0])
    except NumericalError as e:
        trace.complete = False
        e.trace = trace
        raise
    trace.leaves.append(leaf)
    p, z, lam = grid[0], leaf.heights, leaf.mean_curvature
    step, easy = min(abs(grid[1] - grid[0]), cap), 0

    for target in grid[1:]:
        while p != target:
            d = np.sign(target - p) * min(step, abs(target - p))
            nxt = target if abs(target - p - d) < 1e-14 * span else p + d
            warm = z + (problem.height_of(nxt) - problem.height_of(p))
            try:
                candidate = leaf_solve(problem, nxt, warm, lam)
            except (NewtonDiverged, LeafLeftDomain) as e:
                step *= 0.5
                easy = 0
                logger.warning(f"Leaf at {problem.parameter_name}={nxt:.6g} failed ({e.message}); "
                               f"step halved to {step:.3g}")
                if step < min_step:
                    trace.complete = False
                    trace.assign_lapse()
                    e.trace = trace
                    raise
                continue
            p, z, lam = nxt, candidate.heights, candidate.mean_curvature
            easy = easy + 1 if candidate.iterations <= 3 else 0
            if easy >= settings.continuation_easy_steps:
                step, easy = min(2.0 * step, cap), 0
            if p == target:
                trace.leaves.append(candidate)

    trace.assign_lapse()
    lam_all = trace.mean_curvatures
    logger.info(f"Foliation over {problem.parameter_name} in [{start:.4g}, {stop:.4g}]: {len(trace.leaves)} leaves, "
                f"|lambda| in [{np.min(np.abs(lam_all)):.3g}, {np.max(np.abs(lam_all)):.3g}], "
                f"min gap {trace.min_gap:.3g}")
    if domain.is_cone:
        logger.info(f"Vertex decay diagnostic |lambda_near| / |lambda_far| = {trace.decay_ratio:.4g}")
    return trace


# -----------------------------------
# Dynamics
# -----------------------------------

@dataclass(frozen=True)
class DynamicsLedger:
    parameters: np.ndarray
    residuals: np.ndarray  # H' integral(1/v) - C H at interior leaves
    tolerance: float
    hypotheses: Dict

    @property
    def min_residual(self) -> float:
        return float(np.min(self.residuals)) if len(self.residuals) else float("nan")

    @property
    def passed(self) -> bool:
        return self.min_residual >= -self.tolerance

    def to_dict(self):
        return {
            "parameters": self.parameters.tolist(),
            "residuals": self.residuals.tolist(),
            "min_residual": self.min_residual,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "hypotheses": self.hypotheses,
        }


def dynamics_check(trace: FoliationTrace, domain: PolyhedralDomain, field: MetricField,
                   tolerance: Optional[float] = None) -> DynamicsLedger:
    """
    Check H' >= C H along a trace, in the lapse-weighted form
    H' integral(1/v) - C H >= -tol at every leaf with a central difference

    The default tolerance is 10 (dp^2 + h / scale).

    Raises:
        InsufficientLevels: fewer than three leaves
        HypothesisFailed: R < 0 at a leaf vertex, or a side face is not mean convex
    """
    if len(trace.leaves) < 3:
        raise InsufficientLevels(f"Dynamics check needs at least 3 leaves, got {len(trace.leaves)}")
    points = np.vstack([leaf.surface.vertices for leaf in trace.leaves])
    scalar = verify_scalar_sign(field, points, tolerance=1e-10)
    if not scalar.passed:
        raise HypothesisFailed("scalar curvature", f"R < 0 on a leaf (min {scalar.min_scalar:.4g})",
                               scalar.to_dict())
    convexity = check_mean_convexity(domain, field, tolerance=1e-10)
    if not convexity.passed:
        raise HypothesisFailed("mean convexity", "Side face mean curvature negative", convexity.to_dict())

    if not trace.leaves[0].lapse.size:
        trace.assign_lapse()
    for leaf in trace.leaves:
        if np.any(leaf.lapse > 0) and np.any(leaf.lapse < 0):
            logger.warning(f"Lapse changes sign on the leaf at {leaf.parameter:.6g}")

    residuals = trace.dynamics_residuals()
    keep = ~np.isnan(residuals)
    if tolerance is None:
        dp = float(np.max(np.abs(np.diff(trace.parameters))))
        h = trace.leaves[0].surface.mean_edge_length()
        tolerance = 10.0 * (dp ** 2 + h / domain.scale)
    ledger = DynamicsLedger(parameters=trace.parameters[keep], residuals=residuals[keep],
                            tolerance=float(tolerance),
                            hypotheses={"scalar": scalar.to_dict(), "mean_convexity": convexity.to_dict()})
    logger.info(f"Dynamics check: min residual {ledger.min_residual:.4g} vs tolerance {ledger.tolerance:.3g} "
                f"({'pass' if ledger.passed else 'fail'})")
    return ledger
