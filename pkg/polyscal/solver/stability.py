"""
Second variation of the capillary energy on a surface mesh

    Q(f, f) = integral |grad f|^2 - (|A|^2 + Ric(N, N)) f^2
              - sum_j integral_{boundary on F_j} q_j f^2

with q_j = II(nu_bar, nu_bar) / sin(gamma_j) + cot(gamma_j) A(nu, nu). The
form is discretized with linear elements: metric stiffness, lumped mass for
the potential and lumped boundary weights for the Robin term.
"""
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
from loguru import logger
from scipy import sparse
from scipy.sparse.linalg import eigsh, splu

from ..config import settings
from ..errors import NotMinimal, SolverBreakdown
from ..fields.base import MetricField
from ..geometry.domain import PolyhedralDomain
from ..mesh.measure import triangle_geometry, vertex_areas
from ..mesh.report import GeometryReport, boundary_terms, geometry_report
from ..mesh.surface import ON_EDGE, TriSurface

# gradients of the barycentric hat functions in the parameter triangle
_HAT_GRADIENTS = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


@dataclass(frozen=True)
class StabilityOperator:
    """Discrete second-variation form; the operator matrix is K - diag(m V + b q)"""
    stiffness: sparse.csr_matrix
    mass: np.ndarray  # lumped
    potential: np.ndarray  # V = |A|^2 + Ric(N, N) per vertex
    robin: np.ndarray  # q per vertex (0 away from the boundary)
    boundary_weight: np.ndarray  # lumped boundary length per vertex
    corner_robin: float = 0.0  # part of the Robin integral carried by corner-adjacent half segments

    @property
    def size(self) -> int:
        return len(self.mass)

    @property
    def matrix(self) -> sparse.csr_matrix:
        diagonal = self.mass * self.potential + self.boundary_weight * self.robin
        return (self.stiffness - sparse.diags(diagonal)).tocsr()

    @property
    def mass_matrix(self) -> sparse.csr_matrix:
        return sparse.diags(self.mass).tocsr()

    def shifted(self, constant: float) -> "StabilityOperator":
        """Operator with V + constant"""
        return replace(self, potential=self.potential + constant)

    def lower_bound(self) -> float:
        """Lower bound for the smallest eigenvalue: the larger of the Gershgorin and potential bounds"""
        mat = self.matrix
        diag = mat.diagonal()
        off = np.asarray(abs(mat).sum(axis=1)).ravel() - np.abs(diag)
        gershgorin = float(np.min((diag - off) / self.mass))
        potential = float(np.min(-self.potential - self.boundary_weight * self.robin / self.mass))
        return max(gershgorin, potential)


def stiffness_matrix(surface: TriSurface, field: MetricField, geometry=None) -> sparse.csr_matrix:
    """Linear-element Dirichlet form under the metric frozen at triangle centroids"""
    geo = triangle_geometry(surface, field) if geometry is None else geometry
    minv = np.linalg.inv(geo.first_form)
    local = geo.areas[:, None, None] * np.einsum("ia,qab,jb->qij", _HAT_GRADIENTS, minv, _HAT_GRADIENTS)
    tri = surface.triangles
    rows = np.repeat(tri, 3, axis=1).reshape(-1)
    cols = np.tile(tri, (1, 3)).reshape(-1)
    n = surface.n_vertices
    return sparse.coo_matrix((local.reshape(-1), (rows, cols)), shape=(n, n)).tocsr()


def boundary_weights(surface: TriSurface, metric: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Half the g-length of every boundary segment, accumulated at its endpoints

    Returns:
        (weights per vertex, segment lengths in boundary_segments order)
    """
    x = surface.vertices
    weights = np.zeros(surface.n_vertices)
    lengths = []
    for a, b, _ in surface.boundary_segments():
        d = x[b] - x[a]
        g = 0.5 * (metric[a] + metric[b])
        length = float(np.sqrt(d @ g @ d))
        weights[a] += 0.5 * length
        weights[b] += 0.5 * length
        lengths.append(length)
    return weights, np.array(lengths)


def assemble(domain: PolyhedralDomain, surface: TriSurface, field: MetricField,
             report: Optional[GeometryReport] = None, minimal_tolerance: Optional[float] = None,
             mean_curvature: float = 0.0) -> StabilityOperator:
    """
    Assemble the stability operator of an approximately minimal capillary surface

    The Robin coefficient is integrated per open boundary segment. Corners
    carry no point mass: a half segment ending at a corner uses the
    coefficient of its face-side endpoint.

    Raises:
        NotMinimal: |H - mean_curvature|_inf exceeds the tolerance at interior vertices
    """
    report = geometry_report(domain, surface, field) if report is None else report
    tol = settings.minimal_tolerance if minimal_tolerance is None else minimal_tolerance
    if len(report.interior):
        deviation = float(np.max(np.abs(report.mean_curvature[report.interior] - mean_curvature)))
        if deviation > tol:
            raise NotMinimal(f"Stability form needs a minimal surface: |H|_inf = {deviation:.3g} > {tol:.3g}",
                             {"mean_curvature": mean_curvature})

    geo = triangle_geometry(surface, field)
    stiffness = stiffness_matrix(surface, field, geo)
    mass = vertex_areas(surface, field, geo)

    terms = boundary_terms(domain, report, field, mean_curvature)
    robin = np.zeros(surface.n_vertices)
    robin[terms.vertices] = terms.robin

    weights = np.zeros(surface.n_vertices)
    corner_part = 0.0
    x, g = surface.vertices, report.metric
    for a, b, _ in surface.boundary_segments():
        d = x[b] - x[a]
        half = 0.5 * float(np.sqrt(d @ (0.5 * (g[a] + g[b])) @ d))
        for v, other in ((a, b), (b, a)):
            if surface.tags[v] == ON_EDGE:
                # the corner half of the segment is charged to the face-side endpoint
                weights[other] += half
                corner_part += half * robin[other]
            else:
                weights[v] += half
    if corner_part:
        logger.warning(f"Corner-adjacent Robin contribution {corner_part:.4g} folded into face vertices")

    op = StabilityOperator(stiffness=stiffness, mass=mass, potential=report.potential.copy(),
                           robin=robin, boundary_weight=weights, corner_robin=corner_part)
    logger.debug(f"Stability operator: n={op.size}, V in [{op.potential.min():.3g}, {op.potential.max():.3g}], "
                 f"q in [{terms.robin.min() if len(terms.robin) else 0.0:.3g}, "
                 f"{terms.robin.max() if len(terms.robin) else 0.0:.3g}]")
    return op


def quadratic_form(op: StabilityOperator, f: np.ndarray) -> float:
    """Q(f, f) for nodal values f"""
    f = np.asarray(f, dtype=float)
    return float(f @ (op.matrix @ f))


@dataclass(frozen=True)
class Eigenpair:
    value: float
    vector: np.ndarray  # mass-normalized, positive mean
    iterations: int
    residual: float  # |(L - value M) phi| / |M phi|
    shift: float

    def to_dict(self):
        return {"value": self.value, "iterations": self.iterations, "residual": self.residual,
                "shift": self.shift}


def _factorize(op: StabilityOperator, shift: float):
    mat = (op.matrix - shift * op.mass_matrix).tocsc()
    return splu(mat)


def _normalize(op: StabilityOperator, phi: np.ndarray) -> np.ndarray:
    phi = phi / np.sqrt(phi @ (op.mass * phi))
    return -phi if np.sum(op.mass * phi) < 0 else phi


def min_eigenvalue(op: StabilityOperator, max_iter: Optional[int] = None,
                   tol: Optional[float] = None) -> Eigenpair:
    """
    Smallest eigenpair of L phi = lambda M phi by shifted inverse iteration

    The shift sits just below a guaranteed lower bound of the spectrum, so
    the iteration converges to the smallest eigenvalue. A singular
    factorization is retried once with a ten times larger offset. If the
    iteration budget runs out the pair is polished with a shift-invert Lanczos
    solve started from the current iterate.

    Raises:
        SolverBreakdown: the shifted matrix is singular twice
    """
    max_iter = max_iter or settings.eigen_max_iter
    tol = settings.eigen_tol if tol is None else tol
    bound = op.lower_bound()
    offset = 1e-2 * (abs(bound) + 1.0 / float(np.sum(op.mass)))

    shift = bound - offset
    try:
        lu = _factorize(op, shift)
    except RuntimeError as e:
        logger.warning(f"Shifted factorization singular at {shift:.6g} ({e}); reshifting")
        shift = bound - 10.0 * offset
        try:
            lu = _factorize(op, shift)
        except RuntimeError as e2:
            raise SolverBreakdown(f"Shifted factorization failed twice: {e2}", {"shift": shift}) from e2

    mat = op.matrix
    phi = _normalize(op, np.ones(op.size) + 1e-3 * np.linspace(-1.0, 1.0, op.size))
    value, residual = float("nan"), float("inf")
    iterations = 0
    for iterations in range(1, max_iter + 1):
        phi = _normalize(op, lu.solve(op.mass * phi))
        value = float(phi @ (mat @ phi))
        residual = float(np.linalg.norm(mat @ phi - value * op.mass * phi) / np.linalg.norm(op.mass * phi))
        if residual < tol:
            break

    if residual >= tol:
        logger.warning(f"Inverse iteration stopped at residual {residual:.3g}; polishing with Lanczos")
        vals, vecs = eigsh(mat.tocsc(), k=1, M=op.mass_matrix.tocsc(), sigma=shift, which="LM",
                           v0=phi, tol=tol)
        phi = _normalize(op, vecs[:, 0])
        value = float(phi @ (mat @ phi))
        residual = float(np.linalg.norm(mat @ phi - value * op.mass * phi) / np.linalg.norm(op.mass * phi))

    logger.info(f"Smallest stability eigenvalue {value:.10g} after {iterations} iterations "
                f"(residual {residual:.3g}, shift {shift:.6g})")
    return Eigenpair(value=value, vector=phi, iterations=iterations, residual=residual, shift=shift)


def lowest_eigenvalues(op: StabilityOperator, count: int = 2) -> np.ndarray:
    """The `count` smallest eigenvalues, ascending"""
    shift = op.lower_bound() - 1e-2 * (abs(op.lower_bound()) + 1.0 / float(np.sum(op.mass)))
    count = min(count, op.size - 1)
    vals = eigsh(op.matrix.tocsc(), k=count, M=op.mass_matrix.tocsc(), sigma=shift, which="LM",
                 return_eigenvectors=False)
    return np.sort(vals)
