"""
Finite-difference checks of the first-order evolution of a surface under a variation

For a variation with normal speed f:
    dH/dt        = Laplace f + (Ric(N, N) + |A|^2) f            interior, tangential part zero
    d<N, X>/dt   = -sin(gamma) df/dnu + (cos(gamma) A(nu, nu) + II(nu_bar, nu_bar)) f   on F_j
    nabla_Y N    = -grad f                                        interior
"""
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from loguru import logger

from ..config import settings
from ..errors import NotMinimal
from ..fields.base import MetricField
from ..fields.curvature import curvature_batch
from ..geometry.domain import PolyhedralDomain
from ..mesh.measure import triangle_geometry, vertex_areas
from ..mesh.report import GeometryReport, boundary_terms, geometry_report, in_face_conormal
from ..mesh.surface import ON_EDGE, ON_FACE, TriSurface
from .stability import stiffness_matrix

Variation = Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class EvolutionCheck:
    """Measured and predicted first derivatives along a variation"""
    interior_measured: np.ndarray
    interior_predicted: np.ndarray
    boundary_measured: np.ndarray
    boundary_predicted: np.ndarray
    normal_residual: np.ndarray  # g-norm of nabla_Y N + grad f at interior vertices
    dt: float

    @staticmethod
    def _relative(measured: np.ndarray, predicted: np.ndarray) -> float:
        if not len(measured):
            return 0.0
        err = float(np.max(np.abs(measured - predicted)))
        ref = float(np.max(np.abs(predicted)))
        return err / ref if ref > 1e-12 else err

    @property
    def interior_error(self) -> float:
        return float(np.max(np.abs(self.interior_measured - self.interior_predicted))) \
            if len(self.interior_measured) else 0.0

    @property
    def interior_relative(self) -> float:
        """Max error over max |prediction| (absolute when the prediction vanishes)"""
        return self._relative(self.interior_measured, self.interior_predicted)

    @property
    def boundary_error(self) -> float:
        return float(np.max(np.abs(self.boundary_measured - self.boundary_predicted))) \
            if len(self.boundary_measured) else 0.0

    @property
    def normal_error(self) -> float:
        return float(np.max(self.normal_residual)) if len(self.normal_residual) else 0.0

    def to_dict(self):
        return {
            "dt": self.dt,
            "interior_error": self.interior_error,
            "interior_relative": self.interior_relative,
            "boundary_error": self.boundary_error,
            "normal_error": self.normal_error,
        }


def surface_gradient(surface: TriSurface, field: MetricField, f: np.ndarray) -> np.ndarray:
    """Area-weighted vertex average of the per-triangle g-gradients of a nodal function"""
    geo = triangle_geometry(surface, field)
    tri = surface.triangles
    df = np.stack([f[tri[:, 1]] - f[tri[:, 0]], f[tri[:, 2]] - f[tri[:, 0]]], axis=1)
    grad_t = np.einsum("qia,qab,qb->qi", geo.edges, np.linalg.inv(geo.first_form), df)
    out = np.zeros_like(surface.vertices)
    weight = np.zeros(surface.n_vertices)
    for c in range(3):
        np.add.at(out, tri[:, c], geo.areas[:, None] * grad_t)
        np.add.at(weight, tri[:, c], geo.areas)
    return out / weight[:, None]


def variation_field(domain: PolyhedralDomain, surface: TriSurface, report: GeometryReport,
                    f: np.ndarray) -> np.ndarray:
    """
    Admissible displacement with normal speed f

    Interior vertices move along N, face vertices along -nu_bar / sin(gamma)
    and corners along their edge.
    """
    g, normals = report.metric, report.normals
    y = f[:, None] * normals
    for v in np.flatnonzero(surface.tags == ON_FACE).tolist():
        face = domain.faces[int(surface.owners[v])]
        nu_bar = in_face_conormal(g[v], face, report.tangents[v])
        sin = -float(nu_bar @ g[v] @ normals[v])
        y[v] = -f[v] * nu_bar / sin
    for v in np.flatnonzero(surface.tags == ON_EDGE).tolist():
        d = domain.edges[int(surface.owners[v])].direction
        y[v] = f[v] * d / float(d @ g[v] @ normals[v])
    return y


def _contact_cosines(report: GeometryReport) -> np.ndarray:
    """cos of the measured contact angle at non-corner boundary vertices, in report.boundary order"""
    lookup = {}
    for curve, angles in zip(report.contact_vertices, report.contact_angles):
        for v, a in zip(curve[1:-1].tolist(), angles[1:-1]):
            lookup[v] = np.cos(a)
    return np.array([lookup[v] for v in report.boundary.tolist()])


def evolution_lemma_check(domain: PolyhedralDomain, surface: TriSurface, field: MetricField,
                          f: Variation, dt: float = 1e-3,
                          minimal_tolerance: Optional[float] = None) -> EvolutionCheck:
    """
    Compare central differences of H, <N, X> and N along a variation with their predicted rates

    Args:
        f: normal speed, nodal values or a function of vertex positions

    Raises:
        NotMinimal: |H|_inf exceeds the tolerance on the base surface
    """
    report = geometry_report(domain, surface, field)
    tol = settings.minimal_tolerance if minimal_tolerance is None else minimal_tolerance
    if report.max_mean_curvature > tol:
        raise NotMinimal(f"Evolution check needs a minimal surface: |H|_inf = {report.max_mean_curvature:.3g}",
                         {"tolerance": tol})
    speed = np.asarray(f(surface.vertices) if callable(f) else f, dtype=float).reshape(surface.n_vertices)
    y = variation_field(domain, surface, report, speed)
    plus = geometry_report(domain, surface.with_vertices(surface.vertices + dt * y), field)
    minus = geometry_report(domain, surface.with_vertices(surface.vertices - dt * y), field)

    interior = report.interior
    geo = triangle_geometry(surface, field)
    mass = vertex_areas(surface, field, geo)
    laplace = -(stiffness_matrix(surface, field, geo) @ speed) / mass
    interior_measured = (plus.mean_curvature - minus.mean_curvature)[interior] / (2.0 * dt)
    interior_predicted = (laplace + report.potential * speed)[interior]

    terms = boundary_terms(domain, report, field)
    grad = surface_gradient(surface, field, speed)
    bdry = report.boundary
    dnu = np.einsum("qi,qij,qj->q", grad[bdry], report.metric[bdry], report.conormals[bdry])
    boundary_predicted = (-np.sin(terms.gamma) * dnu
                          + (np.cos(terms.gamma) * terms.normal_second_form + terms.face_second_form) * speed[bdry])
    boundary_measured = (_contact_cosines(plus) - _contact_cosines(minus)) / (2.0 * dt)

    christoffel = curvature_batch(field, surface.vertices[interior]).christoffel
    dn = (plus.normals - minus.normals)[interior] / (2.0 * dt)
    cov = dn + np.einsum("qkij,qi,qj->qk", christoffel, y[interior], report.normals[interior])
    diff = cov + grad[interior]
    normal_residual = np.sqrt(np.einsum("qi,qij,qj->q", diff, report.metric[interior], diff))

    check = EvolutionCheck(interior_measured=interior_measured, interior_predicted=interior_predicted,
                           boundary_measured=boundary_measured, boundary_predicted=boundary_predicted,
                           normal_residual=normal_residual, dt=float(dt))
    logger.info(f"Evolution check (dt={dt:.3g}): dH/dt error {check.interior_error:.3g} "
                f"(relative {check.interior_relative:.3g}), angle error {check.boundary_error:.3g}, "
                f"normal error {check.normal_error:.3g}")
    return check
