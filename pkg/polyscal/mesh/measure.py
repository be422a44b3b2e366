"""
Riemannian area of a surface mesh and wetted areas of side faces, with exact gradients

Triangle areas use one metric evaluation at the centroid. Wetted areas are
computed in the face chart (s, r) by Green's theorem: with
    Phi(s, r) = integral_0^r rho(s, r') dr',   rho = sqrt(det(J^T G J)),
the g-area of a counterclockwise chart polygon is -sum over its sides of the
line integral of Phi ds. Phi uses Gauss-Legendre in r and each side
Gauss-Legendre in its parameter; both are exact for the flat metric.
"""
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from loguru import logger

from ..config import settings
from ..errors import DegenerateTriangle
from ..fields.base import MetricField
from ..geometry.domain import PolyhedralDomain, SideFace
from .surface import TriSurface

WETTED_SIDES = ("top", "bottom")


# -----------------------------------
# Surface area
# -----------------------------------

@dataclass(frozen=True)
class TriangleGeometry:
    """Per-triangle pulled-back metric data at the centroids"""
    centroids: np.ndarray
    edges: np.ndarray  # (m, 3, 2)
    metric: np.ndarray  # (m, 3, 3)
    first_form: np.ndarray  # (m, 2, 2) E^T G E
    areas: np.ndarray


def _extent(surface: TriSurface) -> float:
    return float(max(np.max(np.ptp(surface.vertices, axis=0)), 1e-300))


def triangle_geometry(surface: TriSurface, field: MetricField) -> TriangleGeometry:
    """
    Centroid metric, first fundamental form and g-area of each triangle

    Raises:
        DegenerateTriangle: a triangle's Euclidean area is below the degeneracy tolerance
    """
    surface.check_triangles(settings.degeneracy_tolerance * _extent(surface) ** 2)
    centroids = surface.centroids()
    e = surface.edge_vectors()
    g = field.components(centroids)
    m = np.einsum("qia,qij,qjb->qab", e, g, e)
    det = m[:, 0, 0] * m[:, 1, 1] - m[:, 0, 1] ** 2
    if np.any(det <= 0):
        bad = int(np.flatnonzero(det <= 0)[0])
        raise DegenerateTriangle(f"Triangle {bad} has nonpositive g-area", {"triangle": bad})
    return TriangleGeometry(centroids=centroids, edges=e, metric=g, first_form=m,
                            areas=0.5 * np.sqrt(det))


def riemannian_area(surface: TriSurface, field: MetricField) -> float:
    """Sum of triangle areas under the pulled-back metric"""
    return float(np.sum(triangle_geometry(surface, field).areas))


def area_gradient(surface: TriSurface, field: MetricField,
                  geometry: Optional[TriangleGeometry] = None) -> np.ndarray:
    """
    Exact gradient of riemannian_area with respect to vertex positions

    Returns:
        (n, 3) array; row i is d Area / d x_i
    """
    geo = triangle_geometry(surface, field) if geometry is None else geometry
    a, e, g, m = geo.areas, geo.edges, geo.metric, geo.first_form
    minv = np.linalg.inv(m)
    # d a / d E = a G E M^-1, columns are the derivatives for v1 - v0 and v2 - v0
    d_e = a[:, None, None] * np.einsum("qij,qjb,qbc->qic", g, e, minv)
    if field.is_flat:
        d_c = np.zeros((len(a), 3))
    else:
        dg = field.derivatives(geo.centroids)
        d_c = 0.5 * a[:, None] * np.einsum("qab,qib,qkij,qja->qk", minv, e, dg, e)

    grad = np.zeros_like(surface.vertices)
    tri = surface.triangles
    np.add.at(grad, tri[:, 1], d_e[:, :, 0] + d_c / 3.0)
    np.add.at(grad, tri[:, 2], d_e[:, :, 1] + d_c / 3.0)
    np.add.at(grad, tri[:, 0], -d_e[:, :, 0] - d_e[:, :, 1] + d_c / 3.0)
    return grad


def vertex_areas(surface: TriSurface, field: MetricField,
                 geometry: Optional[TriangleGeometry] = None) -> np.ndarray:
    """Lumped mass: one third of the g-area of every incident triangle"""
    geo = triangle_geometry(surface, field) if geometry is None else geometry
    mass = np.zeros(surface.n_vertices)
    for c in range(3):
        np.add.at(mass, surface.triangles[:, c], geo.areas / 3.0)
    return mass


# -----------------------------------
# Face-chart quadrature
# -----------------------------------

def _gauss(count: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]"""
    x, w = np.polynomial.legendre.leggauss(count)
    return 0.5 * (x + 1.0), 0.5 * w


class ChartIntegrator:
    """Evaluates Phi and its chart derivatives on one side face"""

    def __init__(self, field: MetricField, face: SideFace,
                 height_points: Optional[int] = None, segment_points: Optional[int] = None):
        self.field = field
        self.face = face
        self.jacobian = np.column_stack([face.e_s, face.e_r])
        self.t_nodes, self.t_weights = _gauss(height_points or settings.quadrature_height_points)
        self.q_nodes, self.q_weights = _gauss(segment_points or settings.quadrature_segment_points)

    def density(self, st: np.ndarray, gradient: bool = False):
        """rho at chart points and optionally (d_s rho, d_r rho)"""
        st = np.asarray(st, dtype=float).reshape(-1, 2)
        if self.field.is_flat:
            zero = np.zeros(len(st))
            return (np.ones(len(st)), zero, zero) if gradient else np.ones(len(st))
        pts = self.face.from_chart(st)
        j = self.jacobian
        g = self.field.components(pts)
        m = np.einsum("ia,qij,jb->qab", j, g, j)
        rho = np.sqrt(m[:, 0, 0] * m[:, 1, 1] - m[:, 0, 1] ** 2)
        if not gradient:
            return rho
        dg = self.field.derivatives(pts)
        minv = np.linalg.inv(m)
        out = []
        for direction in (self.face.e_s, self.face.e_r):
            dg_dir = np.einsum("k,qkij->qij", direction, dg)
            dm = np.einsum("ia,qij,jb->qab", j, dg_dir, j)
            out.append(0.5 * rho * np.einsum("qab,qba->q", minv, dm))
        return rho, out[0], out[1]

    def phi(self, st: np.ndarray, gradient: bool = False):
        """Phi(s, r) and optionally (d_s Phi, d_r Phi), consistent with the quadrature"""
        st = np.asarray(st, dtype=float).reshape(-1, 2)
        s, r = st[:, 0], st[:, 1]
        t, w = self.t_nodes, self.t_weights
        samples = np.stack([np.repeat(s, len(t)), (r[:, None] * t[None, :]).reshape(-1)], axis=1)
        if not gradient:
            rho = self.density(samples).reshape(len(st), len(t))
            return r * (rho @ w)
        rho, d_s, d_r = (x.reshape(len(st), len(t)) for x in self.density(samples, gradient=True))
        value = r * (rho @ w)
        phi_s = r * (d_s @ w)
        phi_r = rho @ w + r * (d_r @ (w * t))
        return value, phi_s, phi_r

    def segments(self, p0: np.ndarray, p1: np.ndarray, gradient: bool = False):
        """
        Line integrals of Phi ds along chart segments p0 -> p1

        Returns:
            values (m,), and with gradient the derivatives (m, 2) at p0 and p1
        """
        p0 = np.asarray(p0, dtype=float).reshape(-1, 2)
        p1 = np.asarray(p1, dtype=float).reshape(-1, 2)
        tau, w = self.q_nodes, self.q_weights
        pts = (p0[:, None, :] * (1.0 - tau)[None, :, None] + p1[:, None, :] * tau[None, :, None]).reshape(-1, 2)
        ds = p1[:, 0] - p0[:, 0]
        if not gradient:
            phi = self.phi(pts).reshape(len(p0), len(tau))
            return ds * (phi @ w)
        phi, phi_s, phi_r = (x.reshape(len(p0), len(tau)) for x in self.phi(pts, gradient=True))
        base = phi @ w
        values = ds * base
        d0 = np.stack([-base + ds * (phi_s @ (w * (1 - tau))), ds * (phi_r @ (w * (1 - tau)))], axis=1)
        d1 = np.stack([base + ds * (phi_s @ (w * tau)), ds * (phi_r @ (w * tau))], axis=1)
        return values, d0, d1

    def polygon_area(self, chart_points: np.ndarray) -> float:
        """g-area of a counterclockwise chart polygon"""
        p0 = np.asarray(chart_points, dtype=float)
        return float(-np.sum(self.segments(p0, np.roll(p0, -1, axis=0))))


def face_area(field: MetricField, face: SideFace) -> float:
    """g-area of a whole side face"""
    return ChartIntegrator(field, face).polygon_area(face.chart_polygon)


# -----------------------------------
# Wetted areas
# -----------------------------------

def _wetted_polygon(domain: PolyhedralDomain, surface: TriSurface, face: int,
                    side: str) -> Tuple[np.ndarray, np.ndarray]:
    """Counterclockwise region of F_j on one side of the contact curve, with vertex ids (-1 = fixed)"""
    if side not in WETTED_SIDES:
        raise ValueError(f"Unsupported wetted side: {side}. Supported sides: {', '.join(WETTED_SIDES)}")
    f = domain.faces[face]
    curve = surface.contact_curve(face)  # corner on L_{j-1} -> corner on L_j
    if side == "top":
        fixed = [domain.top[(face + 1) % domain.k], domain.top[face]] if not domain.is_cone else [domain.apex]
        ids = np.concatenate([curve, -np.ones(len(fixed), dtype=np.int64)])
        points = np.vstack([surface.vertices[curve], np.array(fixed)])
    else:
        fixed = [domain.base[face], domain.base[(face + 1) % domain.k]]
        ids = np.concatenate([-np.ones(2, dtype=np.int64), curve[::-1]])
        points = np.vstack([np.array(fixed), surface.vertices[curve[::-1]]])
    return f.to_chart(points), ids


def wetted_area(domain: PolyhedralDomain, surface: TriSurface, face: int, field: MetricField,
                side: str = "top") -> float:
    """
    g-area of the part of F_j cut off by the contact curve

    Args:
        side: "top" for the apex / top-face side (inside E), "bottom" for the base side

    Raises:
        OpenContactCurve: the surface boundary does not cross F_j between its corners
    """
    chart, _ = _wetted_polygon(domain, surface, face, side)
    return ChartIntegrator(field, domain.faces[face]).polygon_area(chart)


def wetted_areas(domain: PolyhedralDomain, surface: TriSurface, field: MetricField,
                 side: str = "top") -> np.ndarray:
    return np.array([wetted_area(domain, surface, j, field, side) for j in range(domain.k)])


def wetted_area_gradient(domain: PolyhedralDomain, surface: TriSurface, face: int,
                         field: MetricField, side: str = "top") -> Tuple[float, np.ndarray]:
    """
    Wetted area of F_j and its exact gradient with respect to vertex positions

    Only the contact-curve vertices of F_j (corners included) get nonzero rows.
    """
    f = domain.faces[face]
    chart, ids = _wetted_polygon(domain, surface, face, side)
    integrator = ChartIntegrator(field, f)
    nxt = np.roll(np.arange(len(chart)), -1)
    values, d0, d1 = integrator.segments(chart, chart[nxt], gradient=True)

    grad_chart = np.zeros((surface.n_vertices, 2))
    for seg in range(len(chart)):
        if ids[seg] >= 0:
            grad_chart[ids[seg]] -= d0[seg]
        if ids[nxt[seg]] >= 0:
            grad_chart[ids[nxt[seg]]] -= d1[seg]
    grad = grad_chart[:, :1] * f.e_s + grad_chart[:, 1:] * f.e_r
    return float(-np.sum(values)), grad


def wetted_summary(domain: PolyhedralDomain, surface: TriSurface, field: MetricField,
                   side: str = "top") -> List[dict]:
    """Per-face wetted and total face areas, for reports"""
    out = []
    for j, face in enumerate(domain.faces):
        out.append({"face": j, "wetted": wetted_area(domain, surface, j, field, side),
                    "face_area": face_area(field, face)})
    logger.debug(f"Wetted areas ({side}): {[round(x['wetted'], 6) for x in out]}")
    return out
