"""
Discrete differential geometry of a surface mesh in a metric field

Conventions: N is the g-unit normal pointing into E, A(a, b) = <nabla_a b, N>,
H = tr A, and the first variation of area along f N is -integral H f.
The boundary conormal nu is tangent to the surface, g-orthogonal to the
boundary tangent T and points out of the surface; k_g = -<nabla_T T, nu>.
On F_j the face normal X and the in-face conormal nu_bar (pointing to the
base side) satisfy X = cos(gamma) N + sin(gamma) nu and
nu_bar = cos(gamma) nu - sin(gamma) N.
"""
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from loguru import logger

from ..config import settings
from ..errors import InsufficientLevels, NotMinimal
from ..fields.base import MetricField
from ..fields.curvature import curvature_batch
from ..geometry.domain import PolyhedralDomain
from ..geometry.measure import face_mean_curvature_batch, face_normal_field, face_second_form, g_dot
from .measure import area_gradient, triangle_geometry, vertex_areas
from .surface import ON_EDGE, ON_FACE, TriSurface


@dataclass
class GeometryReport:
    """
    Per-vertex geometry of a surface mesh

    Boundary quantities (geodesic curvature, dual lengths, conormals) are
    indexed by vertex and are NaN away from the non-corner boundary.
    """
    chi: int
    points: np.ndarray
    metric: np.ndarray  # (n, 3, 3) at the vertices
    mass: np.ndarray
    normals: np.ndarray  # fitted g-unit normals
    frames: np.ndarray  # (n, 3, 2) g-orthonormal tangent frames
    second_form: np.ndarray  # (n, 2, 2) in the frame
    mean_curvature: np.ndarray  # variational at interior vertices, fitted elsewhere
    mean_curvature_fit: np.ndarray
    gauss_defect: np.ndarray  # (2 pi - angle sum) / mass at interior vertices, 0 elsewhere
    gauss_fit: np.ndarray  # Sec(T1, T2) + det A
    angle_sums: np.ndarray
    boundary_defect: np.ndarray  # pi - angle sum at non-corner boundary vertices
    geodesic_curvature: np.ndarray
    boundary_length: np.ndarray  # g-length of the dual boundary cell
    tangents: np.ndarray
    conormals: np.ndarray
    corner_angles: np.ndarray  # angle sums at the corners
    corner_angles_tangent: np.ndarray  # g-angle between the boundary tangents at each corner
    contact_angles: List[np.ndarray]  # per face, along its contact curve
    contact_vertices: List[np.ndarray]
    scalar: np.ndarray
    ricci_normal: np.ndarray
    sectional: np.ndarray
    interior: np.ndarray
    boundary: np.ndarray  # non-corner boundary vertices
    corners: np.ndarray

    @property
    def norm_a_squared(self) -> np.ndarray:
        return np.einsum("qab,qab->q", self.second_form, self.second_form)

    @property
    def potential(self) -> np.ndarray:
        """|A|^2 + Ric(N, N)"""
        return self.norm_a_squared + self.ricci_normal

    @property
    def max_mean_curvature(self) -> float:
        """|H|_inf over interior vertices"""
        h = self.mean_curvature[self.interior]
        return float(np.max(np.abs(h))) if len(h) else 0.0

    def frame_coordinates(self, vertex: int, v: np.ndarray) -> np.ndarray:
        """Components of a tangent vector in the g-orthonormal frame at a vertex"""
        return np.asarray(v, dtype=float) @ self.metric[vertex] @ self.frames[vertex]

    def second_form_at(self, vertex: int, a: np.ndarray, b: np.ndarray) -> float:
        """A(a, b) for tangent vectors a, b at a vertex"""
        return float(self.frame_coordinates(vertex, a) @ self.second_form[vertex]
                     @ self.frame_coordinates(vertex, b))

    def to_dict(self) -> Dict:
        kg = self.geodesic_curvature[self.boundary]
        return {
            "chi": self.chi,
            "area": float(np.sum(self.mass)),
            "max_mean_curvature": self.max_mean_curvature,
            "max_norm_a": float(np.sqrt(np.max(self.norm_a_squared))),
            "corner_angles": self.corner_angles.tolist(),
            "corner_angles_tangent": self.corner_angles_tangent.tolist(),
            "max_geodesic_curvature": float(np.max(np.abs(kg))) if len(kg) else 0.0,
            "contact_angles_min": [float(a.min()) for a in self.contact_angles],
            "contact_angles_max": [float(a.max()) for a in self.contact_angles],
            "gauss_bonnet_defect": gauss_bonnet_residual(self, "defect"),
            "gauss_bonnet_fit": gauss_bonnet_residual(self, "fit"),
        }


# -----------------------------------
# Normals and quadric fits
# -----------------------------------

def unit_normals(g: np.ndarray, covectors: np.ndarray) -> np.ndarray:
    """g-unit vectors g^-1 n / |n|_g* for conormal covectors n"""
    w = np.linalg.solve(g, covectors[..., None])[..., 0]
    return w / np.sqrt(np.einsum("qi,qi->q", w, covectors))[:, None]


def _tangent_basis(g: np.ndarray, normal: np.ndarray) -> np.ndarray:
    """g-orthonormal pair spanning the g-orthogonal complement of a g-unit normal"""
    seed = np.eye(3)[int(np.argmin(np.abs(g @ normal)))]
    basis = []
    for v in (seed, np.cross(g @ normal, seed)):
        v = v - (v @ g @ normal) * normal
        for b in basis:
            v = v - (v @ g @ b) * b
        basis.append(v / np.sqrt(v @ g @ v))
    return np.column_stack(basis)


def _fit_vertex(x0: np.ndarray, neighbors: np.ndarray, g0: np.ndarray, gamma0: np.ndarray,
                normal0: np.ndarray):
    """
    Quadric fit w = A11 u^2/2 + A12 u v + A22 v^2/2 + d u + e v + f in g0-orthonormal coordinates

    Returns:
        (fitted normal, orthonormal tangent frame (3, 2), A in that frame)
    """
    basis = _tangent_basis(g0, normal0)
    d = neighbors - x0
    u, v = d @ g0 @ basis[:, 0], d @ g0 @ basis[:, 1]
    w = d @ g0 @ normal0
    design = np.column_stack([0.5 * u ** 2, u * v, 0.5 * v ** 2, u, v, np.ones_like(u)])
    coef, *_ = np.linalg.lstsq(design, w, rcond=None)
    a11, a12, a22, du, dv, _ = coef

    tangents = np.column_stack([basis[:, 0] + du * normal0, basis[:, 1] + dv * normal0])
    hessian = np.array([[a11, a12], [a12, a22]])
    n_cov = np.cross(tangents[:, 0], tangents[:, 1])
    normal = np.linalg.solve(g0, n_cov)
    normal /= np.sqrt(normal @ n_cov)
    if normal @ g0 @ normal0 < 0:
        normal = -normal

    # A_ab = g(w_ab N0 + Gamma(T_a, T_b), N) with Gamma^k_ij = gamma0[k, i, j]
    christ = np.einsum("kij,ia,jb->kab", gamma0, tangents, tangents)
    a_coord = hessian * float(normal0 @ g0 @ normal) + np.einsum("kab,kl,l->ab", christ, g0, normal)
    first = tangents.T @ g0 @ tangents
    # orthonormal frame F = tangents C with C upper triangular
    l_chol = np.linalg.cholesky(first)
    c = np.linalg.inv(l_chol).T
    frame = tangents @ c
    a_frame = c.T @ a_coord @ c
    return normal, frame, 0.5 * (a_frame + a_frame.T)


# -----------------------------------
# Angles
# -----------------------------------

def _triangle_angles(surface: TriSurface, g: np.ndarray) -> np.ndarray:
    """(m, 3) g-angles at each triangle corner, metric frozen at the centroid"""
    v = surface.vertices[surface.triangles]
    angles = np.empty((surface.n_triangles, 3))
    for c in range(3):
        a = v[:, (c + 1) % 3] - v[:, c]
        b = v[:, (c + 2) % 3] - v[:, c]
        cos = g_dot(g, a, b) / np.sqrt(g_dot(g, a, a) * g_dot(g, b, b))
        angles[:, c] = np.arccos(np.clip(cos, -1.0, 1.0))
    return angles


# -----------------------------------
# Report
# -----------------------------------

def geometry_report(domain: PolyhedralDomain, surface: TriSurface, field: MetricField,
                    method: str = "auto") -> GeometryReport:
    """
    Mean curvature, second fundamental form, Gauss and geodesic curvature,
    corner angles and contact angles of a surface mesh

    Raises:
        DegenerateTriangle, OutOfDomain, StencilClipped, OpenContactCurve
    """
    n = surface.n_vertices
    geo = triangle_geometry(surface, field)
    mass = vertex_areas(surface, field, geo)
    curv = curvature_batch(field, surface.vertices, method)
    g = curv.metric

    # normals: area-weighted Euclidean normal as a covector, raised by g
    vertex_normals = unit_normals(g, surface.vertex_normals())

    # second fundamental form by quadric fits on 2-rings (3-rings on the boundary)
    ring2, ring3 = surface.rings(2), surface.rings(3)
    normals = np.empty((n, 3))
    frames = np.empty((n, 3, 2))
    second = np.empty((n, 2, 2))
    for i in range(n):
        rings = ring3 if surface.boundary_mask[i] else ring2
        nbrs = rings.indices[rings.indptr[i]:rings.indptr[i + 1]]
        normals[i], frames[i], second[i] = _fit_vertex(surface.vertices[i], surface.vertices[nbrs],
                                                       g[i], curv.christoffel[i], vertex_normals[i])
    h_fit = np.einsum("qaa->q", second)

    interior = np.flatnonzero(surface.interior_mask)
    corners = surface.corners.copy()
    boundary = np.flatnonzero(surface.tags == ON_FACE)

    h_var = h_fit.copy()
    grad = area_gradient(surface, field, geo)
    h_var[interior] = -np.einsum("qi,qi->q", grad[interior], normals[interior]) / mass[interior]

    sectional = curv.sectional(frames[:, :, 0], frames[:, :, 1])
    ricci_normal = curv.ricci_normal(normals)
    gauss_fit = sectional + np.linalg.det(second)

    angles = _triangle_angles(surface, geo.metric)
    angle_sums = np.zeros(n)
    for c in range(3):
        np.add.at(angle_sums, surface.triangles[:, c], angles[:, c])
    gauss_defect = np.zeros(n)
    gauss_defect[interior] = (2.0 * np.pi - angle_sums[interior]) / mass[interior]
    boundary_defect = np.full(n, np.nan)
    boundary_defect[boundary] = np.pi - angle_sums[boundary]

    tangents, conormals, kg, lengths, corner_tangent = _boundary_geometry(surface, g, curv.christoffel, normals)
    contact_vertices, contact_angles = [], []
    for j, face in enumerate(domain.faces):
        curve = surface.contact_curve(j)
        x = face_normal_field(field, face, surface.vertices[curve], g[curve])
        cos = np.clip(g_dot(g[curve], normals[curve], x), -1.0, 1.0)
        contact_vertices.append(curve)
        contact_angles.append(np.arccos(cos))

    report = GeometryReport(
        chi=surface.euler_characteristic(),
        points=surface.vertices.copy(),
        metric=g,
        mass=mass,
        normals=normals,
        frames=frames,
        second_form=second,
        mean_curvature=h_var,
        mean_curvature_fit=h_fit,
        gauss_defect=gauss_defect,
        gauss_fit=gauss_fit,
        angle_sums=angle_sums,
        boundary_defect=boundary_defect,
        geodesic_curvature=kg,
        boundary_length=lengths,
        tangents=tangents,
        conormals=conormals,
        corner_angles=angle_sums[corners],
        corner_angles_tangent=corner_tangent,
        contact_angles=contact_angles,
        contact_vertices=contact_vertices,
        scalar=curv.scalar,
        ricci_normal=ricci_normal,
        sectional=sectional,
        interior=interior,
        boundary=boundary,
        corners=corners,
    )
    logger.debug(f"Geometry report: chi={report.chi}, |H|_inf={report.max_mean_curvature:.3g}, "
                 f"corner angles={np.round(report.corner_angles, 6).tolist()}")
    return report


def _boundary_geometry(surface: TriSurface, g: np.ndarray, christoffel: np.ndarray, normals: np.ndarray):
    """Tangents, outward conormals, geodesic curvature by discrete turning, dual lengths"""
    n = surface.n_vertices
    loop = surface.boundary_loop
    prev = dict(zip(loop.tolist(), np.roll(loop, 1).tolist()))
    nxt = dict(zip(loop.tolist(), np.roll(loop, -1).tolist()))
    tangents = np.full((n, 3), np.nan)
    conormals = np.full((n, 3), np.nan)
    kg = np.full(n, np.nan)
    lengths = np.full(n, np.nan)
    corner_tangent = np.empty(len(surface.corners))
    x = surface.vertices

    for i in loop.tolist():
        gi = g[i]
        back, ahead = x[i] - x[prev[i]], x[nxt[i]] - x[i]
        lb, la = np.sqrt(back @ gi @ back), np.sqrt(ahead @ gi @ ahead)
        t_minus, t_plus = back / lb, ahead / la
        lengths[i] = 0.5 * (lb + la)
        if surface.tags[i] == ON_EDGE:
            continue
        t = t_minus + t_plus
        t /= np.sqrt(t @ gi @ t)
        conormal = np.linalg.solve(gi, np.cross(t, normals[i]))
        conormal /= np.sqrt(conormal @ gi @ conormal)
        accel = (t_plus - t_minus) / lengths[i] + np.einsum("kij,i,j->k", christoffel[i], t, t)
        tangents[i], conormals[i] = t, conormal
        kg[i] = -float(accel @ gi @ conormal)

    for c, i in enumerate(surface.corners.tolist()):
        gi = g[i]
        a, b = x[nxt[i]] - x[i], x[prev[i]] - x[i]
        cos = (a @ gi @ b) / np.sqrt((a @ gi @ a) * (b @ gi @ b))
        corner_tangent[c] = np.arccos(np.clip(cos, -1.0, 1.0))
    return tangents, conormals, kg, lengths, corner_tangent


# -----------------------------------
# Identities
# -----------------------------------

GAUSS_BONNET_PATHS = ("defect", "fit")


def gauss_bonnet_residual(report: GeometryReport, path: str = "defect") -> float:
    """
    |integral K + integral k_g + sum(pi - alpha_j) - 2 pi chi|

    The "defect" path uses angle-defect curvature and is exact up to rounding;
    the "fit" path uses Sec + det A and the turning-based k_g and is O(h).
    """
    corner_sum = float(np.sum(np.pi - report.corner_angles))
    if path == "defect":
        total = (float(np.sum(report.gauss_defect[report.interior] * report.mass[report.interior]))
                 + float(np.sum(report.boundary_defect[report.boundary])) + corner_sum)
    elif path == "fit":
        total = (float(np.sum(report.gauss_fit * report.mass))
                 + float(np.sum(report.geodesic_curvature[report.boundary] * report.boundary_length[report.boundary]))
                 + corner_sum)
    else:
        raise ValueError(f"Unsupported Gauss-Bonnet path: {path}. Supported paths: {', '.join(GAUSS_BONNET_PATHS)}")
    return abs(total - 2.0 * np.pi * report.chi)


@dataclass(frozen=True)
class BoundaryTerms:
    """Terms of the boundary identity at the non-corner boundary vertices"""
    vertices: np.ndarray
    faces: np.ndarray
    gamma: np.ndarray  # measured contact angles
    face_second_form: np.ndarray  # II(nu_bar, nu_bar)
    normal_second_form: np.ndarray  # A(nu, nu)
    geodesic_curvature: np.ndarray
    face_mean_curvature: np.ndarray
    mean_curvature: float

    @property
    def lhs(self) -> np.ndarray:
        return (self.face_second_form + np.cos(self.gamma) * self.normal_second_form
                + np.sin(self.gamma) * self.geodesic_curvature)

    @property
    def rhs(self) -> np.ndarray:
        return self.face_mean_curvature + np.cos(self.gamma) * self.mean_curvature

    @property
    def residual(self) -> float:
        return float(np.max(np.abs(self.lhs - self.rhs))) if len(self.vertices) else 0.0

    @property
    def robin(self) -> np.ndarray:
        """(1/sin gamma) II(nu_bar, nu_bar) + cot(gamma) A(nu, nu)"""
        return (self.face_second_form + np.cos(self.gamma) * self.normal_second_form) / np.sin(self.gamma)


def in_face_conormal(field_metric: np.ndarray, face, tangent: np.ndarray) -> np.ndarray:
    """g-unit vector in the face plane, g-orthogonal to the tangent, pointing to the base side"""
    gt = field_metric @ tangent
    v = (gt @ face.e_r) * face.e_s - (gt @ face.e_s) * face.e_r
    v /= np.sqrt(v @ field_metric @ v)
    return v if v @ face.e_r < 0 else -v


def boundary_terms(domain: PolyhedralDomain, report: GeometryReport, field: MetricField,
                   mean_curvature: float = 0.0) -> BoundaryTerms:
    """Evaluate II(nu_bar, nu_bar), A(nu, nu), k_g and H̄ along every contact curve"""
    verts = report.boundary
    faces = np.empty(len(verts), dtype=np.int64)
    ii = np.empty(len(verts))
    a_nn = np.empty(len(verts))
    h_bar = np.empty(len(verts))
    gamma = np.empty(len(verts))
    owners = {int(v): j for j, curve in enumerate(report.contact_vertices) for v in curve[1:-1]}
    for idx, v in enumerate(verts.tolist()):
        j = owners[v]
        face = domain.faces[j]
        gv = report.metric[v]
        x = report.tangents[v]
        nu_bar = in_face_conormal(gv, face, x)
        faces[idx] = j
        point = report.points[v][None, :]
        ii[idx] = float(face_second_form(field, face, point, nu_bar[None, :], nu_bar[None, :])[0])
        a_nn[idx] = report.second_form_at(v, report.conormals[v], report.conormals[v])
        h_bar[idx] = float(face_mean_curvature_batch(field, face, point)[0])
        xn = face_normal_field(field, face, point, gv[None])[0]
        gamma[idx] = float(np.arccos(np.clip(report.normals[v] @ gv @ xn, -1.0, 1.0)))
    return BoundaryTerms(vertices=verts, faces=faces, gamma=gamma, face_second_form=ii,
                         normal_second_form=a_nn, geodesic_curvature=report.geodesic_curvature[verts],
                         face_mean_curvature=h_bar, mean_curvature=float(mean_curvature))


def boundary_identity_residual(domain: PolyhedralDomain, surface: TriSurface, field: MetricField,
                               mean_curvature: float = 0.0, minimal_tolerance: Optional[float] = None,
                               report: Optional[GeometryReport] = None) -> float:
    """
    max |II(nu_bar, nu_bar) + cos(gamma) A(nu, nu) + sin(gamma) k_g - H̄ - cos(gamma) lambda|

    Args:
        mean_curvature: lambda, the constant mean curvature of the surface (0 for minimal)
        minimal_tolerance: accepted |H - lambda|_inf at interior vertices

    Raises:
        NotMinimal: the surface is not of constant mean curvature lambda within tolerance
    """
    report = geometry_report(domain, surface, field) if report is None else report
    tol = settings.minimal_tolerance if minimal_tolerance is None else minimal_tolerance
    deviation = float(np.max(np.abs(report.mean_curvature[report.interior] - mean_curvature))) \
        if len(report.interior) else 0.0
    if deviation > tol:
        raise NotMinimal(f"|H - {mean_curvature:.6g}|_inf = {deviation:.3g} exceeds {tol:.3g}",
                         {"mean_curvature": mean_curvature})
    terms = boundary_terms(domain, report, field, mean_curvature)
    logger.debug(f"Boundary identity residual {terms.residual:.3g} over {len(terms.vertices)} vertices")
    return terms.residual


def gauss_equation_residual(report: GeometryReport, path: str = "fit") -> np.ndarray:
    """
    Pointwise |(|A|^2 + Ric(N, N)) - (R - 2K + H^2 + |A|^2) / 2|

    With path="fit" K is Sec(T1, T2) + det A at every vertex; with path="defect"
    the angle-defect curvature is used and only interior vertices are returned.
    """
    a2 = report.norm_a_squared
    h = report.mean_curvature_fit
    if path == "fit":
        k, idx = report.gauss_fit, np.arange(len(a2))
    elif path == "defect":
        idx = report.interior
        k = report.gauss_defect
    else:
        raise ValueError(f"Unsupported Gauss-equation path: {path}. Supported paths: {', '.join(GAUSS_BONNET_PATHS)}")
    lhs = a2 + report.ricci_normal
    rhs = 0.5 * (report.scalar - 2.0 * k + h ** 2 + a2)
    return np.abs(lhs - rhs)[idx]


# -----------------------------------
# Corner regularity
# -----------------------------------

@dataclass(frozen=True)
class CornerProbe:
    """Normal oscillation near a corner over a refinement sequence"""
    corner: int
    radii: np.ndarray
    oscillation: np.ndarray
    exponent: Optional[float]

    def to_dict(self):
        return {
            "corner": self.corner,
            "radii": self.radii.tolist(),
            "oscillation": self.oscillation.tolist(),
            "exponent": self.exponent,
        }


def corner_regularity_probe(surfaces: Sequence[TriSurface], corner: int, radius_factor: float = 4.0,
                            floor: float = 1e-12) -> CornerProbe:
    """
    Oscillation of the unit normal in balls around a corner, one ball per refinement level

    The ball radius is radius_factor times the level's mean edge length. The
    reported exponent is the slope of log(oscillation) against log(radius);
    it is None when every oscillation is below `floor`.

    Raises:
        InsufficientLevels: fewer than three surfaces
    """
    if len(surfaces) < 3:
        raise InsufficientLevels(f"Corner probe needs at least 3 refinement levels, got {len(surfaces)}")
    radii, osc = [], []
    for surface in surfaces:
        v = int(surface.corners[corner])
        r = radius_factor * surface.mean_edge_length()
        normals = surface.vertex_normals()
        near = np.linalg.norm(surface.vertices - surface.vertices[v], axis=1) <= r
        radii.append(r)
        osc.append(float(np.max(np.linalg.norm(normals[near] - normals[v], axis=1))))
    radii, osc = np.array(radii), np.array(osc)
    exponent = None
    if np.all(osc > floor):
        exponent = float(np.polyfit(np.log(radii), np.log(osc), 1)[0])
    logger.info(f"Corner {corner} probe: oscillation {np.round(osc, 8).tolist()}, exponent {exponent}")
    return CornerProbe(corner=corner, radii=radii, oscillation=osc, exponent=exponent)
