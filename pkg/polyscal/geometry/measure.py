"""
Metric measurements on the faces and edges of a polyhedral domain

Conventions: X is the g-unit outward normal of a side face, extended off the
face by the parallel coordinate planes. The face mean curvature is
H̄ = div_g X (positive on mean convex faces) and the face second fundamental
form is II(a, b) = <nabla_a b, -X> for tangent coordinate vectors a, b.
"""
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from loguru import logger

from ..errors import OutOfDomain
from ..fields.base import MetricField, evaluate_metric
from ..fields.curvature import christoffel_first_kind
from .domain import Edge, PolyhedralDomain, SideFace


def g_dot(g: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Batched g(a, b) for g (n,3,3) and vectors (n,3)"""
    return np.einsum("ni,nij,nj->n", a, g, b)


def g_norm(g: np.ndarray, a: np.ndarray) -> np.ndarray:
    return np.sqrt(g_dot(g, a, a))


def _edge(domain: PolyhedralDomain, edge: Union[int, Edge]) -> Edge:
    return domain.edges[edge % domain.k] if isinstance(edge, (int, np.integer)) else edge


def _face(domain: PolyhedralDomain, face: Union[int, SideFace]) -> SideFace:
    return domain.faces[face % domain.k] if isinstance(face, (int, np.integer)) else face


# -----------------------------------
# Dihedral angles
# -----------------------------------

def _in_face_direction(face: SideFace, point: np.ndarray, tangent: np.ndarray) -> np.ndarray:
    m = np.cross(face.normal, tangent)
    if (face.centroid - point) @ m < 0:
        m = -m
    return m


def dihedral_angle(domain: PolyhedralDomain, field: MetricField, edge: Union[int, Edge],
                   s: float) -> float:
    """
    Angle between F_j and F_{j+1} at arclength s along L_j, measured in g

    Each face contributes its in-face direction orthogonal (in g) to the edge
    tangent; the angle between the two is the dihedral angle.

    Raises:
        OutOfDomain: s outside [0, length] or the point outside the metric box
    """
    e = _edge(domain, edge)
    if not -1e-12 <= s <= e.length + 1e-12:
        raise OutOfDomain(f"Edge parameter {s} outside [0, {e.length}]", {"edge": e.index})
    point = e.point(float(s))
    g = evaluate_metric(field, point)
    tau = e.direction
    dirs = []
    for face in (domain.faces[e.index], domain.faces[(e.index + 1) % domain.k]):
        m = _in_face_direction(face, point, tau)
        m = m - (m @ g @ tau) / (tau @ g @ tau) * tau
        dirs.append(m)
    m1, m2 = dirs
    cos = (m1 @ g @ m2) / np.sqrt((m1 @ g @ m1) * (m2 @ g @ m2))
    return float(np.arccos(np.clip(cos, -1.0, 1.0)))


# -----------------------------------
# Face normal, mean curvature, second fundamental form
# -----------------------------------

def face_normal_field(field: MetricField, face: SideFace, points: np.ndarray,
                      g: Optional[np.ndarray] = None) -> np.ndarray:
    """g-unit outward normal X of the coordinate planes parallel to the face"""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    g = field.components(pts) if g is None else g
    w = np.linalg.solve(g, np.broadcast_to(face.normal, pts.shape)[..., None])[..., 0]
    return w / np.sqrt(w @ face.normal)[:, None]


def face_mean_curvature_batch(field: MetricField, face: SideFace, points: np.ndarray) -> np.ndarray:
    """H̄ = div_g X at a batch of points, from first derivatives of the metric"""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    g = field.components(pts)
    dg = field.derivatives(pts)
    ginv = np.linalg.inv(g)
    n = face.normal
    w = ginv @ n
    sigma = np.sqrt(w @ n)
    # dw[q, b, a] = d_b w^a
    dw = -np.einsum("qap,qbpk,qk->qba", ginv, dg, w)
    div_w = np.einsum("qaa->q", dw)
    dsigma = np.einsum("a,qba->qb", n, dw) / (2.0 * sigma[:, None])
    div_x = div_w / sigma - np.einsum("qa,qa->q", w, dsigma) / sigma ** 2
    dlog_vol = 0.5 * np.einsum("qij,qbji->qb", ginv, dg)
    return div_x + np.einsum("qa,qa->q", w, dlog_vol) / sigma


def face_mean_curvature(domain: PolyhedralDomain, field: MetricField,
                        face: Union[int, SideFace], x: Sequence[float]) -> float:
    """
    Mean curvature H̄ of a side face at a point, with respect to the outward normal

    Raises:
        OutOfDomain: x not on the face
        StencilClipped: finite-difference derivatives need points outside the metric box
    """
    f = _face(domain, face)
    pts = np.asarray(x, dtype=float).reshape(1, 3)
    if not f.contains(pts, tol=1e-9 * domain.scale)[0]:
        raise OutOfDomain(f"Point {list(x)} is not on side face {f.index}", {"face": f.index})
    return float(face_mean_curvature_batch(field, f, pts)[0])


def face_second_form(field: MetricField, face: SideFace, points: np.ndarray,
                     a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """II(a, b) for per-point tangent vectors a, b (n, 3) of a planar face"""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    g = field.components(pts)
    x = face_normal_field(field, face, pts, g)
    gamma = christoffel_first_kind(field.derivatives(pts))
    return -np.einsum("qijl,qi,qj,ql->q", gamma, a, b, x)


def face_sample_points(face: SideFace, count: int = 5, margin: float = 0.05) -> np.ndarray:
    """Grid points inside a face, kept away from its boundary by a fraction of its size"""
    poly = face.chart_polygon
    lo, hi = poly.min(axis=0), poly.max(axis=0)
    size = float(np.max(hi - lo))
    grid = np.linspace(0.0, 1.0, count + 2)[1:-1]
    st = np.array([[lo[0] + u * (hi[0] - lo[0]), lo[1] + v * (hi[1] - lo[1])]
                   for v in grid for u in grid])
    poly_ccw = poly if _ccw(poly) else poly[::-1]
    inside = np.ones(len(st), dtype=bool)
    for p0, p1 in zip(poly_ccw, np.roll(poly_ccw, -1, axis=0)):
        edge = p1 - p0
        cross = edge[0] * (st[:, 1] - p0[1]) - edge[1] * (st[:, 0] - p0[0])
        inside &= cross >= margin * size * np.linalg.norm(edge)
    return face.from_chart(st[inside])


def _ccw(poly: np.ndarray) -> bool:
    x, y = poly[:, 0], poly[:, 1]
    return float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)) > 0


# -----------------------------------
# Hypotheses
# -----------------------------------

@dataclass(frozen=True)
class EdgeAngleCheck:
    """Measured dihedral angles along one edge against the angle window"""
    index: int
    lower_bound: float
    model_angle: float
    min_angle: float
    max_angle: float

    @property
    def satisfied(self) -> bool:
        return self.lower_bound < self.min_angle and self.max_angle < np.pi

    @property
    def below_model(self) -> bool:
        return self.max_angle <= self.model_angle + 1e-10

    def to_dict(self) -> Dict[str, float]:
        return {
            "edge": self.index,
            "lower_bound": self.lower_bound,
            "model_angle": self.model_angle,
            "min_angle": self.min_angle,
            "max_angle": self.max_angle,
            "satisfied": self.satisfied,
            "below_model": self.below_model,
        }


@dataclass(frozen=True)
class HypothesisReport:
    edges: List[EdgeAngleCheck]
    gamma: np.ndarray
    one_sided: bool

    @property
    def angle_condition(self) -> bool:
        return all(e.satisfied for e in self.edges)

    @property
    def all_below_model(self) -> bool:
        return all(e.below_model for e in self.edges)

    def to_dict(self):
        return {
            "edges": [e.to_dict() for e in self.edges],
            "gamma": self.gamma.tolist(),
            "one_sided": self.one_sided,
            "angle_condition": self.angle_condition,
            "all_below_model": self.all_below_model,
        }


def check_hypotheses(domain: PolyhedralDomain, field: MetricField,
                     gamma: Union[str, Sequence[float], None] = "model",
                     samples: int = 9) -> HypothesisReport:
    """
    Evaluate the edge angle window and the one-sided contact angle condition

    For each edge, the measured g-dihedral angle is sampled along the edge and
    compared with |pi - (gamma_j + gamma_{j+1})| < angle < pi.
    """
    gam = domain.contact_angles(gamma)
    model = domain.model_angles()
    checks = []
    for e in domain.edges:
        j = e.index
        angles = np.array([dihedral_angle(domain, field, e, s)
                           for s in np.linspace(0.0, e.length, samples)])
        checks.append(EdgeAngleCheck(
            index=j,
            lower_bound=float(abs(np.pi - (gam[j] + gam[(j + 1) % domain.k]))),
            model_angle=float(model.theta[j]),
            min_angle=float(angles.min()),
            max_angle=float(angles.max()),
        ))
    tol = 1e-12
    one_sided = bool(np.all(gam <= np.pi / 2 + tol) or np.all(gam >= np.pi / 2 - tol))
    report = HypothesisReport(edges=checks, gamma=gam, one_sided=one_sided)
    logger.debug(f"Hypotheses: angle window {'holds' if report.angle_condition else 'fails'}, "
                 f"one-sided gamma {one_sided}")
    return report


@dataclass(frozen=True)
class MeanConvexityReport:
    min_per_face: np.ndarray
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.all(self.min_per_face >= -self.tolerance))

    def to_dict(self):
        return {"min_per_face": self.min_per_face.tolist(), "tolerance": self.tolerance,
                "passed": self.passed}


def check_mean_convexity(domain: PolyhedralDomain, field: MetricField, count: int = 5,
                         tolerance: float = 0.0) -> MeanConvexityReport:
    """Sample H̄ on every side face and report the per-face minimum"""
    mins = np.array([float(face_mean_curvature_batch(field, face, face_sample_points(face, count)).min())
                     for face in domain.faces])
    return MeanConvexityReport(min_per_face=mins, tolerance=float(tolerance))
