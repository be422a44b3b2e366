"""
Exact flat-space wedge geometry

A wedge is bounded by two half-planes through a common edge line, with opening
angle theta' in (0, pi) and outward unit normals nu1, nu2 (nu1 . nu2 = -cos theta').
A plane with unit normal nu meets face j at contact angle gamma_j when
nu . nu_j = cos gamma_j. All functions here are closed-form vector algebra.
"""
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import BadAngle, EmptySlice, NoSolution, Tangential
from .domain import PolyhedralDomain

_WINDOW_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class Wedge:
    """Two half-planes through an edge; d1, d2 point from the edge into each face"""
    edge: np.ndarray
    nu1: np.ndarray
    nu2: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    opening: float

    def validate(self) -> None:
        if not 0.0 < self.opening < np.pi:
            raise BadAngle(f"Wedge opening {self.opening} outside (0, pi)")
        if abs(self.nu1 @ self.nu2 + np.cos(self.opening)) > 1e-12:
            raise BadAngle("Wedge normals do not match the opening angle")

    @classmethod
    def from_opening(cls, opening: float) -> "Wedge":
        """Canonical wedge: edge along +z, first face along +x, opening counterclockwise"""
        if not 0.0 < opening < np.pi:
            raise BadAngle(f"Wedge opening {opening} outside (0, pi)")
        c, s = np.cos(opening), np.sin(opening)
        return cls(
            edge=np.array([0.0, 0.0, 1.0]),
            nu1=np.array([0.0, -1.0, 0.0]),
            nu2=np.array([-s, c, 0.0]),
            d1=np.array([1.0, 0.0, 0.0]),
            d2=np.array([c, s, 0.0]),
            opening=float(opening),
        )

    @classmethod
    def from_domain_edge(cls, domain: PolyhedralDomain, index: int) -> "Wedge":
        """Wedge formed by F_j and F_{j+1} of the Euclidean model along L_j"""
        edge = domain.edges[index % domain.k]
        f1, f2 = domain.faces[edge.index], domain.faces[(edge.index + 1) % domain.k]
        tau = edge.direction
        d1 = np.cross(f1.normal, tau)
        d1 = d1 if (f1.centroid - edge.start) @ d1 > 0 else -d1
        d2 = np.cross(f2.normal, tau)
        d2 = d2 if (f2.centroid - edge.start) @ d2 > 0 else -d2
        opening = float(np.arccos(np.clip(-f1.normal @ f2.normal, -1.0, 1.0)))
        return cls(edge=tau, nu1=f1.normal, nu2=f2.normal, d1=d1, d2=d2, opening=opening)


def _check_gamma(*angles: float) -> None:
    for a in angles:
        if not 0.0 < a < np.pi:
            raise BadAngle(f"Contact angle {a} outside (0, pi)")


def angle_window(gamma1: float, gamma2: float) -> Tuple[float, float]:
    """
    Open interval of wedge openings admitting a transverse plane with these contact angles

    Returns:
        (|pi - (gamma1 + gamma2)|, pi - |gamma1 - gamma2|)

    Raises:
        BadAngle: an angle outside (0, pi)
    """
    _check_gamma(gamma1, gamma2)
    return abs(np.pi - (gamma1 + gamma2)), np.pi - abs(gamma1 - gamma2)


def in_window(gamma1: float, gamma2: float, opening: float) -> bool:
    lo, hi = angle_window(gamma1, gamma2)
    return lo < opening < hi


def _discriminant(gamma1: float, gamma2: float, opening: float) -> float:
    # sin^2 g1 sin^2 g2 - (cos t + cos g1 cos g2)^2; positive iff opening is inside the window
    return (np.sin(gamma1) * np.sin(gamma2)) ** 2 - (np.cos(opening) + np.cos(gamma1) * np.cos(gamma2)) ** 2


def _check_window(gamma1: float, gamma2: float, opening: float) -> None:
    _check_gamma(gamma1, gamma2)
    if not 0.0 < opening < np.pi:
        raise BadAngle(f"Wedge opening {opening} outside (0, pi)")
    lo, hi = angle_window(gamma1, gamma2)
    scale = max(1.0, opening)
    if abs(opening - lo) <= _WINDOW_TOL * scale or abs(opening - hi) <= _WINDOW_TOL * scale:
        raise Tangential(f"Opening {opening} lies on the window boundary ({lo}, {hi})")
    if not lo < opening < hi:
        raise NoSolution(f"Opening {opening} outside the window ({lo}, {hi})")


def plane_from_contact_angles(wedge: Wedge, gamma1: float, gamma2: float) -> np.ndarray:
    """
    Unit normal of the plane meeting the wedge faces at gamma1, gamma2

    The normal is nu = a nu1 + b nu2 + c e with e the edge direction. The
    component c is fixed up to sign; the returned normal has c > 0.

    Raises:
        NoSolution: opening outside the window
        Tangential: opening on the window boundary
    """
    _check_window(gamma1, gamma2, wedge.opening)
    c1, c2 = np.cos(gamma1), np.cos(gamma2)
    ct = -float(wedge.nu1 @ wedge.nu2)
    s2 = 1.0 - ct ** 2
    a = (c1 + ct * c2) / s2
    b = (c2 + ct * c1) / s2
    in_plane = a * wedge.nu1 + b * wedge.nu2
    rest = 1.0 - float(in_plane @ in_plane)
    if rest <= 0.0:
        raise Tangential("Contact plane degenerates to a plane containing the edge")
    e = wedge.edge / np.linalg.norm(wedge.edge)
    nu = in_plane + np.sqrt(rest) * e
    return nu / np.linalg.norm(nu)


def measure_contact_angles(wedge: Wedge, normal: np.ndarray) -> Tuple[float, float]:
    """Contact angles of the plane with unit normal `normal` against the two faces"""
    nu = np.asarray(normal, dtype=float) / np.linalg.norm(normal)
    return (float(np.arccos(np.clip(nu @ wedge.nu1, -1.0, 1.0))),
            float(np.arccos(np.clip(nu @ wedge.nu2, -1.0, 1.0))))


def corner_angle(gamma1: float, gamma2: float, opening: float) -> float:
    """
    Angle at the corner between the traces of the contact plane on the two faces

    cos alpha = (cos gamma1 cos gamma2 + cos theta') / (sin gamma1 sin gamma2)

    Raises:
        NoSolution: opening outside the window
    """
    _check_window(gamma1, gamma2, opening)
    cos_alpha = (np.cos(gamma1) * np.cos(gamma2) + np.cos(opening)) / (np.sin(gamma1) * np.sin(gamma2))
    return float(np.arccos(np.clip(cos_alpha, -1.0, 1.0)))


def corner_angle_from_planes(wedge: Wedge, gamma1: float, gamma2: float) -> float:
    """Corner angle by intersecting the contact plane with each face and measuring the trace lines"""
    nu = plane_from_contact_angles(wedge, gamma1, gamma2)
    lines = []
    for face_normal, into_face in ((wedge.nu1, wedge.d1), (wedge.nu2, wedge.d2)):
        line = np.cross(nu, face_normal)
        line /= np.linalg.norm(line)
        if line @ into_face < 0:
            line = -line
        lines.append(line)
    return float(np.arccos(np.clip(lines[0] @ lines[1], -1.0, 1.0)))


def corner_angle_monotonicity_check(gamma1: float, gamma2: float,
                                    opening_a: float, opening_b: float) -> bool:
    """alpha(opening_a) <= alpha(opening_b) for opening_a <= opening_b"""
    if opening_a > opening_b:
        raise ValueError(f"Openings must be ordered, got {opening_a} > {opening_b}")
    return corner_angle(gamma1, gamma2, opening_a) <= corner_angle(gamma1, gamma2, opening_b)


# -----------------------------------
# Planar slices of the flat model
# -----------------------------------

@dataclass(frozen=True)
class Plane:
    """Plane {x : normal . x = offset}; the E side is normal . x > offset"""
    normal: np.ndarray
    offset: float

    @classmethod
    def horizontal(cls, height: float) -> "Plane":
        return cls(np.array([0.0, 0.0, 1.0]), float(height))

    @classmethod
    def through(cls, normal: Sequence[float], point: Sequence[float]) -> "Plane":
        n = np.asarray(normal, dtype=float)
        n = n / np.linalg.norm(n)
        return cls(n, float(n @ np.asarray(point, dtype=float)))

    def side(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float).reshape(-1, 3) @ self.normal - self.offset


def polygon_area_3d(poly: np.ndarray) -> float:
    """Area of a planar polygon in 3-space (Newell's formula)"""
    if len(poly) < 3:
        return 0.0
    total = np.sum(np.cross(poly, np.roll(poly, -1, axis=0)), axis=0)
    return 0.5 * float(np.linalg.norm(total))


def clip_polygon(poly: np.ndarray, plane: Plane) -> np.ndarray:
    """Part of a convex polygon on the E side of a plane (Sutherland-Hodgman)"""
    out = []
    dist = plane.side(poly)
    for i in range(len(poly)):
        j = (i + 1) % len(poly)
        p, q, dp, dq = poly[i], poly[j], dist[i], dist[j]
        if dp >= 0:
            out.append(p)
        if (dp > 0 > dq) or (dp < 0 < dq):
            out.append(p + (dp / (dp - dq)) * (q - p))
    return np.array(out) if out else np.zeros((0, 3))


def slice_section(domain: PolyhedralDomain, plane: Plane) -> np.ndarray:
    """
    Section polygon of the slice, one vertex per side edge in edge order

    Raises:
        EmptySlice: the plane does not cross every side edge strictly inside
    """
    points = []
    for edge in domain.edges:
        ds, de = plane.side(edge.start)[0], plane.side(edge.end)[0]
        if not (ds < 0 < de):
            raise EmptySlice(f"Plane does not cross side edge {edge.index} between base and top",
                             {"edge": edge.index})
        points.append(edge.start + (ds / (ds - de)) * (edge.end - edge.start))
    return np.array(points)


@dataclass(frozen=True)
class SliceIdentity:
    """Exact areas of a planar slice of the flat model and its energy"""
    section_area: float
    wetted: np.ndarray
    gamma: np.ndarray

    @property
    def residual(self) -> float:
        return self.section_area - float(np.sum(np.cos(self.gamma) * self.wetted))

    def to_dict(self):
        return {
            "section_area": self.section_area,
            "wetted": self.wetted.tolist(),
            "gamma": self.gamma.tolist(),
            "residual": self.residual,
        }


def cone_slice_identity(domain: PolyhedralDomain, plane: Plane,
                        gamma: Union[str, Sequence[float], None] = "model") -> SliceIdentity:
    """
    Section area minus the cos(gamma)-weighted face areas on the E side of a plane

    With the model angles and a plane parallel to the base this vanishes: the
    projection onto the section plane restricted to F_j has Jacobian cos(gamma_j).

    Raises:
        EmptySlice: the plane misses the interior
    """
    gam = domain.contact_angles(gamma)
    section = slice_section(domain, plane)
    wetted = np.array([polygon_area_3d(clip_polygon(face.vertices, plane)) for face in domain.faces])
    return SliceIdentity(section_area=polygon_area_3d(section), wetted=wetted, gamma=gam)
