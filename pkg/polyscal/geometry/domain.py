"""
Cone-type and prism-type polyhedral domains

Coordinates are those of the Euclidean reference polyhedron P. The base B lies
in the plane z = 0 with vertices b_0..b_{k-1} in counterclockwise order. A cone
has apex p with p_z > 0; a prism has top B2 = s*B + t with s > 0 and t_z > 0.

Side face F_j is bounded below by the base edge b_j -> b_{j+1}. Edge L_j is
F_j ∩ F_{j+1} and runs from b_{j+1} up to the apex or to q_{j+1}. Indices are
taken mod k.

Both kinds share the ruled parametrization
    X(y, z) = (1 - (1 - s) z / t_z) y + (z / t_z) t
with s = 0 and t = p for a cone; horizontal sections are X(B, z).
"""
from dataclasses import dataclass, field as dataclass_field
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from ..config import settings
from ..errors import BadAngle, DegenerateFace, InvalidDomain
from ..fields.base import Box


@dataclass(frozen=True)
class ModelAngles:
    """Euclidean model angles of a polyhedron, in radians"""
    gamma: np.ndarray  # base-to-side dihedral angles
    theta: np.ndarray  # side-to-side dihedral angles along L_j
    alpha: np.ndarray  # base interior angles at b_{j+1}

    def validate(self) -> None:
        if np.any((self.gamma <= 0) | (self.gamma >= np.pi)):
            raise BadAngle(f"Model contact angles leave (0, pi): {self.gamma.tolist()}")
        if np.any((self.theta <= 0) | (self.theta >= np.pi)):
            raise BadAngle(f"Model dihedral angles leave (0, pi): {self.theta.tolist()}")

    def exterior_angle_sum(self) -> float:
        return float(np.sum(np.pi - self.alpha))

    def to_dict(self) -> Dict[str, List[float]]:
        return {
            "gamma": self.gamma.tolist(),
            "theta": self.theta.tolist(),
            "alpha": self.alpha.tolist(),
        }


@dataclass(frozen=True, eq=False)
class SideFace:
    """Planar side face with an orthonormal chart (s along the base edge, r up the face)"""
    index: int
    vertices: np.ndarray
    normal: np.ndarray
    origin: np.ndarray
    e_s: np.ndarray
    e_r: np.ndarray

    def to_chart(self, points: np.ndarray) -> np.ndarray:
        d = np.asarray(points, dtype=float).reshape(-1, 3) - self.origin
        return np.stack([d @ self.e_s, d @ self.e_r], axis=1)

    def from_chart(self, st: np.ndarray) -> np.ndarray:
        st = np.asarray(st, dtype=float).reshape(-1, 2)
        return self.origin + st[:, :1] * self.e_s + st[:, 1:] * self.e_r

    @property
    def chart_polygon(self) -> np.ndarray:
        return self.to_chart(self.vertices)

    @property
    def area(self) -> float:
        poly = self.chart_polygon
        x, y = poly[:, 0], poly[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    @property
    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def plane_distance(self, points: np.ndarray) -> np.ndarray:
        """Signed distance to the face plane, positive outside"""
        return (np.asarray(points, dtype=float).reshape(-1, 3) - self.origin) @ self.normal

    def contains(self, points: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        """Points on the face plane and inside the face polygon (within tol)"""
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        on_plane = np.abs(self.plane_distance(pts)) <= tol
        return on_plane & _inside_convex(self.chart_polygon, self.to_chart(pts), tol)


@dataclass(frozen=True, eq=False)
class Edge:
    """Side edge L_j = F_j ∩ F_{j+1}, oriented from the base upwards"""
    index: int
    start: np.ndarray
    end: np.ndarray

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.end - self.start))

    @property
    def direction(self) -> np.ndarray:
        return (self.end - self.start) / self.length

    def point(self, s: Union[float, np.ndarray]) -> np.ndarray:
        """Point at Euclidean arclength s from the base vertex"""
        s = np.asarray(s, dtype=float)
        return self.start + s[..., None] * self.direction

    def distance(self, points: np.ndarray) -> np.ndarray:
        """Distance from points to the edge line"""
        d = np.asarray(points, dtype=float).reshape(-1, 3) - self.start
        along = d @ self.direction
        return np.linalg.norm(d - along[:, None] * self.direction, axis=1)


def _inside_convex(polygon: np.ndarray, points: np.ndarray, tol: float) -> np.ndarray:
    """Containment in a convex counterclockwise 2D polygon"""
    inside = np.ones(len(points), dtype=bool)
    for a, b in zip(polygon, np.roll(polygon, -1, axis=0)):
        edge = b - a
        length = np.linalg.norm(edge)
        cross = edge[0] * (points[:, 1] - a[1]) - edge[1] * (points[:, 0] - a[0])
        inside &= cross >= -tol * length
    return inside


def _signed_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


@dataclass(frozen=True, eq=False)
class PolyhedralDomain:
    """
    Cone or prism over a convex polygon

    Use PolyhedralDomain.cone / PolyhedralDomain.prism / PolyhedralDomain.from_config
    rather than the raw constructor.
    """
    kind: str
    base: np.ndarray  # (k, 3), z = 0
    top_scale: float  # s; 0 for a cone
    top_offset: np.ndarray  # t; the apex for a cone
    faces: List[SideFace] = dataclass_field(default_factory=list, repr=False)
    edges: List[Edge] = dataclass_field(default_factory=list, repr=False)

    # -----------------------------------
    # Construction
    # -----------------------------------

    @classmethod
    def cone(cls, base: Sequence[Sequence[float]], apex: Sequence[float]) -> "PolyhedralDomain":
        return cls._build("cone", base, 0.0, apex)

    @classmethod
    def prism(cls, base: Sequence[Sequence[float]], top_scale: float,
              top_offset: Sequence[float]) -> "PolyhedralDomain":
        if top_scale <= 0:
            raise InvalidDomain(f"Prism top scale must be positive, got {top_scale}")
        return cls._build("prism", base, float(top_scale), top_offset)

    @classmethod
    def unit_cube(cls) -> "PolyhedralDomain":
        return cls.prism([[0, 0], [1, 0], [1, 1], [0, 1]], 1.0, [0, 0, 1])

    @classmethod
    def from_config(cls, config: Dict[str, Any]) -> "PolyhedralDomain":
        """Build from {"kind", "base", "apex"} or {"kind", "base", "top_scale", "top_offset"}"""
        kind = config.get("kind")
        if "base" not in config:
            raise InvalidDomain("Domain config is missing 'base'")
        if kind == "cone":
            if "apex" not in config:
                raise InvalidDomain("Cone domain config is missing 'apex'")
            return cls.cone(config["base"], config["apex"])
        if kind == "prism":
            return cls.prism(config["base"], config.get("top_scale", 1.0),
                             config.get("top_offset", [0.0, 0.0, 1.0]))
        raise InvalidDomain(f"Unsupported domain kind: {kind}. Supported kinds: cone, prism")

    def to_config(self) -> Dict[str, Any]:
        config: Dict[str, Any] = {"kind": self.kind, "base": self.base[:, :2].tolist()}
        if self.kind == "cone":
            config["apex"] = self.top_offset.tolist()
        else:
            config["top_scale"] = self.top_scale
            config["top_offset"] = self.top_offset.tolist()
        return config

    @classmethod
    def _build(cls, kind, base, top_scale, top_offset) -> "PolyhedralDomain":
        base = np.asarray(base, dtype=float)
        if base.ndim != 2 or base.shape[1] not in (2, 3):
            raise InvalidDomain(f"Base must be a list of 2D points, got shape {base.shape}")
        if base.shape[1] == 3:
            if np.any(np.abs(base[:, 2]) > 0):
                raise InvalidDomain("Base polygon must lie in the plane z = 0")
            base = base[:, :2]
        k = len(base)
        if k < 3:
            raise InvalidDomain(f"Base polygon needs at least 3 vertices, got {k}")
        offset = np.asarray(top_offset, dtype=float).reshape(3)
        if offset[2] <= 0:
            raise InvalidDomain(f"{'Apex' if kind == 'cone' else 'Top'} must lie above the base plane "
                                f"(z > 0), got z = {offset[2]}")

        scale = float(np.max(np.ptp(base, axis=0)))
        tol = settings.degeneracy_tolerance
        if _signed_area(base) <= 0:
            raise InvalidDomain("Base vertices must be ordered counterclockwise")
        edges = np.roll(base, -1, axis=0) - base
        if np.any(np.linalg.norm(edges, axis=1) <= tol * scale):
            raise DegenerateFace("Base polygon has a zero-length edge")
        turns = edges[:, 0] * np.roll(edges, -1, axis=0)[:, 1] - edges[:, 1] * np.roll(edges, -1, axis=0)[:, 0]
        if np.any(turns <= tol * scale ** 2):
            raise InvalidDomain("Base polygon must be strictly convex")

        base3 = np.column_stack([base, np.zeros(k)])
        domain = cls(kind=kind, base=base3, top_scale=float(top_scale), top_offset=offset)
        object.__setattr__(domain, "faces", domain._build_faces())
        object.__setattr__(domain, "edges", domain._build_edges())
        return domain

    def _build_faces(self) -> List[SideFace]:
        tol = settings.degeneracy_tolerance * self.scale ** 2
        center = self.centroid
        faces = []
        for j in range(self.k):
            b0, b1 = self.base[j], self.base[(j + 1) % self.k]
            if self.kind == "cone":
                verts = np.array([b0, b1, self.apex])
                up = self.apex - b0
            else:
                q0, q1 = self.top[j], self.top[(j + 1) % self.k]
                verts = np.array([b0, b1, q1, q0])
                up = q0 - b0
            e_s = (b1 - b0) / np.linalg.norm(b1 - b0)
            r_vec = up - (up @ e_s) * e_s
            if np.linalg.norm(r_vec) <= np.sqrt(tol):
                raise DegenerateFace(f"Side face {j} has zero height", {"face": j})
            e_r = r_vec / np.linalg.norm(r_vec)
            normal = np.cross(e_s, e_r)
            if (verts.mean(axis=0) - center) @ normal < 0:
                normal = -normal
            face = SideFace(index=j, vertices=verts, normal=normal, origin=b0, e_s=e_s, e_r=e_r)
            if abs(face.area) <= tol:
                raise DegenerateFace(f"Side face {j} has near-zero area", {"face": j})
            faces.append(face)
        return faces

    def _build_edges(self) -> List[Edge]:
        edges = []
        for j in range(self.k):
            start = self.base[(j + 1) % self.k]
            end = self.apex if self.kind == "cone" else self.top[(j + 1) % self.k]
            edges.append(Edge(index=j, start=start, end=end))
        return edges

    # -----------------------------------
    # Basic geometry
    # -----------------------------------

    @property
    def k(self) -> int:
        return len(self.base)

    @property
    def is_cone(self) -> bool:
        return self.kind == "cone"

    @property
    def height(self) -> float:
        return float(self.top_offset[2])

    @property
    def apex(self) -> Optional[np.ndarray]:
        return self.top_offset if self.kind == "cone" else None

    @property
    def top(self) -> Optional[np.ndarray]:
        if self.kind == "cone":
            return None
        return self.top_scale * self.base + self.top_offset

    @property
    def vertices(self) -> np.ndarray:
        upper = self.apex[None, :] if self.kind == "cone" else self.top
        return np.vstack([self.base, upper])

    @property
    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    @property
    def scale(self) -> float:
        """Largest side of the bounding box"""
        return float(np.max(np.ptp(self.vertices, axis=0)))

    @property
    def base_area(self) -> float:
        return _signed_area(self.base[:, :2])

    def metric_box(self, padding: Optional[float] = None) -> Box:
        """Box on which metrics for this domain are evaluated"""
        return Box.around(self.vertices, padding)

    def upper_point(self) -> np.ndarray:
        """Apex of a cone or centroid of the top face of a prism"""
        return self.apex if self.kind == "cone" else self.top.mean(axis=0)

    # -----------------------------------
    # Ruled coordinates
    # -----------------------------------

    def ruled_point(self, y: np.ndarray, z: Union[float, np.ndarray]) -> np.ndarray:
        """X(y, z) for base-plane points y (n, 2 or 3) and heights z"""
        y3 = self._lift(y)
        z = np.broadcast_to(np.asarray(z, dtype=float), (len(y3),))
        frac = z / self.height
        return (1.0 - (1.0 - self.top_scale) * frac)[:, None] * y3 + frac[:, None] * self.top_offset

    def flow_vector(self, y: np.ndarray) -> np.ndarray:
        """Y = dX/dz, a vector field transporting sections along the side edges"""
        y3 = self._lift(y)
        return (self.top_offset[None, :] - (1.0 - self.top_scale) * y3) / self.height

    def flow_vector_at(self, points: np.ndarray) -> np.ndarray:
        return self.flow_vector(self.base_coordinates(points))

    def base_coordinates(self, points: np.ndarray) -> np.ndarray:
        """Inverse of the ruled map: base-plane point y (n, 3) with X(y, x_z) = x"""
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        frac = pts[:, 2] / self.height
        shrink = 1.0 - (1.0 - self.top_scale) * frac
        if np.any(shrink <= 0):
            raise InvalidDomain("Base coordinates are undefined at or above the apex")
        y = (pts - frac[:, None] * self.top_offset) / shrink[:, None]
        y[:, 2] = 0.0
        return y

    def section(self, z: float) -> np.ndarray:
        """Horizontal section polygon at height z, vertices (k, 3) in base order"""
        return self.ruled_point(self.base, np.full(self.k, float(z)))

    def _lift(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        y = y.reshape(-1, y.shape[-1])
        if y.shape[1] == 2:
            y = np.column_stack([y, np.zeros(len(y))])
        return y

    # -----------------------------------
    # Containment
    # -----------------------------------

    def contains(self, points: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        """Points inside the closed polyhedron (within tol)"""
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        inside = (pts[:, 2] >= -tol) & (pts[:, 2] <= self.height + tol)
        for face in self.faces:
            inside &= face.plane_distance(pts) <= tol
        return inside

    def distance_to_faces(self, points: np.ndarray) -> np.ndarray:
        """(n, k) inward distances to the side face planes"""
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        return np.column_stack([-face.plane_distance(pts) for face in self.faces])

    def sample_interior(self, count: int, seed: int = 0, margin: float = 0.0) -> np.ndarray:
        """Uniform random interior points, at least margin away from every face"""
        rng = np.random.default_rng(seed)
        lo, hi = self.vertices.min(axis=0), self.vertices.max(axis=0)
        out: List[np.ndarray] = []
        need = count
        while need > 0:
            batch = lo + rng.random((4 * count + 16, 3)) * (hi - lo)
            keep = self.contains(batch, tol=-margin)
            if self.kind == "cone":
                keep &= np.linalg.norm(batch - self.apex, axis=1) >= margin
            out.append(batch[keep][:need])
            need -= len(out[-1])
        return np.vstack(out)[:count]

    # -----------------------------------
    # Model angles
    # -----------------------------------

    def model_angles(self) -> ModelAngles:
        """
        Exact Euclidean dihedral and base angles from face normals

        Raises:
            BadAngle: a dihedral angle is 0 or pi (a flattened face)
        """
        normals = np.array([face.normal for face in self.faces])
        gamma = np.arccos(np.clip(normals[:, 2], -1.0, 1.0))
        nxt = np.roll(normals, -1, axis=0)
        theta = np.arccos(np.clip(-np.sum(normals * nxt, axis=1), -1.0, 1.0))
        alpha = np.empty(self.k)
        for j in range(self.k):
            corner = self.base[(j + 1) % self.k]
            u = self.base[j] - corner
            v = self.base[(j + 2) % self.k] - corner
            alpha[j] = np.arctan2(np.linalg.norm(np.cross(u, v)), u @ v)
        angles = ModelAngles(gamma=gamma, theta=theta, alpha=alpha)
        angles.validate()
        return angles

    def contact_angles(self, policy: Union[str, Sequence[float], None] = "model") -> np.ndarray:
        """
        Resolve a gamma policy into per-face contact angles

        Args:
            policy: "model", a single angle, or one angle per side face

        Raises:
            BadAngle: angle outside (0, pi) or wrong count
        """
        if policy is None or (isinstance(policy, str) and policy == "model"):
            return self.model_angles().gamma
        if isinstance(policy, str):
            raise BadAngle(f"Unsupported gamma policy: {policy}. Supported: model or explicit angles")
        gamma = np.atleast_1d(np.asarray(policy, dtype=float))
        if gamma.size == 1:
            gamma = np.full(self.k, float(gamma[0]))
        if gamma.size != self.k:
            raise BadAngle(f"Expected {self.k} contact angles, got {gamma.size}")
        if np.any((gamma <= 0) | (gamma >= np.pi)):
            raise BadAngle(f"Contact angles must lie in (0, pi): {gamma.tolist()}")
        return gamma

    def scaled(self, factor: float) -> "PolyhedralDomain":
        """Copy scaled by factor about the origin"""
        if self.kind == "cone":
            return PolyhedralDomain.cone(factor * self.base[:, :2], factor * self.top_offset)
        return PolyhedralDomain.prism(factor * self.base[:, :2], self.top_scale, factor * self.top_offset)
