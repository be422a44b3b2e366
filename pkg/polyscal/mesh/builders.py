"""
Structured surface meshes for slices of a polyhedral domain

Section polygons are passed as Q_0..Q_{k-1} with Q_i on the side edge
L_{i-1} (indices mod k), so that the section side Q_i -> Q_{i+1} lies on F_i.
"""
from typing import Callable, Optional

import numpy as np
from loguru import logger
from scipy import sparse

from ..errors import InvalidDomain
from ..geometry.domain import PolyhedralDomain
from ..geometry.wedge import Plane, slice_section
from .surface import INTERIOR, ON_EDGE, ON_FACE, TriSurface

HeightFunction = Callable[[np.ndarray], np.ndarray]


def divisions_for(domain: PolyhedralDomain, h: float) -> int:
    """Number of subdivisions per section side for a target mesh size h"""
    if h <= 0:
        raise ValueError(f"Mesh size must be positive, got {h}")
    return max(1, int(np.ceil(domain.scale / h - 1e-9)))


def _orient(vertices: np.ndarray, triangles: np.ndarray, up: np.ndarray) -> np.ndarray:
    v = vertices[triangles]
    normals = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    flip = normals @ up < 0
    out = triangles.copy()
    out[flip] = out[flip][:, [0, 2, 1]]
    return out


def _quad_grid(section: np.ndarray, n: int):
    q0, q1, q2, q3 = section
    u, v = np.meshgrid(np.linspace(0.0, 1.0, n + 1), np.linspace(0.0, 1.0, n + 1))
    u, v = u.reshape(-1), v.reshape(-1)
    vertices = (((1 - u) * (1 - v))[:, None] * q0 + (u * (1 - v))[:, None] * q1
                + (u * v)[:, None] * q2 + ((1 - u) * v)[:, None] * q3)

    tags = np.full(len(u), INTERIOR, dtype=np.int64)
    owners = np.full(len(u), -1, dtype=np.int64)
    i, j = np.rint(u * n).astype(int), np.rint(v * n).astype(int)
    for face, on in enumerate((j == 0, i == n, j == n, i == 0)):
        tags[on], owners[on] = ON_FACE, face
    # Q_c sits on L_{c-1}
    for c, (ci, cj) in enumerate(((0, 0), (n, 0), (n, n), (0, n))):
        idx = cj * (n + 1) + ci
        tags[idx], owners[idx] = ON_EDGE, (c - 1) % 4

    cells = np.array([(jj * (n + 1) + ii) for jj in range(n) for ii in range(n)], dtype=np.int64)
    a, b, c, d = cells, cells + 1, cells + n + 2, cells + n + 1
    triangles = np.vstack([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    return vertices, triangles, tags, owners


def _ring_grid(section: np.ndarray, n: int):
    k = len(section)
    center = section.mean(axis=0)

    def offset(r: int) -> int:
        return 0 if r == 0 else 1 + k * (r - 1) * r // 2

    def index(r: int, m: int) -> int:
        return 0 if r == 0 else offset(r) + m % (k * r)

    vertices = [center]
    for r in range(1, n + 1):
        for s in range(k):
            a, b = section[s] - center, section[(s + 1) % k] - center
            for t in range(r):
                vertices.append(center + (r / n) * ((1 - t / r) * a + (t / r) * b))
    vertices = np.array(vertices)

    triangles = []
    for r in range(1, n + 1):
        for s in range(k):
            for t in range(r):
                triangles.append((index(r, s * r + t), index(r, s * r + t + 1), index(r - 1, s * (r - 1) + t)))
            for t in range(r - 1):
                triangles.append((index(r - 1, s * (r - 1) + t), index(r, s * r + t + 1),
                                  index(r - 1, s * (r - 1) + t + 1)))

    tags = np.full(len(vertices), INTERIOR, dtype=np.int64)
    owners = np.full(len(vertices), -1, dtype=np.int64)
    for s in range(k):
        for t in range(n):
            idx = index(n, s * n + t)
            if t == 0:
                tags[idx], owners[idx] = ON_EDGE, (s - 1) % k
            else:
                tags[idx], owners[idx] = ON_FACE, s
    return vertices, np.array(triangles, dtype=np.int64), tags, owners


def polygon_mesh(section: np.ndarray, n: int, up: np.ndarray) -> TriSurface:
    """
    Planar triangulation of a section polygon

    Quadrilaterals get a bilinear n x n grid, other polygons n concentric
    rings around the centroid. Triangles are oriented so their normals have
    a positive component along `up`.
    """
    section = np.asarray(section, dtype=float)
    if n < 1:
        raise ValueError(f"Mesh needs at least one division, got {n}")
    k = len(section)
    if k < 3:
        raise InvalidDomain(f"Section polygon needs at least 3 vertices, got {k}")
    builder = _quad_grid if k == 4 else _ring_grid
    vertices, triangles, tags, owners = builder(section, n)
    triangles = _orient(vertices, triangles, np.asarray(up, dtype=float))
    return TriSurface(vertices, triangles, tags, owners, k=k)


def slice_mesh(domain: PolyhedralDomain, height: float, n: int) -> TriSurface:
    """Planar horizontal slice at the given height, snapped onto faces and edges"""
    if not 0.0 < height < domain.height:
        raise InvalidDomain(f"Slice height {height} outside (0, {domain.height})")
    surface = polygon_mesh(domain.section(height), n, np.array([0.0, 0.0, 1.0]))
    surface.metadata.update({"builder": "slice", "height": float(height), "divisions": n})
    logger.debug(f"Built slice mesh at z={height}: {surface.n_vertices} vertices, "
                 f"{surface.n_triangles} triangles")
    return surface


def tilted_slice_mesh(domain: PolyhedralDomain, plane: Plane, n: int) -> TriSurface:
    """
    Planar slice along an arbitrary plane crossing every side edge

    Raises:
        EmptySlice: the plane does not cross every side edge
    """
    points = slice_section(domain, plane)  # point i lies on L_i
    surface = polygon_mesh(np.roll(points, 1, axis=0), n, plane.normal)
    surface.metadata.update({"builder": "tilted_slice", "normal": plane.normal.tolist(),
                             "offset": plane.offset, "divisions": n})
    return surface


def graph_mesh(domain: PolyhedralDomain, height: float, n: int, w: HeightFunction,
               boundary: bool = True) -> TriSurface:
    """
    Slice displaced along the rulings: x -> X(y(x), z + w(x))

    The ruled map keeps face and edge vertices on their faces and edges, so
    the displacement may also move the boundary (set boundary=False to pin it).
    """
    surface = slice_mesh(domain, height, n)
    pts = surface.vertices
    dz = np.asarray(w(pts), dtype=float).reshape(-1)
    if not boundary:
        dz = np.where(surface.interior_mask, dz, 0.0)
    moved = domain.ruled_point(domain.base_coordinates(pts), pts[:, 2] + dz)
    out = surface.with_vertices(moved)
    out.metadata["builder"] = "graph"
    return out


def refine(surface: TriSurface, levels: int = 1) -> TriSurface:
    """
    Uniform midpoint refinement, each triangle split in four

    Boundary midpoints inherit the face shared by their endpoints; all other
    midpoints are interior.
    """
    out = surface
    for _ in range(levels):
        out = _refine_once(out)
    return out


def _refine_once(surface: TriSurface) -> TriSurface:
    n = surface.n_vertices
    edges = surface.edges
    ne = len(edges)
    numbering = sparse.csr_matrix((np.arange(1, ne + 1), (edges[:, 0], edges[:, 1])), shape=(n, n))
    numbering = numbering + numbering.T

    tri = surface.triangles
    def mid(a, b):
        return np.asarray(numbering[a, b]).reshape(-1) - 1 + n

    e01, e12, e20 = mid(tri[:, 0], tri[:, 1]), mid(tri[:, 1], tri[:, 2]), mid(tri[:, 2], tri[:, 0])
    triangles = np.vstack([
        np.column_stack([tri[:, 0], e01, e20]),
        np.column_stack([e01, tri[:, 1], e12]),
        np.column_stack([e20, e12, tri[:, 2]]),
        np.column_stack([e01, e12, e20]),
    ])

    vertices = np.vstack([surface.vertices, 0.5 * (surface.vertices[edges[:, 0]] + surface.vertices[edges[:, 1]])])
    tags = np.concatenate([surface.tags, np.full(ne, INTERIOR, dtype=np.int64)])
    owners = np.concatenate([surface.owners, np.full(ne, -1, dtype=np.int64)])
    counts = np.asarray(surface.adjacency[edges[:, 0], edges[:, 1]]).reshape(-1)
    for e in np.flatnonzero(counts == 1):
        a, b = edges[e]
        common = set(surface.faces_of(int(a))) & set(surface.faces_of(int(b)))
        if len(common) != 1:
            raise InvalidDomain(f"Boundary edge ({a}, {b}) does not lie on a single face")
        tags[n + e], owners[n + e] = ON_FACE, common.pop()

    refined = TriSurface(vertices, triangles, tags, owners, k=surface.k, metadata=dict(surface.metadata))
    if "divisions" in refined.metadata:
        refined.metadata["divisions"] = 2 * refined.metadata["divisions"]
    return refined
