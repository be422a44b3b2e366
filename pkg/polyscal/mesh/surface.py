"""
Triangulated separating surface with sliding boundary constraints

Every vertex carries a constraint tag: interior (free in 3-space), on side
face F_j (slides in the face plane) or on edge L_j (slides along the edge).
Triangles are oriented so that their normals point into E, towards the apex
or the top face. The boundary loop then visits F_0, L_0, F_1, ..., L_{k-1}.
"""
from dataclasses import dataclass, field as dataclass_field
from functools import cached_property
from typing import List, Optional

import numpy as np
from scipy import sparse

from ..errors import DegenerateTriangle, InvalidDomain, OpenContactCurve

INTERIOR = 0
ON_FACE = 1
ON_EDGE = 2


@dataclass(eq=False)
class TriSurface:
    """
    Triangle mesh in P-coordinates

    Attributes:
        vertices: (n, 3) positions
        triangles: (m, 3) vertex indices, oriented towards E
        tags: (n,) INTERIOR, ON_FACE or ON_EDGE
        owners: (n,) face index for ON_FACE, edge index for ON_EDGE, -1 otherwise
    """
    vertices: np.ndarray
    triangles: np.ndarray
    tags: np.ndarray
    owners: np.ndarray
    k: int = 0
    metadata: dict = dataclass_field(default_factory=dict)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        self.tags = np.asarray(self.tags, dtype=np.int64)
        self.owners = np.asarray(self.owners, dtype=np.int64)
        if len(self.tags) != len(self.vertices) or len(self.owners) != len(self.vertices):
            raise InvalidDomain("Constraint tags must have one entry per vertex")
        if self.triangles.size and self.triangles.max() >= len(self.vertices):
            raise InvalidDomain("Triangle index exceeds number of vertices")
        if self.k == 0:
            self.k = int(self.owners[self.tags == ON_EDGE].max() + 1) if np.any(self.tags == ON_EDGE) else 0

    # -----------------------------------
    # Copies
    # -----------------------------------

    def with_vertices(self, vertices: np.ndarray) -> "TriSurface":
        """Same topology and tags, new positions"""
        return TriSurface(np.array(vertices, dtype=float), self.triangles, self.tags, self.owners,
                          self.k, dict(self.metadata))

    def copy(self) -> "TriSurface":
        return self.with_vertices(self.vertices.copy())

    # -----------------------------------
    # Topology
    # -----------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def adjacency(self) -> sparse.csr_matrix:
        """Symmetric edge graph; entries count the triangles sharing each edge"""
        t0, t1, t2 = self.triangles.T
        i = np.column_stack((t0, t1, t1, t2, t2, t0)).reshape(-1)
        j = np.column_stack((t1, t0, t2, t1, t0, t2)).reshape(-1)
        n = self.n_vertices
        return sparse.csr_matrix((np.ones(i.shape), (i, j)), shape=(n, n))

    @cached_property
    def directed(self) -> sparse.csr_matrix:
        t0, t1, t2 = self.triangles.T
        i = np.column_stack((t0, t1, t2)).reshape(-1)
        j = np.column_stack((t1, t2, t0)).reshape(-1)
        n = self.n_vertices
        return sparse.csr_matrix((np.ones(i.shape), (i, j)), shape=(n, n))

    @cached_property
    def edges(self) -> np.ndarray:
        """(e, 2) unique undirected edges"""
        upper = sparse.triu(self.adjacency, 1).tocoo()
        return np.column_stack([upper.row, upper.col])

    def euler_characteristic(self) -> int:
        used = len(np.unique(self.triangles))
        return int(used - len(self.edges) + self.n_triangles)

    def is_manifold(self) -> bool:
        return bool(self.adjacency.data.max() <= 2)

    def is_oriented(self) -> bool:
        return bool(self.directed.data.max() == 1)

    @cached_property
    def boundary_loop(self) -> np.ndarray:
        """Ordered boundary vertices, following the triangle orientation"""
        boundary = self.directed.multiply(self.adjacency == 1).tocoo()
        if boundary.nnz == 0:
            return np.zeros(0, dtype=np.int64)
        successor = dict(zip(boundary.row.tolist(), boundary.col.tolist()))
        if len(successor) != boundary.nnz:
            raise InvalidDomain("Boundary is not a simple loop")
        start = int(boundary.row.min())
        loop = [start]
        nxt = successor[start]
        while nxt != start:
            loop.append(nxt)
            nxt = successor[nxt]
            if len(loop) > boundary.nnz:
                raise InvalidDomain("Boundary loop does not close")
        if len(loop) != boundary.nnz:
            raise InvalidDomain("Surface has more than one boundary loop")
        return np.array(loop, dtype=np.int64)

    @cached_property
    def interior_mask(self) -> np.ndarray:
        return self.tags == INTERIOR

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        return self.tags != INTERIOR

    @cached_property
    def corners(self) -> np.ndarray:
        """Vertex index of the corner on each edge L_j"""
        corners = np.full(self.k, -1, dtype=np.int64)
        for v in np.flatnonzero(self.tags == ON_EDGE):
            j = self.owners[v]
            if corners[j] != -1:
                raise InvalidDomain(f"Edge {j} carries more than one corner vertex")
            corners[j] = v
        return corners

    def faces_of(self, vertex: int) -> List[int]:
        """Side faces a constrained vertex lies on"""
        tag, owner = self.tags[vertex], int(self.owners[vertex])
        if tag == ON_FACE:
            return [owner]
        if tag == ON_EDGE:
            return [owner, (owner + 1) % self.k]
        return []

    def contact_curve(self, face: int) -> np.ndarray:
        """
        Boundary vertices on face j from the corner on L_{j-1} to the corner on L_j

        Raises:
            OpenContactCurve: the curve does not run between both corners of the face
        """
        loop = self.boundary_loop
        if len(loop) == 0:
            raise OpenContactCurve("Surface has no boundary", {"face": face})
        start, end = self.corners[(face - 1) % self.k], self.corners[face]
        if start < 0 or end < 0:
            raise OpenContactCurve(f"Face {face} is missing a corner vertex", {"face": face})
        pos = int(np.flatnonzero(loop == start)[0])
        curve = [int(start)]
        for step in range(1, len(loop) + 1):
            v = int(loop[(pos + step) % len(loop)])
            curve.append(v)
            if v == end:
                break
            if self.tags[v] != ON_FACE or self.owners[v] != face:
                raise OpenContactCurve(f"Contact curve on face {face} leaves the face", {"face": face})
        else:
            raise OpenContactCurve(f"Contact curve on face {face} does not close", {"face": face})
        return np.array(curve, dtype=np.int64)

    def boundary_segments(self) -> List[tuple]:
        """(a, b, face) for each boundary edge in loop order"""
        loop = self.boundary_loop
        segments = []
        for a, b in zip(loop, np.roll(loop, -1)):
            common = set(self.faces_of(int(a))) & set(self.faces_of(int(b)))
            if len(common) != 1:
                raise OpenContactCurve(f"Boundary edge ({a}, {b}) does not lie on a single face")
            segments.append((int(a), int(b), common.pop()))
        return segments

    def rings(self, depth: int) -> sparse.csr_matrix:
        """Boolean matrix whose row i marks the vertices within `depth` edges of i"""
        step = (self.adjacency > 0).astype(np.int64) + sparse.identity(self.n_vertices, dtype=np.int64, format="csr")
        reach = step
        for _ in range(depth - 1):
            reach = (reach @ step > 0).astype(np.int64)
        return reach.tocsr()

    def vertex_triangles(self) -> sparse.csr_matrix:
        """Incidence matrix (n_vertices, n_triangles)"""
        m = self.n_triangles
        rows = self.triangles.reshape(-1)
        cols = np.repeat(np.arange(m), 3)
        return sparse.csr_matrix((np.ones(3 * m), (rows, cols)), shape=(self.n_vertices, m))

    def distance2_coloring(self) -> np.ndarray:
        """Greedy coloring in which vertices sharing a neighbor get different colors"""
        two = self.rings(2)
        colors = np.full(self.n_vertices, -1, dtype=np.int64)
        for v in range(self.n_vertices):
            row = two.indices[two.indptr[v]:two.indptr[v + 1]]
            taken = set(colors[row][colors[row] >= 0].tolist())
            c = 0
            while c in taken:
                c += 1
            colors[v] = c
        return colors

    # -----------------------------------
    # Euclidean geometry
    # -----------------------------------

    def edge_vectors(self) -> np.ndarray:
        """(m, 3, 2) columns v1 - v0 and v2 - v0 per triangle"""
        v = self.vertices[self.triangles]
        return np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=2)

    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def euclidean_normals(self) -> np.ndarray:
        """Unnormalized triangle normals (twice the area)"""
        e = self.edge_vectors()
        return np.cross(e[:, :, 0], e[:, :, 1])

    def vertex_normals(self) -> np.ndarray:
        """Area-weighted Euclidean vertex normals, unit length"""
        tn = self.euclidean_normals()
        vn = np.zeros_like(self.vertices)
        for c in range(3):
            np.add.at(vn, self.triangles[:, c], tn)
        return vn / np.linalg.norm(vn, axis=1)[:, None]

    def mean_edge_length(self) -> float:
        e = self.edges
        return float(np.mean(np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)))

    def check_triangles(self, tolerance: float) -> None:
        """Raise DegenerateTriangle when a triangle's Euclidean area is below tolerance"""
        areas = 0.5 * np.linalg.norm(self.euclidean_normals(), axis=1)
        bad = np.flatnonzero(areas <= tolerance)
        if len(bad):
            raise DegenerateTriangle(f"Triangle {int(bad[0])} has near-zero area {areas[bad[0]]:.3g}",
                                     {"triangle": int(bad[0])})

    # -----------------------------------
    # Constraints
    # -----------------------------------

    def constraint_violation(self, domain) -> float:
        """Largest distance of a constrained vertex from its face plane or edge line"""
        worst = 0.0
        for j, face in enumerate(domain.faces):
            on = (self.tags == ON_FACE) & (self.owners == j)
            if np.any(on):
                worst = max(worst, float(np.abs(face.plane_distance(self.vertices[on])).max()))
        for j, edge in enumerate(domain.edges):
            on = (self.tags == ON_EDGE) & (self.owners == j)
            if np.any(on):
                worst = max(worst, float(edge.distance(self.vertices[on]).max()))
        return worst

    def validate(self, domain, tol: Optional[float] = None) -> None:
        """
        Check manifoldness, orientation, tags and the boundary visiting order

        Raises:
            InvalidDomain: topology or constraint violation
            OpenContactCurve: boundary loop does not pass every face between its corners
        """
        tol = 1e-12 * domain.scale if tol is None else tol
        if not self.is_manifold():
            raise InvalidDomain("Surface is not a manifold")
        if not self.is_oriented():
            raise InvalidDomain("Surface triangles are not consistently oriented")
        if self.k != domain.k or np.any(self.corners < 0):
            raise InvalidDomain("Surface needs exactly one corner vertex per side edge")
        violation = self.constraint_violation(domain)
        if violation > tol:
            raise InvalidDomain(f"Constrained vertex is {violation:.3g} off its face or edge")
        for j in range(self.k):
            self.contact_curve(j)
