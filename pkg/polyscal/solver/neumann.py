"""
Neumann problem on a cornered polygon mesh

    Laplace u = f in Sigma,  du/dnu = g on the boundary,  integral u = 0
"""
from typing import Optional

import numpy as np
from loguru import logger
from scipy.sparse.linalg import cg

from ..config import settings
from ..errors import Incompatible, NoConvergence
from ..fields.base import Box, MetricField
from ..fields.catalog import FlatMetric
from ..mesh.measure import triangle_geometry, vertex_areas
from ..mesh.surface import TriSurface
from .stability import boundary_weights, stiffness_matrix


def neumann_solve(surface: TriSurface, f: np.ndarray, g: Optional[np.ndarray] = None,
                  field: Optional[MetricField] = None, tol: Optional[float] = None) -> np.ndarray:
    """
    Solve the weak Neumann problem K u = -M f + B g with linear elements

    f and g are nodal values; g is read at boundary vertices only. The
    right-hand side is made compatible by subtracting a constant from f;
    the solution is shifted to zero mass-weighted mean.

    Raises:
        Incompatible: the removed constant exceeds 1e-6 of the data norm
        NoConvergence: conjugate gradients did not converge
    """
    field = FlatMetric(Box.around(surface.vertices)) if field is None else field
    tol = settings.neumann_tol if tol is None else tol
    n = surface.n_vertices
    f = np.asarray(f, dtype=float).reshape(n)
    g = np.zeros(n) if g is None else np.asarray(g, dtype=float).reshape(n)

    geo = triangle_geometry(surface, field)
    stiffness = stiffness_matrix(surface, field, geo)
    mass = vertex_areas(surface, field, geo)
    weights, _ = boundary_weights(surface, field.components(surface.vertices))

    rhs = -mass * f + weights * g
    excess = float(np.sum(rhs))
    data_norm = float(np.sum(np.abs(mass * f)) + np.sum(np.abs(weights * g)))
    if data_norm > 0 and abs(excess) > 1e-6 * data_norm:
        raise Incompatible(f"Neumann data violate compatibility: integral f - integral g = {-excess:.6g}",
                           {"excess": -excess, "data_norm": data_norm})
    rhs -= excess * mass / float(np.sum(mass))
    if not np.any(rhs):
        return np.zeros(n)

    u, info = cg(stiffness, rhs, rtol=tol, atol=0.0, maxiter=10 * n)
    if info != 0:
        raise NoConvergence(f"Conjugate gradients stopped with info={info}", {"size": n})
    u -= float(np.sum(mass * u)) / float(np.sum(mass))
    logger.debug(f"Neumann solve on {n} vertices: |u|_inf={np.max(np.abs(u)):.4g}, "
                 f"compatibility correction {excess:.3g}")
    return u
