"""
Triangulated separating surfaces and their discrete geometry
"""
from .builders import divisions_for, graph_mesh, polygon_mesh, refine, slice_mesh, tilted_slice_mesh
from .io import load_surface, save_surface
from .measure import (
    ChartIntegrator,
    area_gradient,
    face_area,
    riemannian_area,
    triangle_geometry,
    vertex_areas,
    wetted_area,
    wetted_area_gradient,
    wetted_areas,
)
from .report import (
    BoundaryTerms,
    CornerProbe,
    GeometryReport,
    boundary_identity_residual,
    boundary_terms,
    corner_regularity_probe,
    gauss_bonnet_residual,
    gauss_equation_residual,
    geometry_report,
)
from .surface import INTERIOR, ON_EDGE, ON_FACE, TriSurface

__all__ = [
    "divisions_for",
    "graph_mesh",
    "polygon_mesh",
    "refine",
    "slice_mesh",
    "tilted_slice_mesh",
    "load_surface",
    "save_surface",
    "ChartIntegrator",
    "area_gradient",
    "face_area",
    "riemannian_area",
    "triangle_geometry",
    "vertex_areas",
    "wetted_area",
    "wetted_area_gradient",
    "wetted_areas",
    "BoundaryTerms",
    "CornerProbe",
    "GeometryReport",
    "boundary_identity_residual",
    "boundary_terms",
    "corner_regularity_probe",
    "gauss_bonnet_residual",
    "gauss_equation_residual",
    "geometry_report",
    "INTERIOR",
    "ON_EDGE",
    "ON_FACE",
    "TriSurface",
]
