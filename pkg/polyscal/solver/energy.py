"""
Capillary energy of a separating surface

    F = Area_g(Sigma) - sum_j cos(gamma_j) * Area_g(wetted part of F_j)

The wetted part is taken on the E side of the contact curve (apex / top face
side) by default, or on the base side with wetted_side="bottom".
"""
from dataclasses import dataclass, field as dataclass_field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from ..errors import NotAdmissible
from ..fields.base import MetricField
from ..geometry.domain import PolyhedralDomain
from ..mesh.measure import area_gradient, riemannian_area, triangle_geometry, wetted_area_gradient, wetted_areas
from ..mesh.surface import ON_EDGE, ON_FACE, TriSurface

GammaPolicy = Union[str, float, Sequence[float], None]


@dataclass
class EnergyReport:
    """Energy terms and first-variation certificates of a surface"""
    energy: float
    area: float
    wetted: np.ndarray
    gamma: np.ndarray
    wetted_side: str = "top"
    mean_curvature_residual: float = float("nan")
    angle_residual: np.ndarray = dataclass_field(default_factory=lambda: np.zeros(0))
    clearance_base: float = float("nan")
    clearance_top: float = float("nan")
    clearance_ok: bool = True
    iterations: int = 0
    converged: bool = False
    gradient_norm: float = float("nan")

    @property
    def recomputed_energy(self) -> float:
        return self.area - float(np.sum(np.cos(self.gamma) * self.wetted))

    def to_dict(self) -> Dict:
        return {
            "energy": self.energy,
            "area": self.area,
            "wetted": self.wetted.tolist(),
            "gamma": self.gamma.tolist(),
            "wetted_side": self.wetted_side,
            "mean_curvature_residual": self.mean_curvature_residual,
            "angle_residual": self.angle_residual.tolist(),
            "clearance_base": self.clearance_base,
            "clearance_top": self.clearance_top,
            "clearance_ok": self.clearance_ok,
            "iterations": self.iterations,
            "converged": self.converged,
            "gradient_norm": self.gradient_norm,
        }


# -----------------------------------
# Admissibility
# -----------------------------------

def _ray_hits(origin: np.ndarray, direction: np.ndarray, triangles: np.ndarray, eps: float = 1e-14) -> int:
    """Number of triangles (m, 3, 3) crossed by the segment origin + t direction, 0 < t < 1 (Moller-Trumbore)"""
    v0, v1, v2 = triangles[:, 0], triangles[:, 1], triangles[:, 2]
    e1, e2 = v1 - v0, v2 - v0
    p = np.cross(direction, e2)
    det = np.einsum("ij,ij->i", e1, p)
    ok = np.abs(det) > eps
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    s = origin - v0
    u = np.einsum("ij,ij->i", s, p) * inv
    q = np.cross(s, e1)
    v = (q @ direction) * inv
    t = np.einsum("ij,ij->i", e2, q) * inv
    hit = ok & (u >= 0) & (v >= 0) & (u + v <= 1) & (t > 0) & (t < 1)
    return int(np.count_nonzero(hit))


def is_admissible(domain: PolyhedralDomain, surface: TriSurface) -> bool:
    """
    The surface lies in the domain and separates the apex (or top face) from the base

    A segment from the upper point to a point of the base is crossed an odd
    number of times.
    """
    tol = 1e-9 * domain.scale
    if not np.all(domain.contains(surface.vertices, tol=tol)):
        return False
    upper = domain.upper_point()
    if domain.is_cone:
        # start just below the apex, on the axis towards the base centroid
        axis = domain.base.mean(axis=0) - upper
        upper = upper + 1e-9 * axis
    # irrational offset keeps the segment off mesh edges of structured grids
    target = domain.base.mean(axis=0) + domain.scale * np.array([np.sqrt(2) - 1.4, np.pi - 3.14, 0.0]) * 1e-2
    hits = _ray_hits(upper, target - upper, surface.vertices[surface.triangles])
    return hits % 2 == 1


def check_admissible(domain: PolyhedralDomain, surface: TriSurface) -> None:
    """Raises NotAdmissible unless the surface separates the domain"""
    if not is_admissible(domain, surface):
        raise NotAdmissible("Surface does not separate the apex or top face from the base",
                            {"vertices": surface.n_vertices})


# -----------------------------------
# Energy and gradient
# -----------------------------------

def energy(domain: PolyhedralDomain, surface: TriSurface, field: MetricField,
           gamma: GammaPolicy = "model", wetted_side: str = "top", check: bool = True) -> float:
    """
    Capillary energy of an admissible surface

    Args:
        gamma: "model", a single angle, or one angle per side face
        wetted_side: "top" (E side) or "bottom" (base side; pass pi - gamma for the complement)
        check: verify admissibility first

    Raises:
        NotAdmissible: the surface does not separate the domain
    """
    if check:
        check_admissible(domain, surface)
    gam = domain.contact_angles(gamma)
    area = riemannian_area(surface, field)
    wet = wetted_areas(domain, surface, field, wetted_side)
    return float(area - np.sum(np.cos(gam) * wet))


def energy_terms(domain: PolyhedralDomain, surface: TriSurface, field: MetricField,
                 gamma: GammaPolicy = "model", wetted_side: str = "top") -> EnergyReport:
    """Energy with its area and wetted terms, no certificates"""
    gam = domain.contact_angles(gamma)
    area = riemannian_area(surface, field)
    wet = wetted_areas(domain, surface, field, wetted_side)
    return EnergyReport(energy=float(area - np.sum(np.cos(gam) * wet)), area=area, wetted=wet,
                        gamma=gam, wetted_side=wetted_side)


def energy_gradient(domain: PolyhedralDomain, surface: TriSurface, field: MetricField,
                    gamma: np.ndarray, wetted_side: str = "top") -> Tuple[float, np.ndarray]:
    """
    Energy and its exact gradient with respect to vertex positions

    Args:
        gamma: resolved per-face contact angles
    """
    geo = triangle_geometry(surface, field)
    value = float(np.sum(geo.areas))
    grad = area_gradient(surface, field, geo)
    for j in range(domain.k):
        w, dw = wetted_area_gradient(domain, surface, j, field, wetted_side)
        c = float(np.cos(gamma[j]))
        value -= c * w
        grad -= c * dw
    return value, grad


def project_gradient(domain: PolyhedralDomain, surface: TriSurface, grad: np.ndarray) -> np.ndarray:
    """Restrict a gradient to admissible motions: face vertices in their plane, corners along their edge"""
    out = grad.copy()
    for j, face in enumerate(domain.faces):
        on = (surface.tags == ON_FACE) & (surface.owners == j)
        out[on] -= np.outer(out[on] @ face.normal, face.normal)
    for j, edge in enumerate(domain.edges):
        on = (surface.tags == ON_EDGE) & (surface.owners == j)
        out[on] = np.outer(out[on] @ edge.direction, edge.direction)
    return out


def snap_to_constraints(domain: PolyhedralDomain, surface: TriSurface, vertices: np.ndarray) -> np.ndarray:
    """Remove rounding drift of constrained vertices off their face planes and edge lines"""
    out = vertices.copy()
    for j, face in enumerate(domain.faces):
        on = (surface.tags == ON_FACE) & (surface.owners == j)
        out[on] -= np.outer(face.plane_distance(out[on]), face.normal)
    for j, edge in enumerate(domain.edges):
        on = (surface.tags == ON_EDGE) & (surface.owners == j)
        along = (out[on] - edge.start) @ edge.direction
        out[on] = edge.start + np.outer(along, edge.direction)
    return out


def constraints_respected(domain: PolyhedralDomain, surface: TriSurface, vertices: np.ndarray) -> bool:
    """Face vertices inside their face polygon, corners strictly between base and top"""
    tol = 1e-12 * domain.scale
    for j, face in enumerate(domain.faces):
        on = (surface.tags == ON_FACE) & (surface.owners == j)
        if np.any(on) and not np.all(face.contains(vertices[on], tol=1e-9 * domain.scale)):
            return False
    for j, edge in enumerate(domain.edges):
        on = (surface.tags == ON_EDGE) & (surface.owners == j)
        along = (vertices[on] - edge.start) @ edge.direction
        if np.any(along <= tol) or np.any(along >= edge.length - tol):
            return False
    return bool(np.all(domain.contains(vertices, tol=1e-9 * domain.scale)))


# -----------------------------------
# Obstacles
# -----------------------------------

@dataclass(frozen=True)
class Clearances:
    """Distances from the surface to the base and to the apex or top face"""
    base: float
    top: float

    @property
    def minimum(self) -> float:
        return min(self.base, self.top)

    def to_dict(self):
        return {"base": self.base, "top": self.top}


def obstacle_check(domain: PolyhedralDomain, surface: TriSurface) -> Clearances:
    """
    Clearances of the closed surface from B and from the apex (cone) or B2 (prism)

    The surface is piecewise linear, so plane distances are attained at
    vertices; the apex distance is measured at vertices as well.
    """
    z = surface.vertices[:, 2]
    base = float(z.min())
    if domain.is_cone:
        top = float(np.min(np.linalg.norm(surface.vertices - domain.apex, axis=1)))
    else:
        top = float(domain.height - z.max())
    clearances = Clearances(base=base, top=top)
    logger.debug(f"Obstacle clearances: base={base:.4g}, top={top:.4g}")
    return clearances


# -----------------------------------
# Sign of the infimum
# -----------------------------------

@dataclass(frozen=True)
class InfimumProbe:
    """Smallest energy over a family of admissible surfaces and its sign"""
    energies: List[float]
    band: float

    @property
    def minimum(self) -> float:
        return float(min(self.energies))

    @property
    def verdict(self) -> str:
        m = self.minimum
        if m < -self.band:
            return "negative"
        if m > self.band:
            return "positive"
        return "zero"

    def to_dict(self):
        return {"energies": self.energies, "minimum": self.minimum, "band": self.band,
                "verdict": self.verdict}


def infimum_probe(domain: PolyhedralDomain, field: MetricField, inits: Sequence[TriSurface],
                  gamma: GammaPolicy = "model", minimize_runs: bool = False, band: float = 5e-3,
                  wetted_side: str = "top", options=None) -> InfimumProbe:
    """
    Estimate the sign of the infimum of F over admissible surfaces

    Every initial surface contributes its energy; with minimize_runs each is
    also minimized and the minimizer's energy is added.
    """
    if not inits:
        raise ValueError("Infimum probe needs at least one admissible surface")
    energies = []
    for surface in inits:
        energies.append(energy(domain, surface, field, gamma, wetted_side))
        if minimize_runs:
            from .minimize import minimize
            _, report = minimize(domain, field, surface, gamma, options)
            energies.append(report.energy)
    probe = InfimumProbe(energies=energies, band=band)
    logger.info(f"Infimum probe over {len(energies)} surfaces: min F={probe.minimum:.6g} ({probe.verdict})")
    return probe
