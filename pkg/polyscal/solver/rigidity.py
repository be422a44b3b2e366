"""
Infinitesimal rigidity certificates and the comparison inequality ledger
"""
from dataclasses import dataclass, field as dataclass_field
from typing import Dict, Optional

import numpy as np
from loguru import logger

from ..errors import HypothesisFailed
from ..fields.base import MetricField
from ..fields.curvature import verify_scalar_sign
from ..geometry.domain import PolyhedralDomain
from ..geometry.measure import check_hypotheses, check_mean_convexity, face_mean_curvature_batch
from ..mesh.builders import divisions_for, slice_mesh
from ..mesh.report import GeometryReport, gauss_bonnet_residual, geometry_report
from ..mesh.surface import TriSurface
from .energy import EnergyReport, GammaPolicy
from .minimize import MinimizeOptions, minimize
from .stability import assemble, min_eigenvalue, quadratic_form


@dataclass(frozen=True)
class RigidityCertificate:
    """Max-residuals of the equalities that hold on an infinitesimally rigid surface"""
    scalar: float  # R on the surface
    second_form: float  # |A|
    face_mean_curvature: float  # H̄ along the boundary
    corner_angles: float  # alpha_j - alpha'_j
    ricci_normal: float  # Ric(N, N)
    gauss_curvature: float  # K, angle-defect density at interior vertices
    geodesic_curvature: float  # k_g
    tolerance: float = 1e-8

    @property
    def residuals(self) -> Dict[str, float]:
        return {
            "scalar": self.scalar,
            "second_form": self.second_form,
            "face_mean_curvature": self.face_mean_curvature,
            "corner_angles": self.corner_angles,
            "ricci_normal": self.ricci_normal,
            "gauss_curvature": self.gauss_curvature,
            "geodesic_curvature": self.geodesic_curvature,
        }

    @property
    def rigid(self) -> bool:
        return all(v < self.tolerance for v in self.residuals.values())

    def failing(self):
        return [k for k, v in self.residuals.items() if v >= self.tolerance]

    def to_dict(self):
        return {**self.residuals, "tolerance": self.tolerance, "rigid": self.rigid}


def _max_abs(values: np.ndarray) -> float:
    return float(np.max(np.abs(values))) if len(values) else 0.0


def rigidity_certificate(domain: PolyhedralDomain, surface: TriSurface, field: MetricField,
                         report: Optional[GeometryReport] = None, tolerance: float = 1e-8) -> RigidityCertificate:
    """Measure how far a surface is from the infinitesimally rigid equalities"""
    report = geometry_report(domain, surface, field) if report is None else report
    model = domain.model_angles()

    h_bar = []
    for j, face in enumerate(domain.faces):
        curve = report.contact_vertices[j]
        h_bar.append(face_mean_curvature_batch(field, face, report.points[curve]))
    boundary = report.boundary
    cert = RigidityCertificate(
        scalar=_max_abs(report.scalar),
        second_form=float(np.sqrt(np.max(report.norm_a_squared))),
        face_mean_curvature=_max_abs(np.concatenate(h_bar)),
        corner_angles=_max_abs(report.corner_angles - model.alpha),
        ricci_normal=_max_abs(report.ricci_normal),
        gauss_curvature=_max_abs(report.gauss_defect[report.interior]),
        geodesic_curvature=_max_abs(report.geodesic_curvature[boundary]),
        tolerance=tolerance,
    )
    if cert.rigid:
        logger.info("Surface is infinitesimally rigid within tolerance")
    else:
        logger.info(f"Surface is not rigid: {', '.join(cert.failing())}")
    return cert


# -----------------------------------
# Comparison ledger
# -----------------------------------

@dataclass
class ComparisonLedger:
    """
    Numeric sides of the comparison chain at a minimizer

        0 <= Q(1, 1) = -L + (integral K + integral k_g),
        integral K + integral k_g = sum_j (alpha_j - alpha'_j) <= 0,
        L = integral (R + |A|^2) / 2 + sum_j integral H̄ / sin(gamma_j)
    """
    bulk: float  # integral (R + |A|^2) / 2
    boundary: float  # sum_j integral H̄ / sin(gamma_j)
    stability_form: float  # Q(1, 1)
    gauss_bonnet: float  # integral K + integral k_g
    corner_excess: float  # sum_j (alpha_j - alpha'_j)
    gauss_bonnet_residual: float
    lambda_min: float
    tolerance: float
    energy: EnergyReport
    hypotheses: Dict = dataclass_field(default_factory=dict)
    rigidity: Optional[RigidityCertificate] = None

    @property
    def total(self) -> float:
        """L"""
        return self.bulk + self.boundary

    @property
    def chain_residual(self) -> float:
        """|Q(1, 1) + L - (integral K + integral k_g)|, O(h) from the Gauss equation and boundary identity"""
        return abs(self.stability_form + self.total - self.gauss_bonnet)

    @property
    def verdict(self) -> str:
        return "consistent" if self.total >= -self.tolerance else "counterexample-flag"

    def to_dict(self):
        return {
            "L": self.total,
            "bulk": self.bulk,
            "boundary": self.boundary,
            "stability_form": self.stability_form,
            "gauss_bonnet": self.gauss_bonnet,
            "corner_excess": self.corner_excess,
            "gauss_bonnet_residual": self.gauss_bonnet_residual,
            "chain_residual": self.chain_residual,
            "lambda_min": self.lambda_min,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
            "energy": self.energy.to_dict(),
            "hypotheses": self.hypotheses,
            "rigidity": self.rigidity.to_dict() if self.rigidity else None,
        }


def check_comparison_hypotheses(domain: PolyhedralDomain, field: MetricField, gamma: GammaPolicy = "model",
                                samples: int = 64, seed: int = 0, tolerance: float = 1e-10) -> Dict:
    """
    Scalar curvature sign, face mean convexity and the edge angle window, in that order

    Raises:
        HypothesisFailed: naming the first hypothesis that does not hold
    """
    points = domain.sample_interior(samples, seed=seed, margin=1e-3 * domain.scale)
    scalar = verify_scalar_sign(field, points, tolerance=tolerance)
    if not scalar.passed:
        raise HypothesisFailed("scalar curvature", f"R < 0 at {scalar.argmin.tolist()} (min {scalar.min_scalar:.4g})",
                               scalar.to_dict())
    convexity = check_mean_convexity(domain, field, tolerance=tolerance)
    if not convexity.passed:
        raise HypothesisFailed("mean convexity", f"Side face mean curvature negative: "
                               f"{convexity.min_per_face.tolist()}", convexity.to_dict())
    angles = check_hypotheses(domain, field, gamma)
    if not angles.angle_condition:
        raise HypothesisFailed("angle condition", "Dihedral angles leave the contact-angle window",
                               angles.to_dict())
    return {"scalar": scalar.to_dict(), "mean_convexity": convexity.to_dict(), "angles": angles.to_dict()}


def comparison_verdict(domain: PolyhedralDomain, field: MetricField, gamma: GammaPolicy = "model",
                       h: float = 0.125, init: Optional[TriSurface] = None,
                       options: Optional[MinimizeOptions] = None, samples: int = 64,
                       seed: int = 0) -> ComparisonLedger:
    """
    Check the hypotheses, minimize the energy and evaluate the comparison chain

    The verdict is "consistent" when L >= -tol with tol = 10 h / scale; a
    "counterexample-flag" means the discrete chain contradicts the statement.

    Raises:
        HypothesisFailed: a hypothesis of the comparison statement fails
    """
    hypotheses = check_comparison_hypotheses(domain, field, gamma, samples=samples, seed=seed)
    gam = domain.contact_angles(gamma)
    if init is None:
        init = slice_mesh(domain, 0.5 * domain.height, divisions_for(domain, h))
    surface, energy_report = minimize(domain, field, init, gam, options)
    report = geometry_report(domain, surface, field)
    h_mesh = surface.mean_edge_length()

    bulk = 0.5 * float(np.sum((report.scalar + report.norm_a_squared) * report.mass))
    boundary = 0.0
    for j, face in enumerate(domain.faces):
        curve = report.contact_vertices[j]
        h_bar = face_mean_curvature_batch(field, face, report.points[curve])
        g = report.metric[curve]
        d = np.diff(report.points[curve], axis=0)
        gm = 0.5 * (g[1:] + g[:-1])
        lengths = np.sqrt(np.einsum("qi,qij,qj->q", d, gm, d))
        boundary += float(np.sum(0.5 * (h_bar[1:] + h_bar[:-1]) * lengths)) / np.sin(gam[j])

    op = assemble(domain, surface, field, report, minimal_tolerance=np.inf)
    stability_form = quadratic_form(op, np.ones(surface.n_vertices))
    corner_excess = float(np.sum(report.corner_angles - domain.model_angles().alpha))
    gauss_bonnet = (float(np.sum(report.gauss_defect[report.interior] * report.mass[report.interior]))
                    + float(np.sum(report.boundary_defect[report.boundary])))
    eig = min_eigenvalue(op)

    ledger = ComparisonLedger(
        bulk=bulk,
        boundary=boundary,
        stability_form=stability_form,
        gauss_bonnet=gauss_bonnet,
        corner_excess=corner_excess,
        gauss_bonnet_residual=gauss_bonnet_residual(report, "defect"),
        lambda_min=eig.value,
        tolerance=10.0 * h_mesh / domain.scale,
        energy=energy_report,
        hypotheses=hypotheses,
        rigidity=rigidity_certificate(domain, surface, field, report),
    )
    logger.info(f"Comparison ledger: L={ledger.total:.6g}, Q(1,1)={stability_form:.6g}, "
                f"corner excess={corner_excess:.6g}, lambda_min={eig.value:.6g} -> {ledger.verdict}")
    return ledger
