"""
Projected gradient descent for the capillary energy
"""
import time
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from loguru import logger

from ..config import settings
from ..errors import DegenerateTriangle, NotConverged, ObstacleContact, SolverBreakdown
from ..fields.base import MetricField
from ..geometry.domain import PolyhedralDomain
from ..mesh.report import geometry_report
from ..mesh.surface import TriSurface
from ..monitoring import LAST_ENERGY, SOLVE_DURATION, SOLVER_ITERATIONS
from .energy import (
    EnergyReport,
    GammaPolicy,
    check_admissible,
    constraints_respected,
    energy_gradient,
    energy_terms,
    obstacle_check,
    project_gradient,
    snap_to_constraints,
)


@dataclass
class MinimizeOptions:
    """Descent controls; None fields fall back to settings"""
    tol: Optional[float] = None
    max_iter: Optional[int] = None
    step0: Optional[float] = None
    armijo_c: Optional[float] = None
    max_halvings: Optional[int] = None
    wetted_side: str = "top"
    raise_not_converged: bool = False
    check_obstacle: bool = True

    def resolve(self, domain: PolyhedralDomain) -> "MinimizeOptions":
        return MinimizeOptions(
            tol=self.tol if self.tol is not None else settings.get_solver_tol(domain.scale),
            max_iter=self.max_iter or settings.solver_max_iter,
            step0=self.step0 or settings.solver_step0_fraction,
            armijo_c=self.armijo_c if self.armijo_c is not None else settings.armijo_c,
            max_halvings=self.max_halvings or settings.armijo_max_halvings,
            wetted_side=self.wetted_side,
            raise_not_converged=self.raise_not_converged,
            check_obstacle=self.check_obstacle,
        )


def check_descent(before: float, after: float, iteration: int) -> None:
    """
    Raises:
        SolverBreakdown: an accepted step raised F
    """
    if not after <= before:
        raise SolverBreakdown(f"Energy rose from {before:.12g} to {after:.12g} at iteration {iteration}",
                              {"iteration": iteration, "increase": after - before})


def certify(domain: PolyhedralDomain, surface: TriSurface, field: MetricField, gamma: np.ndarray,
            report: EnergyReport) -> EnergyReport:
    """Fill the first-variation certificates: |H|_inf and per-face contact-angle residuals"""
    geo = geometry_report(domain, surface, field)
    report.mean_curvature_residual = geo.max_mean_curvature
    report.angle_residual = np.array([float(np.max(np.abs(a - gamma[j])))
                                      for j, a in enumerate(geo.contact_angles)])
    return report


def minimize(domain: PolyhedralDomain, field: MetricField, init: TriSurface,
             gamma: GammaPolicy = "model",
             options: Optional[MinimizeOptions] = None) -> Tuple[TriSurface, EnergyReport]:
    """
    Minimize F over vertex positions with Armijo backtracking

    Interior vertices move freely, face vertices within their face plane and
    corner vertices along their edge. The run converges when the projected
    gradient's max-norm drops below the tolerance.

    Returns:
        (best surface, EnergyReport with certificates)

    Raises:
        NotAdmissible: init does not separate the domain
        ObstacleContact: the surface came within obstacle_touch_tol * scale of the base, the apex or the top face
        SolverBreakdown: an accepted step raised F
        NotConverged: iteration budget exhausted and options.raise_not_converged set
    """
    opts = (options or MinimizeOptions()).resolve(domain)
    gam = domain.contact_angles(gamma)
    init.validate(domain, tol=1e-9 * domain.scale)
    check_admissible(domain, init)

    started = time.perf_counter()
    h = init.mean_edge_length()
    touch = settings.obstacle_touch_tol * domain.scale
    surface = init.copy()
    value, grad = energy_gradient(domain, surface, field, gam, opts.wetted_side)
    pg = project_gradient(domain, surface, grad)
    gnorm = float(np.max(np.abs(pg)))
    logger.info(f"Minimizing F on {domain.kind} (k={domain.k}) with {field.describe()}: "
                f"{surface.n_vertices} vertices, h={h:.4g}, F0={value:.8g}, tol={opts.tol:.3g}")

    alpha = opts.step0 * h / max(gnorm, 1e-300)
    iterations = 0
    converged = gnorm < opts.tol
    while not converged and iterations < opts.max_iter:
        accepted = False
        decrease = float(np.sum(pg * pg))
        for _ in range(opts.max_halvings):
            trial = snap_to_constraints(domain, surface, surface.vertices - alpha * pg)
            if constraints_respected(domain, surface, trial):
                candidate = surface.with_vertices(trial)
                try:
                    new_value, new_grad = energy_gradient(domain, candidate, field, gam, opts.wetted_side)
                except DegenerateTriangle:
                    new_value = np.inf
                if new_value <= value - opts.armijo_c * alpha * decrease:
                    accepted = True
                    break
            alpha *= 0.5
        if not accepted:
            logger.warning(f"Line search stalled after {iterations} iterations (|grad|={gnorm:.3g})")
            break

        check_descent(value, new_value, iterations + 1)
        surface, value, grad = candidate, new_value, new_grad
        pg = project_gradient(domain, surface, grad)
        gnorm = float(np.max(np.abs(pg)))
        iterations += 1
        SOLVER_ITERATIONS.inc()
        if iterations % 100 == 0:
            logger.debug(f"iter {iterations}: F={value:.10g}, |grad|={gnorm:.3g}, step={alpha:.3g}")

        if opts.check_obstacle:
            clearance = obstacle_check(domain, surface)
            if clearance.minimum < touch:
                raise ObstacleContact(
                    f"Surface touched the {'base' if clearance.base < touch else 'top'} obstacle "
                    f"after {iterations} iterations", {"clearance": clearance.to_dict()})
        converged = gnorm < opts.tol
        alpha = min(opts.step0 * h / max(gnorm, 1e-300), 2.0 * alpha)

    check_admissible(domain, surface)
    clearance = obstacle_check(domain, surface)
    terms = energy_terms(domain, surface, field, gam, opts.wetted_side)
    report = EnergyReport(
        energy=terms.energy, area=terms.area, wetted=terms.wetted, gamma=gam,
        wetted_side=opts.wetted_side, clearance_base=clearance.base, clearance_top=clearance.top,
        clearance_ok=clearance.minimum > settings.obstacle_clearance_factor * h,
        iterations=iterations, converged=converged, gradient_norm=gnorm,
    )
    certify(domain, surface, field, gam, report)
    elapsed = time.perf_counter() - started
    SOLVE_DURATION.observe(elapsed)
    LAST_ENERGY.set(report.energy)

    if converged:
        logger.info(f"Converged in {iterations} iterations ({elapsed:.1f}s): F={report.energy:.10g}, "
                    f"|H|_inf={report.mean_curvature_residual:.3g}")
        if not report.clearance_ok:
            logger.warning(f"Minimizer clearance {clearance.minimum:.3g} is below "
                           f"{settings.obstacle_clearance_factor} h")
    else:
        logger.warning(f"Not converged after {iterations} iterations: |grad|={gnorm:.3g} > {opts.tol:.3g}")
        if opts.raise_not_converged:
            raise NotConverged(f"Minimizer not converged after {iterations} iterations",
                               surface=surface, report=report, context={"gradient_norm": gnorm})
    return surface, report
