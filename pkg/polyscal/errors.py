"""
Exception hierarchy for polyscal

Errors are grouped by how the CLI reports them:
geometry/contract errors, numerical failures (exit 3),
hypothesis failures (exit 2) and configuration errors.
"""
from typing import Any, Dict, Optional


class PolyscalError(Exception):
    """Base error carrying optional context (scenario name, face index, ...)"""

    exit_code = 3

    def __init__(self, message: str = "", context: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.context: Dict[str, Any] = dict(context or {})

    def with_context(self, **context: Any) -> "PolyscalError":
        """Attach extra context and return self, for re-raising"""
        self.context.update(context)
        return self

    def __str__(self) -> str:
        if not self.context:
            return self.message
        details = ", ".join(f"{k}={v}" for k, v in sorted(self.context.items()))
        return f"{self.message} [{details}]"


# ===================================
# Metric / domain contract errors
# ===================================

class OutOfDomain(PolyscalError):
    """Point outside the metric box or outside a face chart"""


class NotSPD(PolyscalError):
    """Metric matrix is not symmetric positive definite"""


class StencilClipped(PolyscalError):
    """Finite-difference stencil leaves the metric box"""


class InvalidDomain(PolyscalError):
    """Polyhedral domain violates its construction rules"""


class DegenerateFace(PolyscalError):
    """Face of the polyhedron with near-zero area"""


class DegenerateTriangle(PolyscalError):
    """Surface triangle with near-zero area"""


class BadAngle(PolyscalError):
    """Contact or dihedral angle outside (0, pi)"""


class NoSolution(PolyscalError):
    """Opening angle outside the contact-angle window"""


class Tangential(NoSolution):
    """Opening angle on the boundary of the contact-angle window"""


class EmptySlice(PolyscalError):
    """Slicing plane misses the cone interior"""


class OpenContactCurve(PolyscalError):
    """Contact curve on a face is not closed against the face edges"""


class NotAdmissible(PolyscalError):
    """Surface does not separate the apex (or top) from the base"""


class InsufficientLevels(PolyscalError):
    """Refinement study needs more levels"""


# ===================================
# Numerical failures
# ===================================

class NumericalError(PolyscalError):
    """Base class for solver failures"""

    exit_code = 3


class NotConverged(NumericalError):
    """Minimizer hit its iteration budget; carries the best iterate"""

    def __init__(self, message: str = "", surface: Any = None, report: Any = None,
                 context: Optional[Dict[str, Any]] = None):
        super().__init__(message, context)
        self.surface = surface
        self.report = report


class ObstacleContact(NumericalError):
    """
    Surface touched the base (or top) obstacle

    Raised once the clearance falls below obstacle_touch_tol * scale (1e-6 by
    default). A minimizer closer than obstacle_clearance_factor * h (2h) but
    above that threshold is returned with clearance_ok = False and a warning.
    """


class NotMinimal(NumericalError):
    """Surface is not minimal (or CMC) within the requested tolerance"""


class SolverBreakdown(NumericalError):
    """Shifted factorization was singular twice, or a descent step raised the energy"""


class Incompatible(NumericalError):
    """Neumann data violate the compatibility condition"""


class NoConvergence(NumericalError):
    """Iterative linear solver did not converge"""


class NewtonDiverged(NumericalError):
    """Newton iteration for a leaf failed"""


class LeafLeftDomain(NumericalError):
    """Newton iterate moved a leaf outside the polyhedron"""


# ===================================
# Hypotheses and configuration
# ===================================

class HypothesisFailed(PolyscalError):
    """A hypothesis of the comparison statement does not hold"""

    exit_code = 2

    def __init__(self, hypothesis: str, message: str = "",
                 context: Optional[Dict[str, Any]] = None):
        super().__init__(message or f"Hypothesis failed: {hypothesis}", context)
        self.hypothesis = hypothesis


class ScenarioError(PolyscalError):
    """Malformed or unresolvable scenario configuration"""


class MissingBaseline(PolyscalError):
    """Regression baseline file not found"""
