"""
polyscal - capillary surfaces in cone- and prism-type Riemannian polyhedra

Metric fields and their curvature, polyhedral domains, triangulated
separating surfaces, the capillary energy and its minimizer, stability and
rigidity checks, CMC capillary foliations, and a scenario runner.
"""
from .errors import HypothesisFailed, NumericalError, PolyscalError
from .fields import MetricFactory, MetricField
from .geometry import PolyhedralDomain
from .mesh import TriSurface
from .schemas import RunBundle, Scenario, ScenarioKind

__version__ = "0.1.0"

__all__ = [
    "HypothesisFailed",
    "NumericalError",
    "PolyscalError",
    "MetricFactory",
    "MetricField",
    "PolyhedralDomain",
    "TriSurface",
    "RunBundle",
    "Scenario",
    "ScenarioKind",
]
