"""
Pydantic models for scenario files, run bundles, baselines and mesh sidecars
"""
from datetime import datetime
from enum import Enum
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from .errors import ScenarioError


class ScenarioKind(str, Enum):
    """What a scenario runs"""
    SOLVE = "solve"
    FOLIATE = "foliate"
    VERIFY_WEDGE = "verify_wedge"
    VERIFY_COMPARISON = "verify_comparison"
    VERIFY_GAUSSBONNET = "verify_gaussbonnet"
    VERIFY_EVOLUTION = "verify_evolution"
    CURVATURE = "curvature"


class JsonModel(BaseModel):
    """Base model with the JSON helpers used for every persisted file"""

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)

    @classmethod
    def from_json(cls, json_str: str):
        return cls.model_validate_json(json_str)


class DomainSpec(JsonModel):
    """Cone or prism over a convex base polygon"""
    kind: Literal["cone", "prism"] = Field(..., description="Domain type")
    base: List[List[float]] = Field(..., min_length=3, description="Counterclockwise base vertices (x, y)")
    apex: Optional[List[float]] = Field(None, description="Cone apex (x, y, z), z > 0")
    top_scale: float = Field(1.0, gt=0, description="Prism top = top_scale * base + top_offset")
    top_offset: List[float] = Field([0.0, 0.0, 1.0], description="Prism top translation")

    @field_validator("base")
    @classmethod
    def check_base(cls, v):
        if any(len(p) not in (2, 3) for p in v):
            raise ValueError("base vertices must have 2 or 3 coordinates")
        return v

    @model_validator(mode="after")
    def check_apex(self):
        if self.kind == "cone" and (self.apex is None or len(self.apex) != 3):
            raise ValueError("cone domains need a 3-component apex")
        return self

    def to_config(self) -> Dict[str, Any]:
        return self.model_dump(exclude_none=True)


class MeshSpec(JsonModel):
    """Initial surface"""
    h: float = Field(..., gt=0, description="Target mesh size")
    height: Optional[float] = Field(None, gt=0, description="Slice height (default: half the domain height)")
    amplitude: float = Field(0.0, description="Amplitude of a smooth bump added to the slice")
    normal: Optional[List[float]] = Field(None, description="Tilted slice normal (overrides height)")
    offset: Optional[float] = Field(None, description="Tilted slice offset")


class SolverOptions(JsonModel):
    tol: Optional[float] = Field(None, gt=0, description="Gradient tolerance (default: settings.solver_tol * scale)")
    max_iter: Optional[int] = Field(None, gt=0)
    step0: Optional[float] = Field(None, gt=0, description="First trial displacement as a fraction of h")
    wetted_side: Literal["top", "bottom"] = "top"
    raise_not_converged: bool = False


class FoliationOptions(JsonModel):
    start: float = Field(..., description="First leaf parameter (rho for cones, height for prisms)")
    stop: float = Field(..., description="Last leaf parameter")
    steps: int = Field(10, gt=1)

    @model_validator(mode="after")
    def check_range(self):
        if self.start == self.stop:
            raise ValueError("foliation range must not be empty")
        return self


class WedgeSpec(JsonModel):
    gamma1: float = Field(..., gt=0)
    gamma2: float = Field(..., gt=0)
    opening: float = Field(..., gt=0)


class EvolutionSpec(JsonModel):
    variation: Literal["constant", "cosine"] = "constant"
    dt: float = Field(1e-3, gt=0)


class Scenario(JsonModel):
    """A runnable, reproducible configuration"""
    name: str = Field(..., min_length=1, description="Scenario name, used for artifact file names")
    kind: ScenarioKind = ScenarioKind.SOLVE
    domain: DomainSpec
    metric: str = Field("flat", description="Catalog metric, optionally with arguments: name(a, b, ...)")
    metric_params: Dict[str, Any] = Field(default_factory=dict, description="Keyword arguments for the metric")
    gamma: Union[Literal["model"], float, List[float]] = Field("model", description="Contact angle policy")
    mesh: MeshSpec = Field(default_factory=lambda: MeshSpec(h=0.125))
    solver: SolverOptions = Field(default_factory=SolverOptions)
    foliation: Optional[FoliationOptions] = None
    wedge: Optional[WedgeSpec] = None
    evolution: EvolutionSpec = Field(default_factory=EvolutionSpec)
    baseline: Optional[str] = Field(None, description="Baseline file name under the baseline directory")
    seed: int = 0

    @model_validator(mode="after")
    def check_kind_options(self):
        if self.kind == ScenarioKind.FOLIATE and self.foliation is None:
            raise ValueError("foliate scenarios need a 'foliation' section")
        if self.kind == ScenarioKind.VERIFY_WEDGE and self.wedge is None:
            raise ValueError("verify_wedge scenarios need a 'wedge' section")
        return self

    class Config:
        json_schema_extra = {
            "example": {
                "name": "flat-cube-slice",
                "kind": "solve",
                "domain": {"kind": "prism", "base": [[0, 0], [1, 0], [1, 1], [0, 1]],
                           "top_scale": 1.0, "top_offset": [0, 0, 1]},
                "metric": "flat",
                "gamma": 1.5707963267948966,
                "mesh": {"h": 0.0625, "amplitude": 0.2},
            }
        }


def parse_scenario(text: str) -> Scenario:
    """
    Validate scenario JSON

    Raises:
        ScenarioError: naming the first offending field
    """
    try:
        return Scenario.model_validate_json(text)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(x) for x in first["loc"]) or "<root>"
        raise ScenarioError(f"Invalid scenario field '{where}': {first['msg']}", {"field": where}) from e


class RunBundle(JsonModel):
    """Persisted outcome of one scenario run"""
    scenario: str
    kind: ScenarioKind
    status: Literal["pass", "fail", "hypothesis_failed", "error"]
    exit_code: int
    results: Dict[str, Any] = Field(default_factory=dict)
    artifacts: Dict[str, str] = Field(default_factory=dict)
    error: Optional[str] = None
    created_at: datetime = Field(default_factory=datetime.utcnow)


class Baseline(JsonModel):
    """Reference values with per-field relative tolerances"""
    scenario: str
    values: Dict[str, float]
    tolerances: Dict[str, float] = Field(default_factory=dict)
    default_tolerance: float = Field(1e-6, ge=0)
    provenance: Optional[str] = None

    def tolerance(self, key: str) -> float:
        return self.tolerances.get(key, self.default_tolerance)


class RegressionReport(JsonModel):
    scenario: str
    diffs: Dict[str, float]
    failed: List[str]
    missing: List[str] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failed and not self.missing


class MeshSidecar(JsonModel):
    """Constraint tags stored next to an OBJ surface"""
    k: int = Field(..., ge=3)
    tags: List[int]
    owners: List[int]
    metadata: Dict[str, Any] = Field(default_factory=dict)
