"""
Scenario runner: builds domains and metrics from scenario files, dispatches
to the solver modules and persists bundles, meshes and traces
"""
import csv
import json
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import ValidationError

from .config import settings
from .errors import (
    HypothesisFailed,
    InsufficientLevels,
    MissingBaseline,
    NoSolution,
    NotMinimal,
    PolyscalError,
    ScenarioError,
)
from .fields.base import MetricField
from .fields.curvature import verify_scalar_sign
from .fields.factory import MetricFactory
from .geometry.domain import PolyhedralDomain
from .geometry.measure import check_hypotheses, check_mean_convexity
from .geometry.wedge import (
    Plane,
    Wedge,
    corner_angle,
    corner_angle_from_planes,
    corner_angle_monotonicity_check,
    measure_contact_angles,
    plane_from_contact_angles,
)
from .mesh.builders import divisions_for, graph_mesh, slice_mesh, tilted_slice_mesh
from .mesh.io import save_surface
from .mesh.report import (
    boundary_identity_residual,
    gauss_bonnet_residual,
    gauss_equation_residual,
    geometry_report,
)
from .mesh.surface import TriSurface
from .monitoring import SCENARIOS_FAILED, SCENARIOS_RUN
from .schemas import Baseline, MeshSpec, RegressionReport, RunBundle, Scenario, ScenarioKind, parse_scenario
from .solver import (
    MinimizeOptions,
    comparison_verdict,
    dynamics_check,
    evolution_lemma_check,
    foliate,
    minimize,
    rigidity_certificate,
)

PathLike = Union[str, Path]

EXIT_PASS = 0
EXIT_FAIL = 1


# -----------------------------------
# Building blocks
# -----------------------------------

def build_domain(scenario: Scenario) -> PolyhedralDomain:
    return PolyhedralDomain.from_config(scenario.domain.to_config())


def build_field(scenario: Scenario, domain: PolyhedralDomain) -> MetricField:
    """
    Resolve the scenario metric against the catalog on the domain's metric box

    Raises:
        ScenarioError: unknown metric name or bad metric arguments
    """
    try:
        return MetricFactory.create(scenario.metric, box=domain.metric_box(), **scenario.metric_params)
    except (ValueError, TypeError) as e:
        raise ScenarioError(f"Cannot build metric '{scenario.metric}': {e}", {"field": "metric"}) from e


def resolve_h(scenario: Scenario, h_override: Optional[float] = None) -> float:
    h = h_override if h_override is not None else settings.h_override
    return float(h) if h is not None else scenario.mesh.h


def initial_surface(domain: PolyhedralDomain, mesh: MeshSpec, h: float) -> TriSurface:
    """
    Initial surface described by a mesh section

    A tilted plane wins over a height; a nonzero amplitude adds a Gaussian bump
    scaled by the distance to the nearer of the two obstacles.
    """
    n = divisions_for(domain, h)
    if mesh.normal is not None:
        if mesh.offset is None:
            raise ScenarioError("Tilted mesh needs both 'normal' and 'offset'", {"field": "mesh.offset"})
        normal = np.asarray(mesh.normal, dtype=float)
        return tilted_slice_mesh(domain, Plane(normal / np.linalg.norm(normal), float(mesh.offset)), n)
    height = 0.5 * domain.height if mesh.height is None else mesh.height
    if mesh.amplitude == 0.0:
        return slice_mesh(domain, height, n)
    center = domain.section(height)[:, :2].mean(axis=0)
    width = 0.25 * domain.scale
    room = min(height, domain.height - height)

    def bump(points: np.ndarray) -> np.ndarray:
        r2 = np.sum((points[:, :2] - center) ** 2, axis=1)
        return mesh.amplitude * room * np.exp(-r2 / width ** 2)

    return graph_mesh(domain, height, n, bump)


def _variation(name: str, surface: TriSurface) -> np.ndarray:
    if name == "constant":
        return np.ones(surface.n_vertices)
    x = surface.vertices[:, 0]
    lo, hi = float(x.min()), float(x.max())
    return np.cos(np.pi * (x - lo) / (hi - lo))


def _minimize_options(scenario: Scenario) -> MinimizeOptions:
    s = scenario.solver
    return MinimizeOptions(tol=s.tol, max_iter=s.max_iter, step0=s.step0, wetted_side=s.wetted_side,
                           raise_not_converged=s.raise_not_converged)


def with_kind(scenario: Scenario, kind: Union[str, ScenarioKind]) -> Scenario:
    """Re-validate a scenario under another kind"""
    try:
        return Scenario.model_validate({**scenario.model_dump(), "kind": kind})
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(x) for x in first["loc"]) or "<root>"
        raise ScenarioError(f"Scenario '{scenario.name}' cannot run as {kind}: {first['msg']}",
                            {"field": where}) from e


def load_scenario(path: PathLike) -> Scenario:
    """
    Read and validate a scenario file

    Raises:
        ScenarioError: missing file or schema violation
    """
    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"Scenario file not found: {path}", {"path": str(path)})
    try:
        return parse_scenario(path.read_text())
    except ScenarioError as e:
        raise e.with_context(path=str(path))


# -----------------------------------
# Artifacts
# -----------------------------------

class Artifacts:
    """Output paths of one run, created lazily under out_dir/<scenario>"""

    def __init__(self, scenario: Scenario, out_dir: Optional[PathLike] = None,
                 bundle_path: Optional[PathLike] = None, mesh_path: Optional[PathLike] = None):
        self.root = Path(out_dir or settings.out_dir) / scenario.name
        self.bundle = Path(bundle_path) if bundle_path else self.root / "bundle.json"
        self.mesh = Path(mesh_path) if mesh_path else self.root / "surface.obj"
        self.trace = self.root / "trace.csv"
        self.written: Dict[str, str] = {}

    def save_mesh(self, surface: TriSurface) -> None:
        self.written["mesh"] = str(save_surface(surface, self.mesh))

    def save_trace(self, rows: List[Dict[str, Any]]) -> None:
        if not rows:
            return
        self.trace.parent.mkdir(parents=True, exist_ok=True)
        with open(self.trace, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            for row in rows:
                writer.writerow({k: repr(float(v)) for k, v in row.items()})
        self.written["trace"] = str(self.trace)

    def save_bundle(self, bundle: RunBundle) -> RunBundle:
        self.bundle.parent.mkdir(parents=True, exist_ok=True)
        bundle.artifacts = {**self.written, "bundle": str(self.bundle)}
        self.bundle.write_text(bundle.to_json())
        return bundle


# -----------------------------------
# Scenario kinds
# -----------------------------------

Outcome = Tuple[bool, Dict[str, Any]]


def _run_solve(scenario: Scenario, domain: PolyhedralDomain, field: MetricField, h: float,
               artifacts: Artifacts) -> Outcome:
    init = initial_surface(domain, scenario.mesh, h)
    surface, report = minimize(domain, field, init, scenario.gamma, _minimize_options(scenario))
    artifacts.save_mesh(surface)
    return report.converged and report.clearance_ok, {"energy_report": report.to_dict(), "h": h}


def _run_foliate(scenario: Scenario, domain: PolyhedralDomain, field: MetricField, h: float,
                 artifacts: Artifacts) -> Outcome:
    opts = scenario.foliation
    try:
        trace = foliate(domain, field, opts.start, opts.stop, opts.steps, scenario.gamma, h,
                        wetted_side=scenario.solver.wetted_side)
    except PolyscalError as e:
        partial = getattr(e, "trace", None)
        if partial is not None and partial.leaves:
            artifacts.save_trace(partial.rows())
        raise
    artifacts.save_trace(trace.rows())
    artifacts.save_mesh(trace.leaves[len(trace.leaves) // 2].surface)

    results: Dict[str, Any] = {"trace": trace.to_dict(), "h": h}
    certificates = [rigidity_certificate(domain, leaf.surface, field) for leaf in trace.leaves]
    results["rigidity"] = [cert.to_dict() for cert in certificates]
    energies = np.array([leaf.energy for leaf in trace.leaves])
    results["energy_spread"] = float(np.ptp(energies))
    dynamics_ok = True
    try:
        ledger = dynamics_check(trace, domain, field)
        results["dynamics"] = ledger.to_dict()
        dynamics_ok = ledger.passed
    except (HypothesisFailed, InsufficientLevels) as e:
        logger.warning(f"Dynamics check skipped for '{scenario.name}': {e}")
        results["dynamics"] = {"skipped": str(e)}
    return trace.complete and dynamics_ok, results


def _run_wedge(scenario: Scenario, domain: PolyhedralDomain, field: MetricField, h: float,
               artifacts: Artifacts) -> Outcome:
    spec = scenario.wedge
    g1, g2, opening = spec.gamma1, spec.gamma2, spec.opening
    window = (abs(np.pi - (g1 + g2)), np.pi - abs(g1 - g2))
    expected = window[0] < opening < window[1]
    wedge = Wedge.from_opening(opening)
    results: Dict[str, Any] = {"window": list(window), "expected_solvable": expected}
    try:
        normal = plane_from_contact_angles(wedge, g1, g2)
    except NoSolution as e:
        results.update({"solvable": False, "reason": str(e)})
        return not expected, results

    m1, m2 = measure_contact_angles(wedge, normal)
    alpha = corner_angle(g1, g2, opening)
    wider = opening + 0.5 * (window[1] - opening)
    results.update({
        "solvable": True,
        "normal": normal.tolist(),
        "contact_angle_error": max(abs(m1 - g1), abs(m2 - g2)),
        "corner_angle": alpha,
        "corner_angle_error": abs(alpha - corner_angle_from_planes(wedge, g1, g2)),
        "monotone": corner_angle_monotonicity_check(g1, g2, opening, wider),
    })
    passed = (expected and results["contact_angle_error"] < 1e-12
              and results["corner_angle_error"] < 1e-10 and results["monotone"])
    return passed, results


def _run_comparison(scenario: Scenario, domain: PolyhedralDomain, field: MetricField, h: float,
                    artifacts: Artifacts) -> Outcome:
    init = initial_surface(domain, scenario.mesh, h)
    ledger = comparison_verdict(domain, field, scenario.gamma, h=h, init=init,
                                options=_minimize_options(scenario), seed=scenario.seed)
    return ledger.verdict == "consistent", {"ledger": ledger.to_dict(), "h": h}


def _run_gaussbonnet(scenario: Scenario, domain: PolyhedralDomain, field: MetricField, h: float,
                     artifacts: Artifacts) -> Outcome:
    surface = initial_surface(domain, scenario.mesh, h)
    artifacts.save_mesh(surface)
    report = geometry_report(domain, surface, field)
    results: Dict[str, Any] = {
        "h": surface.mean_edge_length(),
        "defect_residual": gauss_bonnet_residual(report, "defect"),
        "fit_residual": gauss_bonnet_residual(report, "fit"),
        "gauss_equation_residual": float(np.max(gauss_equation_residual(report, "fit"))),
        "euler_characteristic": report.chi,
    }
    try:
        results["boundary_identity_residual"] = boundary_identity_residual(domain, surface, field, report=report)
    except NotMinimal as e:
        logger.info(f"Boundary identity not evaluated: {e}")
        results["boundary_identity_residual"] = None
    return results["defect_residual"] < 1e-10, results


def _run_evolution(scenario: Scenario, domain: PolyhedralDomain, field: MetricField, h: float,
                   artifacts: Artifacts) -> Outcome:
    init = initial_surface(domain, scenario.mesh, h)
    surface, report = minimize(domain, field, init, scenario.gamma, _minimize_options(scenario))
    artifacts.save_mesh(surface)
    speed = _variation(scenario.evolution.variation, surface)
    check = evolution_lemma_check(domain, surface, field, speed, dt=scenario.evolution.dt)
    results = {"evolution": check.to_dict(), "energy_report": report.to_dict(), "h": h}
    return check.interior_relative < 0.1, results


def _run_curvature(scenario: Scenario, domain: PolyhedralDomain, field: MetricField, h: float,
                   artifacts: Artifacts) -> Outcome:
    points = domain.sample_interior(64, seed=scenario.seed, margin=1e-3 * domain.scale)
    scalar = verify_scalar_sign(field, points, tolerance=1e-10)
    convexity = check_mean_convexity(domain, field, tolerance=1e-10)
    angles = check_hypotheses(domain, field, scenario.gamma)
    return True, {
        "scalar": scalar.to_dict(),
        "mean_convexity": convexity.to_dict(),
        "angles": angles.to_dict(),
    }


_DISPATCH: Dict[ScenarioKind, Callable[..., Outcome]] = {
    ScenarioKind.SOLVE: _run_solve,
    ScenarioKind.FOLIATE: _run_foliate,
    ScenarioKind.VERIFY_WEDGE: _run_wedge,
    ScenarioKind.VERIFY_COMPARISON: _run_comparison,
    ScenarioKind.VERIFY_GAUSSBONNET: _run_gaussbonnet,
    ScenarioKind.VERIFY_EVOLUTION: _run_evolution,
    ScenarioKind.CURVATURE: _run_curvature,
}


# -----------------------------------
# Running
# -----------------------------------

def run(scenario: Scenario, out_dir: Optional[PathLike] = None, h_override: Optional[float] = None,
        bundle_path: Optional[PathLike] = None, mesh_path: Optional[PathLike] = None) -> RunBundle:
    """
    Run one scenario and persist its bundle

    A finished run yields status "pass" or "fail" (verdict). Module errors
    propagate with the scenario name attached to their context.

    Raises:
        PolyscalError: any module error, carrying scenario=<name>
    """
    artifacts = Artifacts(scenario, out_dir, bundle_path, mesh_path)
    started = time.perf_counter()
    logger.info(f"Running scenario '{scenario.name}' ({scenario.kind.value})")
    try:
        domain = build_domain(scenario)
        field = build_field(scenario, domain)
        h = resolve_h(scenario, h_override)
        passed, results = _DISPATCH[scenario.kind](scenario, domain, field, h, artifacts)
    except PolyscalError as e:
        raise e.with_context(scenario=scenario.name)

    results["elapsed_seconds"] = time.perf_counter() - started
    bundle = RunBundle(
        scenario=scenario.name,
        kind=scenario.kind,
        status="pass" if passed else "fail",
        exit_code=EXIT_PASS if passed else EXIT_FAIL,
        results=_jsonable(results),
    )
    artifacts.save_bundle(bundle)
    logger.info(f"Scenario '{scenario.name}' finished: {bundle.status} "
                f"({results['elapsed_seconds']:.2f}s), bundle at {artifacts.bundle}")
    return bundle


def run_safe(scenario: Scenario, out_dir: Optional[PathLike] = None, h_override: Optional[float] = None,
             bundle_path: Optional[PathLike] = None, mesh_path: Optional[PathLike] = None) -> RunBundle:
    """Run a scenario, turning module errors into persisted error bundles"""
    SCENARIOS_RUN.inc()
    try:
        bundle = run(scenario, out_dir, h_override, bundle_path, mesh_path)
    except PolyscalError as e:
        hypothesis = isinstance(e, HypothesisFailed)
        if hypothesis:
            logger.warning(f"Scenario '{scenario.name}': hypothesis '{e.hypothesis}' failed: {e}")
        else:
            logger.error(f"Scenario '{scenario.name}' failed: {type(e).__name__}: {e}")
        bundle = RunBundle(
            scenario=scenario.name,
            kind=scenario.kind,
            status="hypothesis_failed" if hypothesis else "error",
            exit_code=e.exit_code,
            results=_jsonable({"error_type": type(e).__name__, "context": e.context}),
            error=str(e),
        )
        artifacts = Artifacts(scenario, out_dir, bundle_path, mesh_path)
        artifacts.save_bundle(bundle)
    if bundle.status != "pass":
        SCENARIOS_FAILED.inc()
    return bundle


def run_many(scenarios: Sequence[Scenario], threads: Optional[int] = None,
             out_dir: Optional[PathLike] = None, h_override: Optional[float] = None) -> List[RunBundle]:
    """Run scenarios on a thread pool; bundles come back in input order"""
    workers = threads or settings.get_threads()
    if workers == 1 or len(scenarios) <= 1:
        return [run_safe(s, out_dir, h_override) for s in scenarios]
    logger.info(f"Running {len(scenarios)} scenarios on {workers} threads")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: run_safe(s, out_dir, h_override), scenarios))


def exit_code(bundles: Sequence[RunBundle]) -> int:
    """Worst exit code over a sweep"""
    return max((b.exit_code for b in bundles), default=EXIT_PASS)


def _jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays (and non-finite floats) into JSON-safe values"""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if np.isfinite(v) else None
    if value is None or isinstance(value, str):
        return value
    return str(value)


# -----------------------------------
# Regression
# -----------------------------------

def flatten_results(results: Dict[str, Any], prefix: str = "") -> Dict[str, float]:
    """Numeric leaves of a results tree under dotted keys; list items are indexed"""
    out: Dict[str, float] = {}
    items = results.items() if isinstance(results, dict) else enumerate(results)
    for key, value in items:
        name = f"{prefix}.{key}" if prefix else str(key)
        if isinstance(value, bool) or value is None:
            continue
        if isinstance(value, (int, float)):
            out[name] = float(value)
        elif isinstance(value, (dict, list)):
            out.update(flatten_results(value, name))
    return out


def load_baseline(name: str, directory: Optional[PathLike] = None) -> Baseline:
    """
    Raises:
        MissingBaseline: no <name>.json in the baseline directory
    """
    path = Path(directory or settings.baseline_dir) / (name if name.endswith(".json") else f"{name}.json")
    if not path.exists():
        raise MissingBaseline(f"Baseline not found: {path}", {"path": str(path)})
    return Baseline.from_json(path.read_text())


def load_bundle(path: PathLike) -> RunBundle:
    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"Bundle file not found: {path}", {"path": str(path)})
    return RunBundle.from_json(path.read_text())


def regress(bundle: RunBundle, baseline: Baseline) -> RegressionReport:
    """
    Relative differences of every baseline field against a run bundle

    A field fails when its relative diff exceeds the baseline tolerance; for a
    zero reference value the absolute difference is used.
    """
    values = flatten_results(bundle.results)
    diffs: Dict[str, float] = {}
    failed: List[str] = []
    missing: List[str] = []
    for key in sorted(baseline.values):
        ref = baseline.values[key]
        if key not in values:
            missing.append(key)
            continue
        err = abs(values[key] - ref)
        diffs[key] = err / abs(ref) if abs(ref) > 1e-300 else err
        if diffs[key] > baseline.tolerance(key):
            failed.append(key)
    report = RegressionReport(scenario=bundle.scenario, diffs=diffs, failed=failed, missing=missing)
    if report.passed:
        logger.info(f"Regression '{bundle.scenario}': {len(diffs)} fields within tolerance")
    else:
        logger.warning(f"Regression '{bundle.scenario}' failed: {', '.join(failed + missing)}")
    return report


def snapshot_baseline(bundle: RunBundle, keys: Optional[Sequence[str]] = None,
                      tolerance: float = 1e-6, provenance: Optional[str] = None) -> Baseline:
    """Baseline of the selected (default: all numeric) fields of a bundle"""
    values = flatten_results(bundle.results)
    values.pop("elapsed_seconds", None)
    if keys is not None:
        values = {k: values[k] for k in keys if k in values}
    return Baseline(scenario=bundle.scenario, values=values, default_tolerance=tolerance,
                    provenance=provenance or f"snapshot of {bundle.scenario} at {bundle.created_at.isoformat()}")


def write_baseline(baseline: Baseline, directory: Optional[PathLike] = None) -> Path:
    path = Path(directory or settings.baseline_dir) / f"{baseline.scenario}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(json.loads(baseline.to_json()), indent=2, sort_keys=True))
    return path
