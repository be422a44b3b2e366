"""
Tests for scenario loading, running, bundles and regression baselines
"""
import json

import numpy as np
import pytest

from polyscal.errors import MissingBaseline, ScenarioError
from polyscal.runner import (
    EXIT_FAIL,
    EXIT_PASS,
    exit_code,
    flatten_results,
    load_baseline,
    load_bundle,
    load_scenario,
    regress,
    run,
    run_many,
    run_safe,
    snapshot_baseline,
    with_kind,
    write_baseline,
)
from polyscal.schemas import RunBundle, Scenario, ScenarioKind, parse_scenario

CUBE = {"kind": "prism", "base": [[0, 0], [1, 0], [1, 1], [0, 1]], "top_scale": 1.0, "top_offset": [0, 0, 1]}


def _scenario(**overrides) -> Scenario:
    data = {"name": "flat-cube", "kind": "verify_gaussbonnet", "domain": CUBE, "mesh": {"h": 0.25}}
    data.update(overrides)
    return Scenario.model_validate(data)


def _write(path, data) -> str:
    path.write_text(json.dumps(data))
    return str(path)


class TestScenarioFiles:

    def test_load_scenario(self, tmp_path):
        path = _write(tmp_path / "s.json", {"name": "s", "domain": CUBE, "gamma": 1.2})
        scenario = load_scenario(path)
        assert scenario.kind == ScenarioKind.SOLVE
        assert scenario.gamma == pytest.approx(1.2)
        assert scenario.mesh.h == pytest.approx(0.125)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ScenarioError, match="not found"):
            load_scenario(tmp_path / "absent.json")

    def test_invalid_field_is_named(self, tmp_path):
        path = _write(tmp_path / "s.json", {"name": "s", "domain": CUBE, "mesh": {"h": -1}})
        with pytest.raises(ScenarioError) as info:
            load_scenario(path)
        assert info.value.context["field"] == "mesh.h"
        assert info.value.context["path"] == path

    def test_malformed_json(self):
        with pytest.raises(ScenarioError):
            parse_scenario("{not json")

    def test_cone_needs_apex(self):
        with pytest.raises(ScenarioError):
            parse_scenario(json.dumps({"name": "s", "domain": {"kind": "cone", "base": CUBE["base"]}}))

    def test_kind_sections_required(self):
        with pytest.raises(ScenarioError, match="wedge"):
            with_kind(_scenario(), "verify_wedge")
        with pytest.raises(ScenarioError, match="foliation"):
            with_kind(_scenario(), ScenarioKind.FOLIATE)


class TestRun:

    def test_wedge_scenario_passes(self, tmp_path):
        scenario = _scenario(kind="verify_wedge",
                             wedge={"gamma1": 1.2, "gamma2": 1.4, "opening": np.pi / 2})
        bundle = run(scenario, out_dir=tmp_path)

        assert bundle.status == "pass"
        assert bundle.exit_code == EXIT_PASS
        assert bundle.results["contact_angle_error"] < 1e-12
        assert (tmp_path / "flat-cube" / "bundle.json").exists()

    def test_wedge_outside_window_is_reported(self, tmp_path):
        scenario = _scenario(kind="verify_wedge",
                             wedge={"gamma1": np.pi / 4, "gamma2": np.pi / 4, "opening": np.pi / 3})
        bundle = run(scenario, out_dir=tmp_path)
        assert bundle.status == "pass"
        assert bundle.results["solvable"] is False
        assert bundle.results["expected_solvable"] is False

    def test_gaussbonnet_on_flat_slice(self, tmp_path):
        bundle = run(_scenario(), out_dir=tmp_path)

        assert bundle.status == "pass"
        assert bundle.results["defect_residual"] < 1e-10
        assert bundle.results["euler_characteristic"] == 1
        assert "mesh" in bundle.artifacts

    def test_curvature_report(self, tmp_path):
        bundle = run(_scenario(kind="curvature", metric="conformal_saddle",
                               metric_params={"eps": 0.1, "delta": 0.05}), out_dir=tmp_path)
        assert bundle.status == "pass"
        assert bundle.results["scalar"]["min_scalar"] > 0
        assert bundle.results["mean_convexity"]["passed"]

    def test_hypothesis_failure_bundle(self, tmp_path):
        scenario = _scenario(kind="verify_comparison", metric="conformal_gaussian",
                             metric_params={"eps": 0.2, "sigma": 0.3, "center": [0.5, 0.5, 0.5]})
        bundle = run_safe(scenario, out_dir=tmp_path)

        assert bundle.status == "hypothesis_failed"
        assert bundle.exit_code == 2
        assert bundle.results["context"]["scenario"] == "flat-cube"
        assert load_bundle(bundle.artifacts["bundle"]).status == "hypothesis_failed"

    def test_unknown_metric_is_a_scenario_error(self, tmp_path):
        with pytest.raises(ScenarioError) as info:
            run(_scenario(metric="hyperbolic"), out_dir=tmp_path)
        assert info.value.context["scenario"] == "flat-cube"

    def test_run_many_keeps_order(self, tmp_path):
        scenarios = [_scenario(name=f"s{i}", mesh={"h": 0.5}) for i in range(3)]
        bundles = run_many(scenarios, threads=2, out_dir=tmp_path)
        assert [b.scenario for b in bundles] == ["s0", "s1", "s2"]

    def test_reruns_are_bit_identical(self, tmp_path):
        """Same scenario twice: identical results and identical trace bytes"""
        scenario = Scenario.model_validate({
            "name": "cone-foliation",
            "kind": "foliate",
            "domain": {"kind": "cone", "base": CUBE["base"], "apex": [0.5, 0.5, 1.0]},
            "mesh": {"h": 0.25},
            "foliation": {"start": 0.2, "stop": 0.6, "steps": 5},
        })
        first = run(scenario, out_dir=tmp_path / "a")
        second = run(scenario, out_dir=tmp_path / "b")

        values = [flatten_results(b.results) for b in (first, second)]
        for v in values:
            v.pop("elapsed_seconds")
        assert values[0] == values[1]
        assert first.artifacts["trace"] != second.artifacts["trace"]
        assert (tmp_path / "a" / "cone-foliation" / "trace.csv").read_bytes() == \
            (tmp_path / "b" / "cone-foliation" / "trace.csv").read_bytes()

    def test_explicit_output_paths(self, tmp_path):
        bundle = run(_scenario(), out_dir=tmp_path, bundle_path=tmp_path / "out.json",
                     mesh_path=tmp_path / "mesh.obj")
        assert (tmp_path / "out.json").exists()
        assert (tmp_path / "mesh.obj").exists()
        assert bundle.artifacts["bundle"] == str(tmp_path / "out.json")


def _bundle(status: str = "pass", code: int = 0, **results) -> RunBundle:
    return RunBundle(scenario="demo", kind=ScenarioKind.SOLVE, status=status, exit_code=code,
                     results=results)


class TestRegression:

    def test_exit_code_is_worst(self):
        assert exit_code([]) == EXIT_PASS
        assert exit_code([_bundle(), _bundle("fail", EXIT_FAIL), _bundle("hypothesis_failed", 2)]) == 2

    def test_flatten_results(self):
        flat = flatten_results({"a": 1, "b": {"c": 2.5, "d": [3, 4]}, "ok": True, "none": None, "s": "x"})
        assert flat == {"a": 1.0, "b.c": 2.5, "b.d.0": 3.0, "b.d.1": 4.0}

    def test_snapshot_round_trip(self, tmp_path):
        bundle = _bundle(energy=1.0, elapsed_seconds=3.0, ledger={"L": 0.0})
        path = write_baseline(snapshot_baseline(bundle), tmp_path)
        baseline = load_baseline("demo", tmp_path)

        assert path.name == "demo.json"
        assert "elapsed_seconds" not in baseline.values
        assert regress(bundle, baseline).passed

    def test_relative_and_absolute_diffs(self, tmp_path):
        baseline = snapshot_baseline(_bundle(energy=2.0, ledger={"L": 0.0}), tolerance=1e-3)
        report = regress(_bundle(energy=2.001, ledger={"L": 1e-4}), baseline)

        assert report.diffs["energy"] == pytest.approx(5e-4)
        assert report.diffs["ledger.L"] == pytest.approx(1e-4)
        assert report.passed

        worse = regress(_bundle(energy=2.1), baseline)
        assert worse.failed == ["energy"]
        assert worse.missing == ["ledger.L"]
        assert not worse.passed

    def test_missing_baseline(self, tmp_path):
        with pytest.raises(MissingBaseline):
            load_baseline("nothing", tmp_path)
