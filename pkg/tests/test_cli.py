"""
Tests for the polyscal command line
"""
import json

import numpy as np
import pytest

from polyscal.cli import build_parser, main

CUBE = {"kind": "prism", "base": [[0, 0], [1, 0], [1, 1], [0, 1]], "top_scale": 1.0, "top_offset": [0, 0, 1]}


@pytest.fixture
def wedge_config(tmp_path):
    path = tmp_path / "wedge.json"
    path.write_text(json.dumps({
        "name": "wedge",
        "kind": "verify_wedge",
        "domain": CUBE,
        "wedge": {"gamma1": 1.0, "gamma2": 1.3, "opening": np.pi / 2},
    }))
    return str(path)


@pytest.fixture
def gaussbonnet_config(tmp_path):
    path = tmp_path / "gb.json"
    path.write_text(json.dumps({"name": "gb", "domain": CUBE, "mesh": {"h": 0.25}}))
    return str(path)


def test_parser_accepts_options_on_either_side():
    parser = build_parser()
    before = parser.parse_args(["--threads", "2", "solve", "--config", "a.json"])
    after = parser.parse_args(["solve", "--config", "a.json", "b.json", "--threads", "3"])

    assert before.threads == 2 and before.config == ["a.json"]
    assert after.threads == 3 and after.config == ["a.json", "b.json"]


def test_verify_wedge(wedge_config, tmp_path, capsys):
    code = main(["verify", "wedge", "--config", wedge_config, "--out-dir", str(tmp_path / "runs")])

    assert code == 0
    assert (tmp_path / "runs" / "wedge" / "bundle.json").exists()
    assert "pass" in capsys.readouterr().out


def test_command_sets_scenario_kind(gaussbonnet_config, tmp_path):
    """The file says nothing about its kind; the command decides"""
    out = tmp_path / "gb-bundle.json"
    code = main(["verify", "gaussbonnet", "--config", gaussbonnet_config, "--out", str(out),
                 "--out-dir", str(tmp_path)])

    assert code == 0
    assert json.loads(out.read_text())["kind"] == "verify_gaussbonnet"


def test_regress_update_then_compare(gaussbonnet_config, tmp_path):
    out = tmp_path / "gb-bundle.json"
    baselines = str(tmp_path / "baselines")
    main(["verify", "gaussbonnet", "--config", gaussbonnet_config, "--out", str(out), "--out-dir", str(tmp_path)])

    assert main(["regress", "--bundle", str(out), "--baseline-dir", baselines, "--update"]) == 0
    assert (tmp_path / "baselines" / "gb.json").exists()
    assert main(["regress", "--bundle", str(out), "--baseline-dir", baselines]) == 0


def test_regress_without_baseline(gaussbonnet_config, tmp_path):
    out = tmp_path / "gb-bundle.json"
    main(["verify", "gaussbonnet", "--config", gaussbonnet_config, "--out", str(out), "--out-dir", str(tmp_path)])
    assert main(["regress", "--bundle", str(out), "--baseline-dir", str(tmp_path / "empty")]) == 3


def test_missing_config_file(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "absent.json")]) == 3


def test_no_config():
    assert main(["solve"]) == 1


def test_single_output_needs_single_scenario(wedge_config, gaussbonnet_config, tmp_path):
    code = main(["solve", "--config", wedge_config, gaussbonnet_config, "--out", str(tmp_path / "x.json")])
    assert code == 1
