"""
Tests for settings and the metrics endpoint switch
"""
import pytest

from polyscal.config import Settings
from polyscal.monitoring import SCENARIOS_RUN, start_metrics_server
from polyscal.runner import run_safe
from polyscal.schemas import Scenario


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("POLYSCAL_THREADS", "4")
    monkeypatch.setenv("POLYSCAL_SOLVER_TOL", "1e-8")
    settings = Settings(_env_file=None)

    assert settings.get_threads() == 4
    assert settings.get_solver_tol(2.0) == pytest.approx(2e-8)


def test_invalid_values_are_rejected():
    settings = Settings(_env_file=None, threads=0, fd_step_fraction=0.5)
    with pytest.raises(ValueError):
        settings.get_threads()
    with pytest.raises(ValueError):
        settings.get_fd_step(1.0)
    with pytest.raises(ValueError):
        Settings(_env_file=None).get_fd_step(0.0)


def test_fd_step_scales_with_box():
    assert Settings(_env_file=None).get_fd_step(2.0) == pytest.approx(2e-3)


def test_metrics_server_disabled_by_default():
    assert start_metrics_server() is False


def test_runs_are_counted(tmp_path):
    scenario = Scenario.model_validate({
        "name": "counted",
        "kind": "verify_wedge",
        "domain": {"kind": "prism", "base": [[0, 0], [1, 0], [1, 1], [0, 1]]},
        "wedge": {"gamma1": 1.0, "gamma2": 1.0, "opening": 1.5},
    })
    before = SCENARIOS_RUN._value.get()
    run_safe(scenario, out_dir=tmp_path)
    assert SCENARIOS_RUN._value.get() == before + 1
