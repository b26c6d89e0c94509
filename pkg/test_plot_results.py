#!/usr/bin/env python3
"""
Tests for the figure script on tiny command outputs
"""

import json
import sys

import pytest

import plot_results
from expcli import EXIT_OK, main

TINY = {
    "n_linear": 6,
    "simulate_inverse_period": 2.0,
    "simulate_steps": 32,
    "drives": ["rmd:0"],
    "inverse_periods": [1.0, 1.5, 2.0],
    "realizations": {"rmd:0": 2, "thue-morse": 1},
    "step_cap": 20000,
    "rondeau_drives": ["rmd:0", "thue-morse"],
    "g_tc": 0.25,
    "g_tc_grid": [0.25],
    "rondeau_periods": 40,
}


@pytest.fixture
def outputs(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    config = tmp_path / "config.json"
    config.write_text(json.dumps(TINY), encoding="utf-8")
    out = tmp_path / "out"
    for command in ("simulate", "sweep", "rondeau"):
        assert main([command, "--config", str(config), "--out", str(out), "--quiet"]) == EXIT_OK
    return out


def test_plot_directory_writes_each_figure(outputs, tmp_path):
    figures = tmp_path / "figures"
    names = {}
    for command in ("simulate", "sweep", "rondeau"):
        names[command] = [p.name for p in plot_results.plot_directory(outputs / command, figures)]
    assert names == {
        "simulate": ["simulate_trajectory.png"],
        "sweep": ["sweep_scaling.png"],
        "rondeau": ["rondeau_rondeau.png"],
    }
    assert all((figures / n[0]).stat().st_size > 0 for n in names.values())


def test_plot_directory_without_inputs(tmp_path):
    assert plot_results.plot_directory(tmp_path, tmp_path / "figures") == []


def test_main_reports_figures(outputs, tmp_path, capsys):
    assert plot_results.main([str(outputs / "simulate"), str(tmp_path / "empty"), "--out", str(tmp_path / "f")]) == 0
    printed = capsys.readouterr().out
    assert "simulate_trajectory.png" in printed
    assert "nothing to plot" in printed


if __name__ == "__main__":
    sys.exit(pytest.main([__file__]))
