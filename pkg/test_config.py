#!/usr/bin/env python3
"""
Tests for configuration defaults, precedence and validation
"""

import json
import math
import sys

import pytest

from config import ExperimentConfig, load_config, read_config_file
from drivegen import DriveSpec
from errors import ConfigError


@pytest.fixture(autouse=True)
def clean_env(monkeypatch, tmp_path):
    # set then delete so values loaded from a .env are undone at teardown
    for name in ("RMD_OUTPUT_DIR", "RMD_THREADS", "RMD_MASTER_SEED", "RMD_LOG_LEVEL"):
        monkeypatch.setenv(name, "")
        monkeypatch.delenv(name)
    monkeypatch.chdir(tmp_path)


def _write(tmp_path, data, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def test_defaults():
    config = load_config()
    assert config.n_linear == 50
    assert (config.g, config.h) == (0.9045, 0.809)
    assert (config.W, config.delta) == (0.01, 0.01)
    assert config.thresholds == [0.90, 0.89, 0.88]
    assert config.inverse_periods == [4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0]
    counts = [config.realizations_for(DriveSpec.parse(d)) for d in ("rmd:0", "rmd:1", "rmd:2", "rmd:4")]
    assert counts == [20, 10, 5, 1]
    assert config.realizations_for(DriveSpec.parse("thue-morse")) >= 5


def test_precedence_env_file_cli(tmp_path, monkeypatch):
    monkeypatch.setenv("RMD_THREADS", "3")
    monkeypatch.setenv("RMD_MASTER_SEED", "11")
    assert load_config().threads == 3

    path = _write(tmp_path, {"master_seed": 99, "n_linear": 12})
    config = load_config(path)
    assert config.threads == 3
    assert config.master_seed == 99
    assert config.n_linear == 12

    config = load_config(path, {"master_seed": 5, "threads": None})
    assert config.master_seed == 5
    assert config.threads == 3


def test_bad_env_value(monkeypatch):
    monkeypatch.setenv("RMD_THREADS", "many")
    with pytest.raises(ConfigError):
        load_config()


def test_unknown_keys_rejected(tmp_path):
    with pytest.raises(ConfigError, match="frobnicate"):
        load_config(_write(tmp_path, {"frobnicate": 1}))
    with pytest.raises(ConfigError):
        load_config(overrides={"not_a_field": 2})


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "nope.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(str(bad))
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, [1, 2, 3]))


def test_manifest_is_a_config(tmp_path):
    manifest = {"manifest_version": 1, "command": "sweep", "config": {"n_linear": 8, "drives": ["floquet"]}}
    path = _write(tmp_path, manifest, "manifest.json")
    assert read_config_file(path) == {"n_linear": 8, "drives": ["floquet"]}
    assert load_config(path).drives == ["floquet"]


@pytest.mark.parametrize("values", [
    {"n_linear": 1},
    {"inverse_periods": [4.0, 0.0]},
    {"thresholds": [0.9, 1.1]},
    {"extra_threshold_sets": [[]]},
    {"W": -0.1},
    {"step_cap": -1},
    {"record_every": 0},
    {"threads": 0},
    {"drives": ["rmd:1", "fibonacci"]},
    {"initial_state": "ferro"},
    {"realizations": {"rmd:0": 0}},
])
def test_validation(values, tmp_path):
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, values))


@pytest.mark.parametrize("values", [
    {"n_linear": "6"},
    {"g": "0.9"},
    {"threads": True},
    {"step_cap": 1.5},
    {"drives": "rmd:0"},
    {"inverse_periods": [4, "five"]},
    {"realizations": {"rmd:0": "2"}},
    {"extra_threshold_sets": [0.85]},
])
def test_wrong_types_are_config_errors(values, tmp_path):
    with pytest.raises(ConfigError, match=list(values)[0]):
        load_config(_write(tmp_path, values))


def test_json_numbers_are_coerced(tmp_path):
    config = load_config(_write(tmp_path, {"g": 1, "inverse_periods": [3, 4.5], "step_cap": 1e6,
                                           "record_every": None}))
    assert isinstance(config.g, float) and config.g == 1.0
    assert config.inverse_periods == [3.0, 4.5]
    assert isinstance(config.step_cap, int) and config.step_cap == 1_000_000
    assert config.record_every is None


def test_env_file_in_working_directory(tmp_path):
    (tmp_path / ".env").write_text("RMD_THREADS=4\nRMD_OUTPUT_DIR=from_dotenv\n", encoding="utf-8")
    config = load_config()
    assert config.threads == 4
    assert config.output_dir == "from_dotenv"


def test_derived_parameters():
    config = ExperimentConfig(field_scale=2.0)
    params = config.step_params(4.0)
    assert params.g == pytest.approx(2 * 0.9045)
    assert params.h == pytest.approx(2 * 0.809)
    assert params.T == pytest.approx(0.25)
    assert config.step_params(4.0, h=0.0).h == 0.0

    rondeau = ExperimentConfig().rondeau_params(0.25)
    assert rondeau.g * rondeau.T == pytest.approx(2 * math.pi * 0.25)


def test_threshold_union_and_record_interval():
    config = ExperimentConfig(extra_threshold_sets=[[0.85, 0.9]])
    assert config.all_thresholds() == [0.9, 0.89, 0.88, 0.85]
    assert config.record_every_for(DriveSpec.parse("rmd:3")) == 8
    assert ExperimentConfig(record_every=5).record_every_for(DriveSpec.parse("rmd:3")) == 5


if __name__ == "__main__":
    sys.exit(pytest.main([__file__]))
