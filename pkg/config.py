#!/usr/bin/env python3
"""
Experiment configuration: dataclass defaults, .env overrides, flat JSON files
and command-line flags, applied in that order
"""

import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Union, get_args, get_origin, get_type_hints

from dotenv import find_dotenv, load_dotenv

from analysis import ConfigKind, DEFAULT_S_CR, DEFAULT_THRESHOLDS
from drivegen import DriveSpec
from dynamics import DEFAULT_STEP_CAP, StepParams
from errors import ConfigError, InvalidArgumentError

__version__ = "0.4.0"

logger = logging.getLogger(__name__)

ENV_KEYS = {
    "RMD_OUTPUT_DIR": ("output_dir", str),
    "RMD_THREADS": ("threads", int),
    "RMD_MASTER_SEED": ("master_seed", int),
}


def _grid(start: float, stop: float, step: float) -> List[float]:
    count = int(round((stop - start) / step)) + 1
    return [round(start + k * step, 10) for k in range(count)]


@dataclass
class ExperimentConfig:
    """Every knob of every command; JSON config keys are these field names"""
    # lattice and model
    n_linear: int = 50
    g: float = 0.9045
    h: float = 0.809
    field_scale: float = 1.0
    initial_state: str = "neel"
    W: float = 0.01
    delta: float = 0.01

    # drives and sweep
    drives: List[str] = field(default_factory=lambda: ["rmd:0", "rmd:1", "rmd:2", "rmd:4"])
    inverse_periods: List[float] = field(default_factory=lambda: [float(v) for v in range(4, 13)])
    realizations: Dict[str, int] = field(default_factory=lambda: {
        "rmd:0": 20, "rmd:1": 10, "rmd:2": 5, "rmd:4": 1, "thue-morse": 5, "floquet": 5,
    })
    default_realizations: int = 5
    thresholds: List[float] = field(default_factory=lambda: list(DEFAULT_THRESHOLDS))
    extra_threshold_sets: List[List[float]] = field(default_factory=lambda: [[0.85, 0.84, 0.83]])
    step_cap: int = DEFAULT_STEP_CAP
    record_every: Optional[int] = None

    # simulate
    simulate_drive: str = "rmd:1"
    simulate_inverse_period: float = 6.0
    simulate_steps: int = 100_000
    dump_labels: int = 0

    # phase diagram and calibration
    target_energies: List[float] = field(default_factory=lambda: [-1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0, 1.2])
    calibration_W_grid: List[float] = field(default_factory=lambda: _grid(0.0, 0.5, 0.02))
    calibration_realizations: int = 50
    calibration_dir: Optional[str] = None

    # time rondeau crystal
    g_tc: float = 0.255
    g_tc_grid: List[float] = field(default_factory=lambda: _grid(0.23, 0.30, 0.005))
    rondeau_drives: List[str] = field(default_factory=lambda: ["rmd:0", "rmd:1", "rmd:2", "rmd:3", "rmd:4", "thue-morse"])
    rondeau_inverse_period: float = 8.0
    rondeau_periods: int = 10_000
    rondeau_state: str = "polarized"
    s_cr: float = DEFAULT_S_CR

    # finite size
    n_linear_grid: List[int] = field(default_factory=lambda: [10, 20, 30, 40, 50])
    finite_size_inverse_periods: List[float] = field(default_factory=lambda: [11.0])

    # bookkeeping
    master_seed: int = 20240607
    output_dir: str = "results"
    threads: int = 1

    @classmethod
    def field_names(cls) -> List[str]:
        return [f.name for f in fields(cls)]

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def drive_specs(self, labels: Optional[List[str]] = None) -> List[DriveSpec]:
        try:
            return [DriveSpec.parse(text) for text in (self.drives if labels is None else labels)]
        except InvalidArgumentError as e:
            raise ConfigError(str(e)) from e

    def realizations_for(self, spec: DriveSpec) -> int:
        return int(self.realizations.get(spec.label, self.default_realizations))

    def record_every_for(self, spec: DriveSpec) -> int:
        return self.record_every if self.record_every is not None else spec.block_length

    def step_params(self, inverse_period: float, h: Optional[float] = None) -> StepParams:
        """Fields scaled jointly by field_scale; `h` overrides the longitudinal field"""
        h_value = self.h if h is None else h
        return StepParams(self.g * self.field_scale, h_value * self.field_scale, 1.0 / inverse_period)

    def rondeau_params(self, g_tc: float) -> StepParams:
        """g = g_tc * omega with omega = 2 pi / T, so g * T = 2 pi g_tc"""
        inv = self.rondeau_inverse_period
        omega = 2.0 * math.pi * inv
        return StepParams(g_tc * omega, self.h * self.field_scale, 1.0 / inv)

    def all_thresholds(self) -> List[float]:
        merged = set(self.thresholds)
        for group in self.extra_threshold_sets:
            merged.update(group)
        return sorted(merged, reverse=True)

    def validate(self) -> "ExperimentConfig":
        problems = []
        if self.n_linear < 2:
            problems.append(f"n_linear must be >= 2 (got {self.n_linear})")
        if any(n < 2 for n in self.n_linear_grid):
            problems.append("n_linear_grid entries must be >= 2")
        for name in ("inverse_periods", "finite_size_inverse_periods"):
            if any(v <= 0 for v in getattr(self, name)):
                problems.append(f"{name} must be positive")
        if self.simulate_inverse_period <= 0 or self.rondeau_inverse_period <= 0:
            problems.append("inverse periods must be positive")
        for group in [self.thresholds] + list(self.extra_threshold_sets):
            if not group or any(not 0.0 < x < 1.0 for x in group):
                problems.append(f"threshold set {group} must be non-empty with values in (0, 1)")
        if self.W < 0 or self.delta < 0:
            problems.append("W and delta must be non-negative")
        if self.step_cap < 0:
            problems.append(f"step_cap must be >= 0 (got {self.step_cap})")
        if self.record_every is not None and self.record_every < 1:
            problems.append(f"record_every must be >= 1 (got {self.record_every})")
        if self.threads < 1:
            problems.append(f"threads must be >= 1 (got {self.threads})")
        if self.default_realizations < 1 or any(v < 1 for v in self.realizations.values()):
            problems.append("realization counts must be >= 1")
        if self.calibration_realizations < 1:
            problems.append("calibration_realizations must be >= 1")
        if self.simulate_steps < 0 or self.rondeau_periods < 0 or self.dump_labels < 0:
            problems.append("step counts must be >= 0")
        for name in ("initial_state", "rondeau_state"):
            try:
                ConfigKind(getattr(self, name))
            except ValueError:
                problems.append(f"{name} must be 'neel' or 'polarized' (got {getattr(self, name)!r})")
        for labels in (self.drives, self.rondeau_drives, [self.simulate_drive], list(self.realizations)):
            for text in labels:
                try:
                    DriveSpec.parse(text)
                except InvalidArgumentError as e:
                    problems.append(str(e))
        if problems:
            raise ConfigError("invalid configuration: " + "; ".join(problems))
        return self


def _apply(config: ExperimentConfig, values: Dict[str, Any], source: str) -> None:
    known = set(ExperimentConfig.field_names())
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown config keys in {source}: {', '.join(unknown)}")
    hints = get_type_hints(ExperimentConfig)
    for key, value in values.items():
        try:
            setattr(config, key, _coerce(hints[key], value))
        except (TypeError, ValueError) as e:
            raise ConfigError(f"config key {key!r} in {source}: {e}") from e


def _coerce(expected: Any, value: Any) -> Any:
    """Check a JSON value against a field annotation; ints are accepted for floats"""
    origin, args = get_origin(expected), get_args(expected)
    if origin is Union:
        if value is None and type(None) in args:
            return None
        expected = next(a for a in args if a is not type(None))
        origin, args = get_origin(expected), get_args(expected)
    if isinstance(value, bool):
        raise TypeError(f"expected {_type_name(expected)}, got {value!r}")
    if expected is float and isinstance(value, (int, float)):
        return float(value)
    if expected is int:
        if isinstance(value, int):
            return value
        if isinstance(value, float) and value.is_integer():
            return int(value)
    if expected is str and isinstance(value, str):
        return value
    if origin is list and isinstance(value, list):
        return [_coerce(args[0], v) for v in value]
    if origin is dict and isinstance(value, dict):
        return {_coerce(args[0], k): _coerce(args[1], v) for k, v in value.items()}
    raise TypeError(f"expected {_type_name(expected)}, got {value!r}")


def _type_name(expected: Any) -> str:
    return getattr(expected, "__name__", None) or str(expected).replace("typing.", "")


def read_config_file(path: str) -> Dict[str, Any]:
    """Flat JSON config; a run manifest is accepted too (its `config` block is used)"""
    file_path = Path(path)
    if not file_path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(file_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must contain a JSON object")
    if "manifest_version" in data and isinstance(data.get("config"), dict):
        return data["config"]
    return data


def load_env_file() -> None:
    """Load a .env from the working directory (or a parent); real environment wins"""
    load_dotenv(find_dotenv(usecwd=True))


def env_overrides() -> Dict[str, Any]:
    load_env_file()
    values = {}
    for env_name, (key, cast) in ENV_KEYS.items():
        raw = os.getenv(env_name)
        if raw is None or raw == "":
            continue
        try:
            values[key] = cast(raw)
        except ValueError as e:
            raise ConfigError(f"environment variable {env_name}={raw!r} is not a valid {cast.__name__}") from e
    return values


def load_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    config = ExperimentConfig()
    _apply(config, env_overrides(), "environment")
    if path:
        _apply(config, read_config_file(path), path)
    if overrides:
        _apply(config, {k: v for k, v in overrides.items() if v is not None}, "command line")
    logger.debug("configuration: %s", config.to_dict())
    return config.validate()
