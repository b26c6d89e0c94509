#!/usr/bin/env python3
"""
Random multipolar drive experiments - command-line interface

Each subcommand runs one configured batch job and writes CSV/JSON outputs
plus a manifest.json into <output_dir>/<command>/. The manifest is itself a
valid --config file, so any run can be repeated bit for bit.
"""

import argparse
import json
import logging
import os
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numba
import numpy as np
import pandas as pd

import experiments
from analysis import ConfigKind, EnergyCalibration
from config import ExperimentConfig, __version__, load_config, load_env_file
from drivegen import DriveKind
from errors import AllRunsCensoredError, ConfigError

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1
SCHEMA_VERSIONS = {
    "trajectory.csv": 1,
    "points.csv": 1,
    "runs.csv": 1,
    "fits.json": 1,
    "phase_alpha.csv": 1,
    "phase_tau.csv": 1,
    "rondeau_magnetization.csv": 1,
    "rondeau_lifetimes.csv": 1,
    "rondeau_long_time.csv": 1,
    "finite_size.csv": 1,
    "calibration_neel.csv": 1,
    "calibration_polarized.csv": 1,
    "labels.txt": 1,
}
CALIBRATION_FILES = {ConfigKind.NEEL: "calibration_neel.csv", ConfigKind.POLARIZED: "calibration_polarized.csv"}

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_CENSORED = 3


@dataclass
class RunManifest:
    """Config echo, software versions, per-run seeds and timings, warnings and written files"""
    command: str
    config: Dict[str, Any]
    runs: List[Dict[str, Any]] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    outputs: Dict[str, int] = field(default_factory=dict)
    wall_time_s: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "manifest_version": MANIFEST_VERSION,
            "command": self.command,
            "config": self.config,
            "software": {
                "version": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "numba": numba.__version__,
                "pandas": pd.__version__,
            },
            "runs": self.runs,
            "warnings": self.warnings,
            "outputs": self.outputs,
            "wall_time_s": round(self.wall_time_s, 3),
        }

    def write(self, out_dir: Path) -> Path:
        path = out_dir / "manifest.json"
        write_json(self.to_dict(), path)
        return path


def output_dir(config: ExperimentConfig, command: str) -> Path:
    path = Path(config.output_dir) / command
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_csv(frame: pd.DataFrame, path: Path, manifest: RunManifest,
              sort_by: Optional[Sequence[str]] = None) -> Path:
    if sort_by and len(frame):
        frame = frame.sort_values(list(sort_by), kind="mergesort").reset_index(drop=True)
    frame.to_csv(path, index=False)
    manifest.outputs[path.name] = SCHEMA_VERSIONS.get(path.name, 1)
    return path


def write_json(data: Dict[str, Any], path: Path) -> Path:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def _check_censored(outcomes: Sequence[experiments.RunOutcome], command: str):
    if outcomes and all(o.result(o.task.thresholds).censored for o in outcomes):
        raise AllRunsCensoredError(
            f"{command}: all {len(outcomes)} runs hit the step cap before thermalizing; raise --step-cap")


# -- commands ----------------------------------------------------------------

def cmd_simulate(config: ExperimentConfig, progress: bool = False) -> RunManifest:
    """Single twin trajectory to trajectory.csv (and labels.txt with --dump-labels)"""
    started = time.perf_counter()
    out = output_dir(config, "simulate")
    manifest = RunManifest("simulate", config.to_dict())
    frame, seeds, labels = experiments.simulate(config)
    write_csv(frame, out / "trajectory.csv", manifest)
    if labels:
        (out / "labels.txt").write_text(labels + "\n", encoding="utf-8")
        manifest.outputs["labels.txt"] = SCHEMA_VERSIONS["labels.txt"]
    manifest.runs.append({"drive": config.simulate_drive, "inverse_period": config.simulate_inverse_period,
                          "seeds": seeds, "steps_run": int(frame["step"].iloc[-1]) if len(frame) else 0})
    manifest.wall_time_s = time.perf_counter() - started
    manifest.write(out)
    return manifest


def _write_sweep(sweep: experiments.SweepResult, config: ExperimentConfig, out: Path,
                 manifest: RunManifest, fits: Dict[str, Any]):
    write_csv(sweep.points, out / "points.csv", manifest, ["drive", "n_linear", "inverse_period"])
    write_csv(sweep.runs, out / "runs.csv", manifest, ["drive", "n_linear", "inverse_period", "realization"])
    write_json(fits, out / "fits.json")
    manifest.outputs["fits.json"] = SCHEMA_VERSIONS["fits.json"]
    manifest.runs.extend(o.manifest_entry(config.thresholds) for o in sweep.outcomes)
    manifest.warnings.extend(sweep.warnings)


def cmd_scaling_sweep(config: ExperimentConfig, progress: bool = False) -> RunManifest:
    """tau_th against 1/T for every drive, with power-law/exponential/log-squared fits"""
    started = time.perf_counter()
    out = output_dir(config, "sweep")
    manifest = RunManifest("sweep", config.to_dict())
    sweep = experiments.scaling_sweep(config, progress=progress)
    _write_sweep(sweep, config, out, manifest, {"h": config.h * config.field_scale, "drives": sweep.fits})
    manifest.wall_time_s = time.perf_counter() - started
    manifest.write(out)
    _check_censored(sweep.outcomes, "sweep")
    return manifest


def cmd_h_zero(config: ExperimentConfig, progress: bool = False) -> RunManifest:
    """The scaling sweep with the longitudinal field switched off"""
    started = time.perf_counter()
    out = output_dir(config, "h-zero")
    manifest = RunManifest("h-zero", config.to_dict())
    sweep = experiments.scaling_sweep(config, h=0.0, tag="h0", progress=progress)
    fits = dict(sweep.fits)
    for spec in config.drive_specs():
        if spec.kind is DriveKind.RMD:
            fits[spec.label] = dict(fits[spec.label], quantum_contrast={
                "quantum_alpha": 2 * spec.order - 3,
                "note": "exponent expected for the quantum spin-1/2 model at h = 0; informational only",
            })
    _write_sweep(sweep, config, out, manifest, {"h": 0.0, "drives": fits})
    manifest.wall_time_s = time.perf_counter() - started
    manifest.write(out)
    _check_censored(sweep.outcomes, "h-zero")
    return manifest


def load_calibrations(directory: str, realizations: int) -> Dict[ConfigKind, EnergyCalibration]:
    calibrations = {}
    for kind, name in CALIBRATION_FILES.items():
        path = Path(directory) / name
        if not path.exists():
            raise ConfigError(f"calibration file not found: {path} (run `calibrate` first)")
        calibrations[kind] = EnergyCalibration.from_frame(kind, pd.read_csv(path), realizations)
    return calibrations


def _write_calibrations(calibrations: Dict[ConfigKind, EnergyCalibration], out: Path, manifest: RunManifest):
    for kind, cal in calibrations.items():
        write_csv(cal.to_frame(), out / CALIBRATION_FILES[kind], manifest, ["W"])
        if not cal.monotone:
            manifest.warnings.append(f"{kind.value} calibration is not monotone over the whole W grid")


def cmd_calibrate(config: ExperimentConfig, progress: bool = False) -> RunManifest:
    """Initial energy density against W for Neel and polarized states"""
    started = time.perf_counter()
    out = output_dir(config, "calibrate")
    manifest = RunManifest("calibrate", config.to_dict())
    _write_calibrations(experiments.calibrate_both(config, progress), out, manifest)
    manifest.wall_time_s = time.perf_counter() - started
    manifest.write(out)
    return manifest


def cmd_phase_diagram(config: ExperimentConfig, progress: bool = False) -> RunManifest:
    """alpha (RMD) and tau_th (other drives) against the initial energy density"""
    started = time.perf_counter()
    out = output_dir(config, "phase-diagram")
    manifest = RunManifest("phase-diagram", config.to_dict())
    if config.calibration_dir:
        calibrations = load_calibrations(config.calibration_dir, config.calibration_realizations)
        logger.info("loaded calibrations from %s", config.calibration_dir)
    else:
        calibrations = experiments.calibrate_both(config, progress)
        _write_calibrations(calibrations, out, manifest)
    result = experiments.phase_diagram(config, calibrations, progress)
    for w in result.warnings:
        logger.warning(w)
    write_csv(result.alpha, out / "phase_alpha.csv", manifest, ["epsilon", "drive"])
    write_csv(result.tau, out / "phase_tau.csv", manifest, ["epsilon", "drive", "inverse_period"])
    manifest.runs.extend(o.manifest_entry(config.thresholds) for o in result.outcomes)
    manifest.warnings.extend(result.warnings)
    manifest.wall_time_s = time.perf_counter() - started
    manifest.write(out)
    _check_censored(result.outcomes, "phase-diagram")
    return manifest


def cmd_rondeau(config: ExperimentConfig, progress: bool = False) -> RunManifest:
    """Stroboscopic magnetization, lifetimes and long-time values for the time rondeau crystal"""
    started = time.perf_counter()
    out = output_dir(config, "rondeau")
    manifest = RunManifest("rondeau", config.to_dict())
    result = experiments.rondeau(config, progress)
    keys = ["drive", "g_tc", "realization"]
    write_csv(result.magnetization, out / "rondeau_magnetization.csv", manifest, keys + ["step"])
    write_csv(result.lifetimes, out / "rondeau_lifetimes.csv", manifest, keys)
    write_csv(result.long_time, out / "rondeau_long_time.csv", manifest, keys)
    for o in result.outcomes:
        manifest.runs.append({"drive": o.task.drive.label, "g_tc": o.task.g_tc,
                              "realization": o.task.realization, "seeds": o.seeds,
                              "wall_time_s": round(o.wall_time, 3)})
    manifest.wall_time_s = time.perf_counter() - started
    manifest.write(out)
    return manifest


def cmd_finite_size(config: ExperimentConfig, progress: bool = False) -> RunManifest:
    """tau_th across lattice sizes at fixed frequencies"""
    started = time.perf_counter()
    out = output_dir(config, "finite-size")
    manifest = RunManifest("finite-size", config.to_dict())
    sweep = experiments.finite_size(config, progress)
    write_csv(sweep.points, out / "finite_size.csv", manifest, ["drive", "n_linear", "inverse_period"])
    write_csv(sweep.runs, out / "runs.csv", manifest, ["drive", "n_linear", "inverse_period", "realization"])
    manifest.runs.extend(o.manifest_entry(config.thresholds) for o in sweep.outcomes)
    manifest.warnings.extend(sweep.warnings)
    manifest.wall_time_s = time.perf_counter() - started
    manifest.write(out)
    _check_censored(sweep.outcomes, "finite-size")
    return manifest


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_scaling_sweep,
    "phase-diagram": cmd_phase_diagram,
    "rondeau": cmd_rondeau,
    "finite-size": cmd_finite_size,
    "calibrate": cmd_calibrate,
    "h-zero": cmd_h_zero,
}


# -- command line ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Random multipolar drive prethermalization experiments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (a manifest.json works too)")
    common.add_argument("--out", dest="output_dir", help="Output directory")
    common.add_argument("--seed", dest="master_seed", type=int, help="Master seed")
    common.add_argument("--threads", type=int, help="Worker threads")
    common.add_argument("--step-cap", dest="step_cap", type=int, help="Maximum steps per run")
    common.add_argument("--log-level", default=None, help="Logging level (default: RMD_LOG_LEVEL or INFO)")
    common.add_argument("--quiet", action="store_true", help="Hide progress bars and status lines")

    sub = parser.add_subparsers(dest="command", required=True)
    for name, func in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=(func.__doc__ or "").strip().splitlines()[0])
        if name == "simulate":
            p.add_argument("--dump-labels", dest="dump_labels", type=int, metavar="K",
                           help="Write the first K drive labels to labels.txt")
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    keys = ("output_dir", "master_seed", "threads", "step_cap", "dump_labels")
    return {k: getattr(args, k, None) for k in keys}


def main(argv: Optional[List[str]] = None) -> int:
    """Command-line entry point; returns the process exit code"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_OK

    load_env_file()
    level = (args.log_level or os.getenv("RMD_LOG_LEVEL") or "INFO").upper()
    logging.basicConfig(format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    logging.getLogger().setLevel(getattr(logging, level, logging.INFO))
    say = (lambda *a: None) if args.quiet else print

    try:
        config = load_config(args.config, _overrides(args))
        say(f"🚀 Running {args.command} (seed {config.master_seed}, {config.threads} thread(s))...")
        manifest = COMMANDS[args.command](config, progress=not args.quiet)
        for w in manifest.warnings:
            say(f"⚠️  {w}")
        say(f"✅ Done in {manifest.wall_time_s:.1f}s; outputs in {Path(config.output_dir) / args.command}")
        return EXIT_OK
    except ConfigError as e:
        print(f"❌ Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except AllRunsCensoredError as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_CENSORED
    except Exception as e:
        logger.debug("command failed", exc_info=True)
        print(f"❌ Error: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    exit(main())
