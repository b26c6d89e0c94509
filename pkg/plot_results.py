#!/usr/bin/env python3
"""
Plot Results - figures from the CSV/JSON outputs of expcli.py

Usage:
    python plot_results.py results/simulate
    python plot_results.py results/sweep results/rondeau --out figures
"""

import argparse
import json
from pathlib import Path
from typing import List, Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from observables import D_INFINITY  # noqa: E402


def plot_trajectory(frame: pd.DataFrame, path: Path) -> Path:
    fig, (ax_e, ax_d) = plt.subplots(2, 1, sharex=True, figsize=(7, 6))
    ax_e.plot(frame["step"], frame["energy_ave_density"], label="energy density")
    ax_e.plot(frame["step"], frame["staggered_m"], label="staggered m")
    ax_e.legend()
    ax_d.plot(frame["step"], frame["decorrelator"] / D_INFINITY)
    ax_d.axhline(1.0, color="gray", ls="--", lw=0.8)
    ax_d.set_xscale("log")
    ax_d.set_xlabel("step")
    ax_d.set_ylabel("d / d_inf")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_scaling(points: pd.DataFrame, fits: Optional[dict], path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 5))
    drive_fits = (fits or {}).get("drives", {})
    for drive, group in points.groupby("drive", sort=True):
        line = ax.errorbar(group["inverse_period"], group["tau_mean"], yerr=group["tau_stderr"],
                           fmt="o", capsize=3, label=drive)
        power = drive_fits.get(drive, {}).get("power_law", {})
        if "params" in power:
            x = np.linspace(group["inverse_period"].min(), group["inverse_period"].max(), 50)
            alpha = power["params"]["alpha"]
            ax.plot(x, power["params"]["prefactor"] * x ** alpha, color=line[0].get_color(), lw=0.8,
                    label=f"{drive}: alpha={alpha:.2f}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("1/T")
    ax.set_ylabel("tau_th (steps)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_rondeau(frame: pd.DataFrame, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 5))
    mean = frame.groupby(["drive", "step"], sort=True)["order"].mean().reset_index()
    for drive, group in mean.groupby("drive", sort=True):
        ax.plot(group["step"], group["order"], label=drive)
    ax.set_xscale("symlog", linthresh=4)
    ax.set_xlabel("step")
    ax.set_ylabel("(-1)^l <S^z>(4lT)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_directory(directory: Path, out: Path) -> List[Path]:
    """Render every figure whose inputs are present in `directory`"""
    out.mkdir(parents=True, exist_ok=True)
    written = []
    trajectory = directory / "trajectory.csv"
    if trajectory.exists():
        frame = pd.read_csv(trajectory)
        if len(frame):
            written.append(plot_trajectory(frame, out / f"{directory.name}_trajectory.png"))
    for points_name in ("points.csv", "finite_size.csv"):
        points_file = directory / points_name
        if points_file.exists():
            fits_file = directory / "fits.json"
            fits = json.loads(fits_file.read_text(encoding="utf-8")) if fits_file.exists() else None
            written.append(plot_scaling(pd.read_csv(points_file), fits, out / f"{directory.name}_scaling.png"))
    magnetization = directory / "rondeau_magnetization.csv"
    if magnetization.exists():
        frame = pd.read_csv(magnetization)
        if len(frame):
            written.append(plot_rondeau(frame, out / f"{directory.name}_rondeau.png"))
    return written


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(description="Plot experiment outputs")
    parser.add_argument("directories", nargs="+", help="Command output directories")
    parser.add_argument("--out", default="figures", help="Figure directory")
    args = parser.parse_args(argv)

    for directory in args.directories:
        written = plot_directory(Path(directory), Path(args.out))
        if not written:
            print(f"⚠️  nothing to plot in {directory}")
        for path in written:
            print(f"📊 {path}")
    return 0


if __name__ == "__main__":
    exit(main())
