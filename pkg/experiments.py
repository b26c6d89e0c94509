#!/usr/bin/env python3
"""
Experiments - batches of independent twin-trajectory and rondeau runs

Every run derives its own seeds from the master seed and its identity, owns
its lattices and RNG streams, and is scheduled on a thread pool (the lattice
kernels release the GIL). Results are sorted by run identity before anything
is aggregated, so outputs do not depend on the thread count.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from analysis import (
    ConfigKind,
    CrossingTracker,
    EnergyCalibration,
    FitResult,
    ThermalizationResult,
    best_fit,
    calibrate_energy,
    fit_exponential,
    fit_log_squared,
    fit_power_law,
    rondeau_lifetime,
    summarize_taus,
    target_energy,
    INITIALIZERS,
)
from config import ExperimentConfig
from drivegen import DriveGenerator, DriveKind, DriveSpec
from dynamics import StepParams, TwinTrajectory, evolve_twin, sample_magnetization
from errors import InvalidArgumentError, UnreachableEnergyError
from spinlattice import derive_seed, perturb_copy

logger = logging.getLogger(__name__)

MIN_RECOMMENDED_SIZE = 3
FIRST_CHUNK = 1 << 10
MAX_CHUNK = 1 << 20


def _freq_key(inverse_period: float) -> str:
    return f"{inverse_period:.12g}"


def _threshold_key(group: Sequence[float]) -> str:
    return ",".join(f"{x:g}" for x in group)


@dataclass(frozen=True)
class RunTask:
    """Identity and parameters of one twin-trajectory thermalization run"""
    drive: DriveSpec
    inverse_period: float
    realization: int
    n_linear: int
    params: StepParams
    initial_state: ConfigKind
    W: float
    delta: float
    thresholds: Tuple[float, ...]
    step_cap: int
    record_every: int
    master_seed: int
    tag: str = ""

    @property
    def sort_key(self) -> Tuple:
        return (self.tag, self.drive.label, self.n_linear, self.inverse_period, self.realization)

    def seeds(self) -> Dict[str, int]:
        ident = (self.tag, self.drive.label, self.n_linear, _freq_key(self.inverse_period), self.realization)
        return {
            "init": derive_seed(self.master_seed, "init", *ident),
            "perturb": derive_seed(self.master_seed, "perturb", *ident),
            "drive": derive_seed(self.master_seed, "drive", *ident),
        }


@dataclass
class RunOutcome:
    task: RunTask
    seeds: Dict[str, int]
    tracker: CrossingTracker
    steps_run: int
    wall_time: float

    def result(self, thresholds: Optional[Sequence[float]] = None) -> ThermalizationResult:
        if self.tracker.n_seen == 0:
            chosen = self.task.thresholds if thresholds is None else tuple(thresholds)
            return ThermalizationResult({x: None for x in chosen}, 0.0, True, 0)
        return self.tracker.result(thresholds)

    def manifest_entry(self, thresholds: Sequence[float]) -> Dict[str, object]:
        res = self.result(thresholds)
        return {
            "tag": self.task.tag,
            "drive": self.task.drive.label,
            "n_linear": self.task.n_linear,
            "inverse_period": self.task.inverse_period,
            "realization": self.task.realization,
            "seeds": self.seeds,
            "steps_run": self.steps_run,
            "censored": res.censored,
            "wall_time_s": round(self.wall_time, 3),
        }


def run_thermalization(task: RunTask) -> RunOutcome:
    """Evolve one twin pair until every tracked threshold is crossed or the step cap is hit"""
    started = time.perf_counter()
    seeds = task.seeds()
    reference = INITIALIZERS[task.initial_state](task.n_linear, task.W, seeds["init"])
    perturbed = perturb_copy(reference, task.delta, seeds["perturb"])
    gen = DriveGenerator(task.drive.with_seed(seeds["drive"]))
    trajectory = TwinTrajectory(reference, perturbed, gen, task.params, task.record_every)
    tracker = CrossingTracker(task.thresholds)

    chunk = max(FIRST_CHUNK, task.record_every)
    while trajectory.step < task.step_cap and not tracker.done:
        n = min(chunk, task.step_cap - trajectory.step)
        steps, d = trajectory.advance(n)
        tracker.update(steps, d)
        chunk = min(chunk * 2, MAX_CHUNK)

    elapsed = time.perf_counter() - started
    if not tracker.done:
        logger.info("run %s 1/T=%g r=%d censored at %d steps",
                    task.drive.label, task.inverse_period, task.realization, trajectory.step)
    return RunOutcome(task, seeds, tracker, trajectory.step, elapsed)


def run_batch(tasks: Sequence, worker: Callable, threads: int = 1, progress: bool = False,
              desc: str = "runs") -> List:
    """Run `worker` over `tasks` on a thread pool; results come back in task order"""
    if threads <= 1:
        iterator = tqdm(tasks, desc=desc, disable=not progress)
        return [worker(task) for task in iterator]
    results = [None] * len(tasks)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = {pool.submit(worker, task): index for index, task in enumerate(tasks)}
        for future in tqdm(as_completed(futures), total=len(futures), desc=desc, disable=not progress):
            results[futures[future]] = future.result()
    return results


# -- scaling sweeps ----------------------------------------------------------

@dataclass
class SweepResult:
    points: pd.DataFrame
    runs: pd.DataFrame
    fits: Dict[str, Dict[str, object]]
    outcomes: List[RunOutcome]
    warnings: List[str] = field(default_factory=list)


def sweep_tasks(config: ExperimentConfig, drives: Sequence[DriveSpec], inverse_periods: Sequence[float],
                h: Optional[float] = None, initial_state: Optional[ConfigKind] = None,
                W: Optional[float] = None, n_linear: Optional[int] = None, tag: str = "") -> List[RunTask]:
    state = ConfigKind(config.initial_state) if initial_state is None else initial_state
    tasks = []
    for spec in drives:
        for inv in inverse_periods:
            for r in range(config.realizations_for(spec)):
                tasks.append(RunTask(
                    drive=spec,
                    inverse_period=float(inv),
                    realization=r,
                    n_linear=config.n_linear if n_linear is None else n_linear,
                    params=config.step_params(inv, h),
                    initial_state=state,
                    W=config.W if W is None else W,
                    delta=config.delta,
                    thresholds=tuple(config.all_thresholds()),
                    step_cap=config.step_cap,
                    record_every=config.record_every_for(spec),
                    master_seed=config.master_seed,
                    tag=tag,
                ))
    return sorted(tasks, key=lambda t: t.sort_key)


def _group_outcomes(outcomes: Sequence[RunOutcome]) -> Dict[Tuple, List[RunOutcome]]:
    groups: Dict[Tuple, List[RunOutcome]] = {}
    for outcome in outcomes:
        t = outcome.task
        groups.setdefault((t.drive.label, t.n_linear, t.inverse_period), []).append(outcome)
    return groups


def aggregate_points(outcomes: Sequence[RunOutcome], thresholds: Sequence[float],
                     warnings: List[str]) -> pd.DataFrame:
    """Mean and standard error of tau_th per (drive, N, 1/T); all-censored rows are dropped"""
    rows = []
    for (label, n_linear, inv), group in sorted(_group_outcomes(outcomes).items()):
        summary = summarize_taus([o.result(thresholds) for o in group])
        if not summary.usable:
            warnings.append(f"{label} N={n_linear} 1/T={inv:g}: all {len(group)} runs censored, row dropped")
            continue
        rows.append({
            "drive": label,
            "order": group[0].task.drive.order if group[0].task.drive.kind is DriveKind.RMD else -1,
            "n_linear": n_linear,
            "inverse_period": inv,
            "T": 1.0 / inv,
            "tau_mean": summary.mean,
            "tau_stderr": summary.stderr,
            "n_used": summary.n_used,
            "n_censored": summary.n_censored,
        })
    columns = ["drive", "order", "n_linear", "inverse_period", "T", "tau_mean", "tau_stderr", "n_used", "n_censored"]
    return pd.DataFrame(rows, columns=columns)


def runs_frame(outcomes: Sequence[RunOutcome], thresholds: Sequence[float]) -> pd.DataFrame:
    rows = []
    for o in outcomes:
        res = o.result(thresholds)
        row = {
            "drive": o.task.drive.label,
            "n_linear": o.task.n_linear,
            "inverse_period": o.task.inverse_period,
            "realization": o.task.realization,
            "init_seed": o.seeds["init"],
            "drive_seed": o.seeds["drive"],
            "steps_run": o.steps_run,
        }
        row.update(res.to_dict())
        rows.append(row)
    return pd.DataFrame(rows)


def _safe_fit(fitter: Callable, points, *args) -> Tuple[Optional[FitResult], Optional[str]]:
    try:
        return fitter(points, *args), None
    except InvalidArgumentError as e:
        return None, str(e)


def fit_drive(spec: DriveSpec, points: pd.DataFrame, g: float) -> Dict[str, object]:
    """Power-law and exponential fits (plus log-squared for Thue-Morse) with a residual comparison"""
    pts = list(zip(points["inverse_period"], points["tau_mean"]))
    entry: Dict[str, object] = {"n_points": len(pts)}
    fitters = [("power_law", fit_power_law, ()), ("exponential", fit_exponential, ())]
    if spec.kind is DriveKind.THUE_MORSE:
        fitters.append(("log_squared", fit_log_squared, (g,)))
    fits = []
    for name, fitter, args in fitters:
        fit, error = _safe_fit(fitter, pts, *args)
        if fit is None:
            entry[name] = {"error": error}
        else:
            entry[name] = fit.to_dict()
            fits.append(fit)
    if fits:
        entry["preferred"] = best_fit(fits).model.value
    if spec.kind is DriveKind.RMD:
        entry["expected_alpha"] = 2 * spec.order + 2
    return entry


def scaling_sweep(config: ExperimentConfig, h: Optional[float] = None, initial_state: Optional[ConfigKind] = None,
                  W: Optional[float] = None, tag: str = "", progress: bool = False) -> SweepResult:
    drives = config.drive_specs()
    tasks = sweep_tasks(config, drives, config.inverse_periods, h=h, initial_state=initial_state, W=W, tag=tag)
    logger.info("sweep %s: %d runs over %d drives", tag or "main", len(tasks), len(drives))
    outcomes = run_batch(tasks, run_thermalization, config.threads, progress, desc=f"sweep {tag}".strip())

    warnings: List[str] = []
    points = aggregate_points(outcomes, config.thresholds, warnings)
    g_eff = config.g * config.field_scale
    fits: Dict[str, Dict[str, object]] = {}
    for spec in drives:
        entry = fit_drive(spec, points[points["drive"] == spec.label], g_eff)
        robustness = {}
        for group in config.extra_threshold_sets:
            alt_points = aggregate_points([o for o in outcomes if o.task.drive == spec], group, [])
            pts = list(zip(alt_points["inverse_period"], alt_points["tau_mean"]))
            fit, error = _safe_fit(fit_power_law, pts)
            robustness[_threshold_key(group)] = (
                {"alpha": fit.params["alpha"], "alpha_stderr": fit.slope_stderr, "n_points": fit.n_points}
                if fit else {"error": error})
        entry["threshold_robustness"] = robustness
        fits[spec.label] = entry
        for name in ("power_law", "exponential"):
            if "error" in entry[name]:
                warnings.append(f"{spec.label}: {name} fit skipped ({entry[name]['error']})")
    for w in warnings:
        logger.warning(w)
    return SweepResult(points, runs_frame(outcomes, config.thresholds), fits, outcomes, warnings)


# -- phase diagram -----------------------------------------------------------

def calibrate_both(config: ExperimentConfig, progress: bool = False) -> Dict[ConfigKind, EnergyCalibration]:
    kinds = [ConfigKind.NEEL, ConfigKind.POLARIZED]
    g_eff = config.g * config.field_scale
    h_eff = config.h * config.field_scale

    def work(kind):
        return calibrate_energy(kind, config.calibration_W_grid, config.n_linear,
                                config.calibration_realizations, config.master_seed, g_eff, h_eff)

    results = run_batch(kinds, work, min(config.threads, 2), progress, desc="calibration")
    return dict(zip(kinds, results))


@dataclass
class PhaseDiagramResult:
    alpha: pd.DataFrame
    tau: pd.DataFrame
    outcomes: List[RunOutcome]
    warnings: List[str]


def phase_diagram(config: ExperimentConfig, calibrations: Dict[ConfigKind, EnergyCalibration],
                  progress: bool = False) -> PhaseDiagramResult:
    """Scaling exponent (RMD) or tau_th (other drives) against the initial energy density"""
    alpha_rows, tau_rows, outcomes, warnings = [], [], [], []
    for epsilon in config.target_energies:
        try:
            kind, W = target_energy(list(calibrations.values()), epsilon)
        except UnreachableEnergyError as e:
            warnings.append(f"epsilon={epsilon:g} skipped: {e}")
            continue
        sweep = scaling_sweep(config, initial_state=kind, W=W, tag=f"eps={epsilon:g}", progress=progress)
        outcomes.extend(sweep.outcomes)
        warnings.extend(f"epsilon={epsilon:g}: {w}" for w in sweep.warnings)
        for spec in config.drive_specs():
            points = sweep.points[sweep.points["drive"] == spec.label]
            if spec.kind is DriveKind.RMD:
                fit = sweep.fits[spec.label]["power_law"]
                if "error" in fit:
                    continue
                alpha_rows.append({
                    "epsilon": epsilon, "drive": spec.label, "order": spec.order, "initial_state": kind.value,
                    "W": W, "alpha": fit["params"]["alpha"], "alpha_stderr": fit["slope_stderr"],
                    "n_points": fit["n_points"],
                })
            else:
                for row in points.itertuples(index=False):
                    tau_rows.append({
                        "epsilon": epsilon, "drive": spec.label, "initial_state": kind.value, "W": W,
                        "inverse_period": row.inverse_period, "tau_mean": row.tau_mean,
                        "tau_stderr": row.tau_stderr, "n_used": row.n_used,
                    })
    alpha = pd.DataFrame(alpha_rows, columns=["epsilon", "drive", "order", "initial_state", "W",
                                              "alpha", "alpha_stderr", "n_points"])
    tau = pd.DataFrame(tau_rows, columns=["epsilon", "drive", "initial_state", "W", "inverse_period",
                                          "tau_mean", "tau_stderr", "n_used"])
    return PhaseDiagramResult(alpha, tau, outcomes, warnings)


# -- finite size -------------------------------------------------------------

def finite_size(config: ExperimentConfig, progress: bool = False) -> SweepResult:
    drives = config.drive_specs()
    warnings: List[str] = []
    tasks = []
    for n_linear in sorted(set(config.n_linear_grid)):
        if n_linear < MIN_RECOMMENDED_SIZE:
            warnings.append(f"N={n_linear} is below the recommended minimum {MIN_RECOMMENDED_SIZE}; "
                            "neighbours wrap onto the same sites")
        tasks.extend(sweep_tasks(config, drives, config.finite_size_inverse_periods,
                                 n_linear=n_linear, tag="finite-size"))
    tasks.sort(key=lambda t: t.sort_key)
    outcomes = run_batch(tasks, run_thermalization, config.threads, progress, desc="finite-size")
    points = aggregate_points(outcomes, config.thresholds, warnings)
    for w in warnings:
        logger.warning(w)
    return SweepResult(points, runs_frame(outcomes, config.thresholds), {}, outcomes, warnings)


# -- time rondeau crystal ----------------------------------------------------

@dataclass(frozen=True)
class RondeauTask:
    drive: DriveSpec
    g_tc: float
    realization: int
    params: StepParams
    n_linear: int
    initial_state: ConfigKind
    W: float
    periods: int
    master_seed: int

    @property
    def sort_key(self) -> Tuple:
        return (self.drive.label, self.g_tc, self.realization)


@dataclass
class RondeauOutcome:
    task: RondeauTask
    seeds: Dict[str, int]
    magnetization: np.ndarray
    wall_time: float

    @property
    def order(self) -> np.ndarray:
        """Sign-corrected stroboscopic magnetization (-1)^l <S^z>(4lT)"""
        signs = np.where(np.arange(len(self.magnetization)) % 2 == 0, 1.0, -1.0)
        return signs * self.magnetization


def run_rondeau(task: RondeauTask) -> RondeauOutcome:
    started = time.perf_counter()
    ident = ("rondeau", task.drive.label, f"{task.g_tc:.6g}", task.realization)
    seeds = {
        "init": derive_seed(task.master_seed, "init", *ident),
        "drive": derive_seed(task.master_seed, "drive", *ident),
    }
    lattice = INITIALIZERS[task.initial_state](task.n_linear, task.W, seeds["init"])
    gen = DriveGenerator(task.drive.with_seed(seeds["drive"]))
    series = sample_magnetization(lattice, gen, task.params, task.periods, 4)
    return RondeauOutcome(task, seeds, series, time.perf_counter() - started)


@dataclass
class RondeauResult:
    magnetization: pd.DataFrame
    lifetimes: pd.DataFrame
    long_time: pd.DataFrame
    outcomes: List[RondeauOutcome]


def rondeau(config: ExperimentConfig, progress: bool = False) -> RondeauResult:
    drives = config.drive_specs(config.rondeau_drives)
    g_values = sorted(set(round(v, 10) for v in list(config.g_tc_grid) + [config.g_tc]))
    tasks = []
    for spec in drives:
        for g_tc in g_values:
            for r in range(config.realizations_for(spec)):
                tasks.append(RondeauTask(spec, g_tc, r, config.rondeau_params(g_tc), config.n_linear,
                                         ConfigKind(config.rondeau_state), config.W, config.rondeau_periods,
                                         config.master_seed))
    tasks.sort(key=lambda t: t.sort_key)
    outcomes = run_batch(tasks, run_rondeau, config.threads, progress, desc="rondeau")

    mag_rows, life_rows, long_rows = [], [], []
    for o in outcomes:
        t = o.task
        order = o.order
        life = rondeau_lifetime(order, config.s_cr)
        life_rows.append({"drive": t.drive.label, "g_tc": t.g_tc, "realization": t.realization,
                          "lifetime": life.lifetime, "censored": life.censored})
        long_rows.append({"drive": t.drive.label, "g_tc": t.g_tc, "realization": t.realization,
                          "step": 4 * (len(order) - 1), "magnetization_z": o.magnetization[-1],
                          "order": order[-1]})
        if abs(t.g_tc - config.g_tc) < 1e-12:
            for index, (m, q) in enumerate(zip(o.magnetization, order)):
                mag_rows.append({"drive": t.drive.label, "g_tc": t.g_tc, "realization": t.realization,
                                 "step": 4 * index, "magnetization_z": m, "order": q})
    return RondeauResult(
        pd.DataFrame(mag_rows, columns=["drive", "g_tc", "realization", "step", "magnetization_z", "order"]),
        pd.DataFrame(life_rows, columns=["drive", "g_tc", "realization", "lifetime", "censored"]),
        pd.DataFrame(long_rows, columns=["drive", "g_tc", "realization", "step", "magnetization_z", "order"]),
        outcomes,
    )


# -- single trajectory -------------------------------------------------------

TRAJECTORY_COLUMNS = ["step", "energy_ave_density", "staggered_m", "magnetization_z", "decorrelator"]


def simulate(config: ExperimentConfig) -> Tuple[pd.DataFrame, Dict[str, int], str]:
    """One twin trajectory; returns the CSV frame, the seeds and the label dump (may be empty)"""
    spec = DriveSpec.parse(config.simulate_drive)
    ident = ("simulate", spec.label, config.n_linear, _freq_key(config.simulate_inverse_period))
    seeds = {
        "init": derive_seed(config.master_seed, "init", *ident),
        "perturb": derive_seed(config.master_seed, "perturb", *ident),
        "drive": derive_seed(config.master_seed, "drive", *ident),
    }
    reference = INITIALIZERS[ConfigKind(config.initial_state)](config.n_linear, config.W, seeds["init"])
    perturbed = perturb_copy(reference, config.delta, seeds["perturb"])
    gen = DriveGenerator(spec.with_seed(seeds["drive"]))
    labels = gen.dump(config.dump_labels) if config.dump_labels else ""
    n_steps = min(config.simulate_steps, config.step_cap)
    records = evolve_twin(reference, perturbed, gen, config.step_params(config.simulate_inverse_period),
                          n_steps, config.record_every_for(spec))
    frame = pd.DataFrame([r.as_row() for r in records], columns=TRAJECTORY_COLUMNS)
    return frame, seeds, labels
