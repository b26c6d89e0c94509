#!/usr/bin/env python3
"""
Analysis - thermalization times, scaling-law fits, initial-energy calibration
and time-rondeau-crystal lifetimes
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats

from errors import InvalidArgumentError, UnreachableEnergyError
from observables import D_INFINITY, energy_ave_density
from spinlattice import derive_seed, init_neel, init_polarized

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLDS = (0.90, 0.89, 0.88)
# calibrated endpoints carry trig round-off of order 1e-16 per site
CALIBRATION_TOL = 1e-9
NOISE_SIGMAS = 3.0
RONDEAU_STRIDE = 4
DEFAULT_S_CR = 0.25


# -- thermalization time -----------------------------------------------------

@dataclass
class ThermalizationResult:
    """
    First-crossing times of d/d_inf for each threshold.

    When `censored` is set, at least one threshold was never reached and
    `tau_th` is only a lower bound: the last observed step.
    """
    crossing_times: Dict[float, Optional[int]]
    tau_th: float
    censored: bool
    last_step: int = 0

    def to_dict(self) -> Dict[str, object]:
        row = {"tau_th": self.tau_th, "censored": self.censored, "last_step": self.last_step}
        for x, t in sorted(self.crossing_times.items(), reverse=True):
            row[f"crossing_{x:g}"] = t
        return row


class CrossingTracker:
    """Streaming first-crossing detector fed chunk by chunk"""

    def __init__(self, thresholds: Iterable[float] = DEFAULT_THRESHOLDS, d_inf: float = D_INFINITY):
        thresholds = tuple(sorted(set(float(x) for x in thresholds), reverse=True))
        if not thresholds:
            raise InvalidArgumentError("at least one threshold is required")
        for x in thresholds:
            if not 0.0 < x < 1.0:
                raise InvalidArgumentError(f"thresholds must lie in (0, 1), got {x}")
        if not d_inf > 0:
            raise InvalidArgumentError(f"d_inf must be positive, got {d_inf}")
        self.thresholds = thresholds
        self.d_inf = d_inf
        self.crossings: Dict[float, Optional[int]] = {x: None for x in thresholds}
        self.last_step = 0
        self.n_seen = 0

    @property
    def done(self) -> bool:
        return all(t is not None for t in self.crossings.values())

    def update(self, steps: np.ndarray, d: np.ndarray) -> bool:
        steps = np.asarray(steps)
        d = np.asarray(d, dtype=np.float64)
        if len(steps) == 0:
            return self.done
        for x in self.thresholds:
            if self.crossings[x] is not None:
                continue
            hits = np.flatnonzero(d >= x * self.d_inf)
            if len(hits):
                self.crossings[x] = int(steps[hits[0]])
        self.last_step = int(steps[-1])
        self.n_seen += len(steps)
        return self.done

    def result(self, thresholds: Optional[Iterable[float]] = None) -> ThermalizationResult:
        """Result for `thresholds` (a subset of the tracked ones, default all)"""
        if self.n_seen == 0:
            raise InvalidArgumentError("decorrelator series is empty")
        chosen = self.thresholds if thresholds is None else tuple(float(x) for x in thresholds)
        crossings = {}
        for x in chosen:
            if x not in self.crossings:
                raise InvalidArgumentError(f"threshold {x} was not tracked")
            crossings[x] = self.crossings[x]
        censored = any(t is None for t in crossings.values())
        if censored:
            tau = float(self.last_step)
        else:
            tau = float(np.mean(list(crossings.values())))
        return ThermalizationResult(crossings, tau, censored, self.last_step)


def extract_tau(d_series: Union[Sequence[Tuple[int, float]], np.ndarray], d_inf: float = D_INFINITY,
                thresholds: Iterable[float] = DEFAULT_THRESHOLDS) -> ThermalizationResult:
    """tau_th = mean of the first steps at which d/d_inf reaches each threshold"""
    data = np.asarray(d_series, dtype=np.float64)
    if data.size == 0:
        raise InvalidArgumentError("decorrelator series is empty")
    if data.ndim != 2 or data.shape[1] != 2:
        raise InvalidArgumentError(f"expected (step, d) pairs, got array of shape {data.shape}")
    tracker = CrossingTracker(thresholds, d_inf)
    tracker.update(data[:, 0].astype(np.int64), data[:, 1])
    return tracker.result()


@dataclass
class TauSummary:
    """tau_th statistics over realizations; censored runs are excluded"""
    mean: float
    stderr: float
    n_used: int
    n_censored: int

    @property
    def usable(self) -> bool:
        return self.n_used > 0


def summarize_taus(results: Sequence[ThermalizationResult]) -> TauSummary:
    taus = np.array([r.tau_th for r in results if not r.censored], dtype=np.float64)
    n_censored = sum(1 for r in results if r.censored)
    if len(taus) == 0:
        return TauSummary(float("nan"), float("nan"), 0, n_censored)
    stderr = float(np.std(taus, ddof=1) / np.sqrt(len(taus))) if len(taus) > 1 else 0.0
    return TauSummary(float(np.mean(taus)), stderr, len(taus), n_censored)


# -- scaling fits ------------------------------------------------------------

class FitModel(Enum):
    POWER_LAW = "power_law"
    EXPONENTIAL = "exponential"
    LOG_SQUARED = "log_squared"


@dataclass
class FitResult:
    """
    Straight-line fit of log(tau) against a model-specific abscissa.

    params: power_law -> alpha, prefactor; exponential -> beta, A;
    log_squared -> C, prefactor. residual_sum is in log space.
    """
    model: FitModel
    params: Dict[str, float]
    r_squared: float
    residual_sum: float
    slope_stderr: float
    n_points: int

    def to_dict(self) -> Dict[str, object]:
        return {
            "model": self.model.value,
            "params": dict(self.params),
            "r_squared": self.r_squared,
            "residual_sum": self.residual_sum,
            "slope_stderr": self.slope_stderr,
            "n_points": self.n_points,
        }


def _as_points(points) -> Tuple[np.ndarray, np.ndarray]:
    data = np.asarray(list(points), dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != 2:
        raise InvalidArgumentError("points must be (1/T, tau_th) pairs")
    if len(data) < 3:
        raise InvalidArgumentError(f"at least 3 points are required for a fit, got {len(data)}")
    if not np.all(np.isfinite(data)):
        raise InvalidArgumentError("points contain non-finite values")
    if np.any(data <= 0):
        raise InvalidArgumentError("1/T and tau_th must be positive")
    return data[:, 0], data[:, 1]


def _line_fit(model: FitModel, x: np.ndarray, log_tau: np.ndarray) -> Tuple[float, float, float, float, float]:
    if np.ptp(x) == 0:
        raise InvalidArgumentError("fit abscissae are all identical")
    reg = stats.linregress(x, log_tau)
    residuals = log_tau - (reg.intercept + reg.slope * x)
    ss_res = float(np.sum(residuals ** 2))
    ss_tot = float(np.sum((log_tau - log_tau.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    stderr = float(reg.stderr)
    logger.debug("%s fit: slope=%g intercept=%g ss_res=%g", model.value, reg.slope, reg.intercept, ss_res)
    return float(reg.slope), float(reg.intercept), r_squared, ss_res, stderr


def fit_power_law(points) -> FitResult:
    """tau = prefactor * (1/T)^alpha, fitted on log-log axes"""
    inv_t, tau = _as_points(points)
    slope, intercept, r2, ss_res, stderr = _line_fit(FitModel.POWER_LAW, np.log(inv_t), np.log(tau))
    return FitResult(FitModel.POWER_LAW, {"alpha": slope, "prefactor": float(np.exp(intercept))},
                     r2, ss_res, stderr, len(tau))


def fit_exponential(points) -> FitResult:
    """tau = A * exp(beta / T)"""
    inv_t, tau = _as_points(points)
    slope, intercept, r2, ss_res, stderr = _line_fit(FitModel.EXPONENTIAL, inv_t, np.log(tau))
    return FitResult(FitModel.EXPONENTIAL, {"beta": slope, "A": float(np.exp(intercept))},
                     r2, ss_res, stderr, len(tau))


def fit_log_squared(points, g: float) -> FitResult:
    """tau = prefactor * exp(C * ln((1/T) / g)^2); requires every 1/T > g"""
    inv_t, tau = _as_points(points)
    if g <= 0:
        raise InvalidArgumentError(f"g must be positive for the log-squared model, got {g}")
    if np.any(inv_t <= g):
        raise InvalidArgumentError(f"every 1/T must exceed g = {g} for the log-squared model")
    x = np.log(inv_t / g) ** 2
    slope, intercept, r2, ss_res, stderr = _line_fit(FitModel.LOG_SQUARED, x, np.log(tau))
    return FitResult(FitModel.LOG_SQUARED, {"C": slope, "prefactor": float(np.exp(intercept))},
                     r2, ss_res, stderr, len(tau))


def best_fit(fits: Sequence[FitResult]) -> FitResult:
    """Lowest log-space residual sum wins"""
    if not fits:
        raise InvalidArgumentError("no fits to compare")
    return min(fits, key=lambda f: f.residual_sum)


# -- initial-energy calibration ----------------------------------------------

class ConfigKind(Enum):
    NEEL = "neel"
    POLARIZED = "polarized"


INITIALIZERS = {ConfigKind.NEEL: init_neel, ConfigKind.POLARIZED: init_polarized}


@dataclass
class EnergyCalibration:
    """Mean and spread of the initial energy density as a function of W"""
    config_kind: ConfigKind
    table: List[Tuple[float, float, float]]
    realizations: int
    monotone: bool = field(default=True)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.table, columns=["W", "energy_density", "std"])

    @classmethod
    def from_frame(cls, kind: ConfigKind, frame: pd.DataFrame, realizations: int) -> "EnergyCalibration":
        table = [(float(w), float(e), float(s)) for w, e, s in frame[["W", "energy_density", "std"]].itertuples(index=False)]
        return cls(kind, table, realizations, _monotone_prefix(kind, table, realizations) == len(table))

    def monotone_table(self) -> List[Tuple[float, float, float]]:
        return self.table[:_monotone_prefix(self.config_kind, self.table, self.realizations)]

    def energy_range(self) -> Tuple[float, float]:
        energies = [e for _, e, _ in self.monotone_table()]
        return min(energies), max(energies)

    def slack(self) -> float:
        """How far outside the range a target may sit and still be clamped onto it"""
        worst = max(s for _, _, s in self.monotone_table())
        return max(CALIBRATION_TOL, NOISE_SIGMAS * worst / np.sqrt(self.realizations))

    def interpolation_rows(self) -> Tuple[np.ndarray, np.ndarray]:
        """(W, energy) with energy strictly increasing; noisy steps are skipped"""
        sign = 1.0 if self.config_kind is ConfigKind.NEEL else -1.0
        ws, es = [], []
        for w, e, _ in self.monotone_table():
            if not es or sign * (e - es[-1]) > 0:
                ws.append(w)
                es.append(e)
        ws, es = np.array(ws), np.array(es)
        return (ws, es) if sign > 0 else (ws[::-1], es[::-1])

    def large_w_end(self) -> Tuple[float, float]:
        """(W, energy) of the calibrated point closest to zero energy"""
        ws, es = self.interpolation_rows()
        k = -1 if self.config_kind is ConfigKind.NEEL else 0
        return float(ws[k]), float(es[k])


def _monotone_prefix(kind: ConfigKind, table: Sequence[Tuple[float, float, float]], realizations: int) -> int:
    # Neel energies rise with W, polarized energies fall; steps inside the
    # sampling noise of the two means do not count as a reversal
    sign = 1.0 if kind is ConfigKind.NEEL else -1.0
    end = 1
    while end < len(table):
        (_, e0, s0), (_, e1, s1) = table[end - 1], table[end]
        noise = NOISE_SIGMAS * np.hypot(s0, s1) / np.sqrt(max(realizations, 1))
        if not sign * (e1 - e0) > -noise:
            break
        end += 1
    return end


def calibrate_energy(kind: ConfigKind, W_grid: Sequence[float], n_linear: int, realizations: int,
                     seed: int, g: float, h: float) -> EnergyCalibration:
    """Average energy_ave density over `realizations` lattices for every W"""
    if realizations < 1:
        raise InvalidArgumentError(f"realizations must be >= 1, got {realizations}")
    if len(W_grid) == 0:
        raise InvalidArgumentError("W_grid is empty")
    kind = ConfigKind(kind)
    init = INITIALIZERS[kind]
    table = []
    for W in sorted(float(w) for w in W_grid):
        energies = np.array([
            energy_ave_density(init(n_linear, W, derive_seed(seed, "calibration", kind.value, f"{W:.12g}", r)), g, h)
            for r in range(realizations)
        ])
        std = float(np.std(energies, ddof=1)) if realizations > 1 else 0.0
        table.append((W, float(np.mean(energies)), std))
    prefix = _monotone_prefix(kind, table, realizations)
    if prefix < len(table):
        logger.warning("%s calibration is monotone only up to W=%g", kind.value, table[prefix - 1][0])
    return EnergyCalibration(kind, table, realizations, prefix == len(table))


def target_energy(calibrations: Union[EnergyCalibration, Sequence[EnergyCalibration]],
                  epsilon: float) -> Tuple[ConfigKind, float]:
    """
    Invert a calibration: which initial state and W give energy density epsilon.

    Negative targets use the Neel table, positive ones the polarized table;
    zero tries Neel first. Interpolation is piecewise linear over the
    monotone part of the table; targets within the sampling slack of a range
    end are clamped onto it. A target in the gap between the Neel maximum and
    the polarized minimum maps to the large-W end of the nearer table.
    """
    if isinstance(calibrations, EnergyCalibration):
        calibrations = [calibrations]
    by_kind = {c.config_kind: c for c in calibrations}
    order = [ConfigKind.POLARIZED] if epsilon > 0 else [ConfigKind.NEEL]
    if epsilon == 0:
        order.append(ConfigKind.POLARIZED)

    for kind in order:
        cal = by_kind.get(kind)
        if cal is None:
            continue
        ws, es = cal.interpolation_rows()
        lo, hi = es[0], es[-1]
        slack = cal.slack()
        if not (lo - slack <= epsilon <= hi + slack):
            continue
        if len(ws) == 1:
            return kind, float(ws[0])
        return kind, float(np.interp(min(max(epsilon, lo), hi), es, ws))

    neel, polarized = by_kind.get(ConfigKind.NEEL), by_kind.get(ConfigKind.POLARIZED)
    if neel is not None and polarized is not None:
        (w_neel, top), (w_pol, bottom) = neel.large_w_end(), polarized.large_w_end()
        if top < epsilon < bottom:
            kind, W, reached = ((ConfigKind.NEEL, w_neel, top) if epsilon - top <= bottom - epsilon
                                else (ConfigKind.POLARIZED, w_pol, bottom))
            logger.warning("energy density %g lies between the calibrated ranges; using %s at W=%g (%.4g)",
                           epsilon, kind.value, W, reached)
            return kind, W

    raise UnreachableEnergyError(f"energy density {epsilon} is outside every calibrated range")


# -- time rondeau crystal ----------------------------------------------------

@dataclass
class RondeauLifetime:
    """Periods until the stroboscopic order drops below s_cr (lower bound if censored)"""
    lifetime: int
    censored: bool


def rondeau_lifetime(series: Sequence[float], s_cr: float = DEFAULT_S_CR,
                     stride: int = RONDEAU_STRIDE) -> RondeauLifetime:
    """
    `series[l]` is the order parameter at t = stride * l * T, starting at l = 0.

    Lifetime is stride * (first l with series[l] < s_cr).
    """
    values = np.asarray(series, dtype=np.float64)
    if values.size == 0:
        raise InvalidArgumentError("magnetization series is empty")
    below = np.flatnonzero(values < s_cr)
    if len(below) == 0:
        return RondeauLifetime(stride * (len(values) - 1), True)
    return RondeauLifetime(stride * int(below[0]), False)
