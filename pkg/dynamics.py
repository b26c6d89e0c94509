#!/usr/bin/env python3
"""
Dynamics - exact stroboscopic one-period maps for the driven Ising lattice

Over one period of H_x every spin rotates about x by g*T. Over one period of
H_z every spin rotates about z by kappa_ij*T, where kappa_ij is the sum of the
four neighbouring S^z plus h. Since a z-rotation leaves every S^z fixed, all
kappa can be read from the lattice while it is being updated.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np
from numba import njit

from drivegen import DriveGenerator
from errors import InvalidArgumentError
from spinlattice import SpinLattice
import observables

logger = logging.getLogger(__name__)

DEFAULT_STEP_CAP = 10 ** 8
# labels are pulled from the generator in chunks of at most this many steps
CHUNK_STEPS = 1 << 16


@dataclass(frozen=True)
class StepParams:
    """Transverse field g, longitudinal field h and period T"""
    g: float
    h: float
    T: float

    def __post_init__(self):
        if not self.T > 0:
            raise InvalidArgumentError(f"period T must be positive, got {self.T}")

    @property
    def inverse_period(self) -> float:
        return 1.0 / self.T


@dataclass
class EvolutionRecord:
    """Observables at stroboscopic time t = step * T"""
    step: int
    energy_ave_density: float
    staggered_m: float
    magnetization_z: float
    decorrelator: Optional[float] = None

    def as_row(self) -> Dict[str, float]:
        row = {
            "step": self.step,
            "energy_ave_density": self.energy_ave_density,
            "staggered_m": self.staggered_m,
            "magnetization_z": self.magnetization_z,
        }
        if self.decorrelator is not None:
            row["decorrelator"] = self.decorrelator
        return row


# -- kernels -----------------------------------------------------------------

@njit(cache=True, nogil=True)
def _rotate_x(spins, c, s):
    n = spins.shape[0]
    for i in range(n):
        for j in range(n):
            y = spins[i, j, 1]
            z = spins[i, j, 2]
            spins[i, j, 1] = y * c - z * s
            spins[i, j, 2] = y * s + z * c


@njit(cache=True, nogil=True)
def _rotate_z(spins, h, T):
    n = spins.shape[0]
    for i in range(n):
        up = (i - 1) % n
        down = (i + 1) % n
        for j in range(n):
            kappa = (spins[down, j, 2] + spins[up, j, 2]
                     + spins[i, (j + 1) % n, 2] + spins[i, (j - 1) % n, 2] + h)
            angle = kappa * T
            c = np.cos(angle)
            s = np.sin(angle)
            x = spins[i, j, 0]
            y = spins[i, j, 1]
            spins[i, j, 0] = x * c - y * s
            spins[i, j, 1] = x * s + y * c


@njit(cache=True, nogil=True)
def _apply_labels(spins, labels, c, s, h, T):
    for k in range(labels.shape[0]):
        if labels[k] == 0:
            _rotate_z(spins, h, T)
        else:
            _rotate_x(spins, c, s)


@njit(cache=True, nogil=True)
def _decorrelator(a, b):
    n = a.shape[0]
    total = 0.0
    for i in range(n):
        for j in range(n):
            dx = a[i, j, 0] - b[i, j, 0]
            dy = a[i, j, 1] - b[i, j, 1]
            dz = a[i, j, 2] - b[i, j, 2]
            total += dx * dx + dy * dy + dz * dz
    return np.sqrt(total / (n * n))


@njit(cache=True, nogil=True)
def _apply_labels_twin(a, b, labels, c, s, h, T, record_every, phase, out):
    """Evolve both lattices; write d every `record_every` steps into `out`"""
    written = 0
    for k in range(labels.shape[0]):
        if labels[k] == 0:
            _rotate_z(a, h, T)
            _rotate_z(b, h, T)
        else:
            _rotate_x(a, c, s)
            _rotate_x(b, c, s)
        if (phase + k + 1) % record_every == 0:
            out[written] = _decorrelator(a, b)
            written += 1
    return written


@njit(cache=True, nogil=True)
def _apply_labels_sampled(spins, labels, c, s, h, T, stride, phase, out):
    """Evolve one lattice; write the mean S^z every `stride` steps into `out`"""
    n = spins.shape[0]
    written = 0
    for k in range(labels.shape[0]):
        if labels[k] == 0:
            _rotate_z(spins, h, T)
        else:
            _rotate_x(spins, c, s)
        if (phase + k + 1) % stride == 0:
            out[written] = np.sum(spins[:, :, 2]) / (n * n)
            written += 1
    return written


# -- public operations -------------------------------------------------------

def kappa(lattice: SpinLattice, i: int, j: int, h: float) -> float:
    """Effective z-field at site (i, j): four neighbouring S^z plus h"""
    n = lattice.n_linear
    if not (0 <= i < n and 0 <= j < n):
        raise InvalidArgumentError(f"site ({i}, {j}) outside {n}x{n} lattice")
    sz = lattice.sz
    return float(sz[(i + 1) % n, j] + sz[(i - 1) % n, j] + sz[i, (j + 1) % n] + sz[i, (j - 1) % n] + h)


def kappa_field(lattice: SpinLattice, h: float) -> np.ndarray:
    sz = lattice.sz
    return (np.roll(sz, 1, axis=0) + np.roll(sz, -1, axis=0)
            + np.roll(sz, 1, axis=1) + np.roll(sz, -1, axis=1) + h)


def apply_x_step(lattice: SpinLattice, params: StepParams) -> SpinLattice:
    """One H_x period: rotate every spin about x by g*T (returns a new lattice)"""
    out = lattice.copy()
    angle = params.g * params.T
    _rotate_x(out.spins, np.cos(angle), np.sin(angle))
    return out


def apply_z_step(lattice: SpinLattice, params: StepParams) -> SpinLattice:
    """One H_z period: rotate (x, y) of every spin about z by kappa_ij*T (returns a new lattice)"""
    out = lattice.copy()
    _rotate_z(out.spins, params.h, params.T)
    return out


def apply_labels(lattice: SpinLattice, labels: np.ndarray, params: StepParams) -> None:
    """Apply a label array to `lattice` in place"""
    angle = params.g * params.T
    _apply_labels(lattice.spins, np.ascontiguousarray(labels, dtype=np.uint8),
                  np.cos(angle), np.sin(angle), params.h, params.T)


def snapshot(step: int, lattice: SpinLattice, params: StepParams,
             perturbed: Optional[SpinLattice] = None) -> EvolutionRecord:
    obs = observables.measure(lattice, params.g, params.h, perturbed)
    return EvolutionRecord(
        step=step,
        energy_ave_density=obs.energy_ave_density,
        staggered_m=obs.staggered_m,
        magnetization_z=obs.magnetization_z,
        decorrelator=obs.decorrelator,
    )


def _check_run_args(n_steps: int, record_every: int):
    if n_steps < 0:
        raise InvalidArgumentError(f"n_steps must be >= 0, got {n_steps}")
    if record_every < 1:
        raise InvalidArgumentError(f"record_every must be >= 1, got {record_every}")


def evolve(lattice: SpinLattice, gen: DriveGenerator, params: StepParams,
           n_steps: int, record_every: int = 1) -> List[EvolutionRecord]:
    """
    Drive `lattice` in place for n_steps periods.

    Observables are recorded after every `record_every` steps (no record at
    step 0), so n_steps = 0 gives an empty list and leaves the lattice as is.
    """
    _check_run_args(n_steps, record_every)
    records = []
    done = 0
    while done < n_steps:
        chunk = min(record_every - done % record_every, n_steps - done)
        apply_labels(lattice, gen.take(chunk), params)
        done += chunk
        if done % record_every == 0:
            records.append(snapshot(done, lattice, params))
    return records


def evolve_twin(reference: SpinLattice, perturbed: SpinLattice, gen: DriveGenerator,
                params: StepParams, n_steps: int, record_every: int = 1) -> List[EvolutionRecord]:
    """Drive both lattices in place with one shared label stream; records carry the decorrelator"""
    if reference.n_linear != perturbed.n_linear:
        raise InvalidArgumentError(
            f"twin lattices differ in size: {reference.n_linear} vs {perturbed.n_linear}")
    _check_run_args(n_steps, record_every)
    records = []
    done = 0
    while done < n_steps:
        chunk = min(record_every - done % record_every, n_steps - done)
        labels = gen.take(chunk)
        apply_labels(reference, labels, params)
        apply_labels(perturbed, labels, params)
        done += chunk
        if done % record_every == 0:
            records.append(snapshot(done, reference, params, perturbed))
    return records


class TwinTrajectory:
    """
    Reference and perturbed lattices sharing one label stream.

    `advance` runs entirely inside the twin kernel and only returns the
    decorrelator series, which keeps long thermalization runs cheap.
    """

    def __init__(self, reference: SpinLattice, perturbed: SpinLattice,
                 gen: DriveGenerator, params: StepParams, record_every: int = 1):
        if reference.n_linear != perturbed.n_linear:
            raise InvalidArgumentError(
                f"twin lattices differ in size: {reference.n_linear} vs {perturbed.n_linear}")
        if record_every < 1:
            raise InvalidArgumentError(f"record_every must be >= 1, got {record_every}")
        self.reference = reference
        self.perturbed = perturbed
        self.gen = gen
        self.params = params
        self.record_every = record_every
        self.step = 0
        angle = params.g * params.T
        self._c = np.cos(angle)
        self._s = np.sin(angle)

    def advance(self, n_steps: int):
        """Run n_steps more periods; returns (steps, d) arrays at the recorded steps"""
        if n_steps < 0:
            raise InvalidArgumentError(f"n_steps must be >= 0, got {n_steps}")
        steps_out = []
        d_out = []
        remaining = n_steps
        while remaining > 0:
            chunk = min(remaining, CHUNK_STEPS)
            labels = self.gen.take(chunk)
            buf = np.empty(chunk // self.record_every + 1)
            phase = self.step % self.record_every
            written = _apply_labels_twin(self.reference.spins, self.perturbed.spins, labels,
                                         self._c, self._s, self.params.h, self.params.T,
                                         self.record_every, phase, buf)
            first = self.step + (self.record_every - phase)
            steps_out.append(first + self.record_every * np.arange(written, dtype=np.int64))
            d_out.append(buf[:written])
            self.step += chunk
            remaining -= chunk
        if not steps_out:
            return np.empty(0, dtype=np.int64), np.empty(0)
        return np.concatenate(steps_out), np.concatenate(d_out)

    def current_record(self) -> EvolutionRecord:
        return snapshot(self.step, self.reference, self.params, self.perturbed)


def sample_magnetization(lattice: SpinLattice, gen: DriveGenerator, params: StepParams,
                         n_steps: int, stride: int) -> np.ndarray:
    """
    Drive `lattice` in place and return <S^z> at steps 0, stride, 2*stride, ...

    Element l of the result is the magnetization at t = l * stride * T.
    """
    _check_run_args(n_steps, stride)
    angle = params.g * params.T
    c, s = np.cos(angle), np.sin(angle)
    samples = [np.array([np.mean(lattice.sz)])]
    done = 0
    while done < n_steps:
        chunk = min(n_steps - done, CHUNK_STEPS)
        buf = np.empty(chunk // stride + 1)
        written = _apply_labels_sampled(lattice.spins, gen.take(chunk), c, s, params.h, params.T,
                                        stride, done % stride, buf)
        samples.append(buf[:written])
        done += chunk
    return np.concatenate(samples)
