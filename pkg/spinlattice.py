#!/usr/bin/env python3
"""
Spin Lattice - classical unit-vector spins on an N x N square lattice
Builds Neel, polarized and infinite-temperature states and perturbed twins
"""

import hashlib
import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Tuple

import numpy as np

from errors import InvalidArgumentError

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
# phi is undefined at the poles; below this sin(theta) it is pinned to 0
POLE_EPS = 1e-14


class Spin3(NamedTuple):
    """A single classical spin (x, y, z) on the unit sphere"""
    x: float
    y: float
    z: float

    def norm(self) -> float:
        return float(np.sqrt(self.x * self.x + self.y * self.y + self.z * self.z))


@dataclass(frozen=True)
class AngleParams:
    """Polar/azimuthal parametrization of a spin"""
    theta: float
    phi: float

    def to_spin(self) -> Spin3:
        s = np.sin(self.theta)
        return Spin3(float(s * np.cos(self.phi)), float(s * np.sin(self.phi)), float(np.cos(self.theta)))


@dataclass
class SpinLattice:
    """
    Spin configuration with periodic boundaries in both directions.

    `spins` has shape (N, N, 3) in row-major order, so spins[i, j] is the
    vector at site (i, j). The dynamics kernels update this array in place.
    """
    n_linear: int
    spins: np.ndarray
    boundary: str = field(default="periodic")

    def __post_init__(self):
        if self.n_linear < 1:
            raise InvalidArgumentError(f"n_linear must be positive, got {self.n_linear}")
        expected = (self.n_linear, self.n_linear, 3)
        if self.spins.shape != expected:
            raise InvalidArgumentError(f"spins must have shape {expected}, got {self.spins.shape}")
        if self.boundary != "periodic":
            raise InvalidArgumentError(f"only periodic boundaries are supported, got {self.boundary!r}")
        self.spins = np.ascontiguousarray(self.spins, dtype=np.float64)

    @property
    def n_sites(self) -> int:
        return self.n_linear * self.n_linear

    @property
    def sz(self) -> np.ndarray:
        return self.spins[:, :, 2]

    def spin(self, i: int, j: int) -> Spin3:
        x, y, z = self.spins[i, j]
        return Spin3(float(x), float(y), float(z))

    def copy(self) -> "SpinLattice":
        return SpinLattice(self.n_linear, self.spins.copy())

    def max_norm_error(self) -> float:
        """Largest deviation of any |S| from 1"""
        return float(np.max(np.abs(np.linalg.norm(self.spins, axis=2) - 1.0)))

    def angles(self) -> Tuple[np.ndarray, np.ndarray]:
        """Recover (theta, phi) grids; phi = 0 wherever the spin sits on a pole"""
        x, y, z = self.spins[:, :, 0], self.spins[:, :, 1], self.spins[:, :, 2]
        rho = np.hypot(x, y)
        theta = np.arctan2(rho, z)
        phi = np.where(rho < POLE_EPS, 0.0, np.arctan2(y, x))
        return theta, phi


def sublattice_sign(n_linear: int) -> np.ndarray:
    """(-1)^(i+j) as a float grid"""
    idx = np.arange(n_linear)
    return np.where((idx[:, None] + idx[None, :]) % 2 == 0, 1.0, -1.0)


def from_angles(theta_grid: np.ndarray, phi_grid: np.ndarray) -> SpinLattice:
    """Build a lattice from N x N grids of polar and azimuthal angles"""
    theta_grid = np.asarray(theta_grid, dtype=np.float64)
    phi_grid = np.asarray(phi_grid, dtype=np.float64)
    if theta_grid.shape != phi_grid.shape:
        raise InvalidArgumentError(f"angle grids differ in shape: {theta_grid.shape} vs {phi_grid.shape}")
    if theta_grid.ndim != 2 or theta_grid.shape[0] != theta_grid.shape[1]:
        raise InvalidArgumentError(f"angle grids must be square N x N, got {theta_grid.shape}")

    sin_theta = np.sin(theta_grid)
    spins = np.stack(
        [sin_theta * np.cos(phi_grid), sin_theta * np.sin(phi_grid), np.cos(theta_grid)],
        axis=-1,
    )
    return SpinLattice(theta_grid.shape[0], spins)


def _check_init_args(n_linear: int, W: float):
    if n_linear < 2:
        raise InvalidArgumentError(f"n_linear must be >= 2, got {n_linear}")
    if W < 0:
        raise InvalidArgumentError(f"W must be non-negative, got {W}")


def _draw_angles(n_linear: int, W: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    # Whole-grid draws in row-major site order: the value at a site depends
    # only on (seed, site index).
    rng = np.random.default_rng(seed)
    theta = rng.normal(0.0, TWO_PI * W, size=(n_linear, n_linear))
    phi = rng.uniform(0.0, TWO_PI, size=(n_linear, n_linear))
    return theta, phi


def init_neel(n_linear: int, W: float, seed: int) -> SpinLattice:
    """
    Neel state along z with Gaussian angular noise of width 2*pi*W.

    Sites with (i + j) odd use theta' = pi - theta, so both sublattices see
    identical noise statistics.
    """
    _check_init_args(n_linear, W)
    theta, phi = _draw_angles(n_linear, W, seed)
    theta = np.where(sublattice_sign(n_linear) > 0, theta, np.pi - theta)
    lattice = from_angles(theta, phi)
    logger.debug("Neel lattice N=%d W=%g seed=%d", n_linear, W, seed)
    return lattice


def init_polarized(n_linear: int, W: float, seed: int) -> SpinLattice:
    """All spins around +z with Gaussian angular noise of width 2*pi*W"""
    _check_init_args(n_linear, W)
    theta, phi = _draw_angles(n_linear, W, seed)
    lattice = from_angles(theta, phi)
    logger.debug("polarized lattice N=%d W=%g seed=%d", n_linear, W, seed)
    return lattice


def init_random(n_linear: int, seed: int) -> SpinLattice:
    """Spins drawn uniformly on the sphere (infinite-temperature state)"""
    if n_linear < 1:
        raise InvalidArgumentError(f"n_linear must be positive, got {n_linear}")
    rng = np.random.default_rng(seed)
    cos_theta = rng.uniform(-1.0, 1.0, size=(n_linear, n_linear))
    phi = rng.uniform(0.0, TWO_PI, size=(n_linear, n_linear))
    return from_angles(np.arccos(cos_theta), phi)


def perturb_copy(source: SpinLattice, delta_scale: float, seed: int) -> SpinLattice:
    """
    Twin of `source` with 2*pi*delta_scale*delta added to both angles.

    One standard normal delta is drawn per site and shared by theta and phi.
    The source lattice is left untouched.
    """
    if delta_scale == 0:
        return source.copy()
    theta, phi = source.angles()
    rng = np.random.default_rng(seed)
    delta = rng.standard_normal(size=theta.shape)
    kick = TWO_PI * delta_scale * delta
    return from_angles(theta + kick, phi + kick)


def derive_seed(master_seed: int, *parts) -> int:
    """
    Stable 63-bit seed from a master seed and any labelling parts.

    Adding new parts (frequencies, realizations) never changes the seeds of
    existing ones.
    """
    key = "/".join([str(int(master_seed))] + [str(p) for p in parts])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1
