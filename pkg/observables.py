#!/usr/bin/env python3
"""
Observables - energies, magnetizations and the decorrelator of spin lattices

Totals are returned by the energy functions; everything else is per site.
"""

from dataclasses import asdict, dataclass
from typing import Dict, Optional

import numpy as np

from errors import InvalidArgumentError
from spinlattice import SpinLattice, sublattice_sign

D_INFINITY = float(np.sqrt(2.0))


@dataclass(frozen=True)
class ObservableSet:
    """Stroboscopic diagnostics of one lattice (and its twin, if any)"""
    energy_z_density: float
    energy_x_density: float
    energy_ave_density: float
    staggered_m: float
    magnetization_z: float
    decorrelator: Optional[float] = None

    def to_dict(self) -> Dict[str, Optional[float]]:
        return asdict(self)


def energy_z(lattice: SpinLattice, h: float) -> float:
    """Total H_z: right and down bonds of every site plus the longitudinal field"""
    sz = lattice.sz
    bonds = sz * np.roll(sz, -1, axis=0) + sz * np.roll(sz, -1, axis=1)
    return float(np.sum(bonds) + h * np.sum(sz))


def energy_x(lattice: SpinLattice, g: float) -> float:
    """Total H_x = g * sum of S^x"""
    return float(g * np.sum(lattice.spins[:, :, 0]))


def staggered_magnetization(lattice: SpinLattice) -> float:
    return float(np.sum(sublattice_sign(lattice.n_linear) * lattice.sz) / lattice.n_sites)


def magnetization_z(lattice: SpinLattice) -> float:
    return float(np.sum(lattice.sz) / lattice.n_sites)


def decorrelator(a: SpinLattice, b: SpinLattice) -> float:
    """
    Root-mean-square distance between twin configurations.

    Normalized per spin, so independent random lattices give sqrt(2) and
    antipodal ones give 2.
    """
    if a.n_linear != b.n_linear:
        raise InvalidArgumentError(f"lattices differ in size: {a.n_linear} vs {b.n_linear}")
    diff = a.spins - b.spins
    return float(np.sqrt(np.sum(diff * diff) / a.n_sites))


def measure(lattice: SpinLattice, g: float, h: float,
            perturbed: Optional[SpinLattice] = None) -> ObservableSet:
    n_sites = lattice.n_sites
    ez = energy_z(lattice, h) / n_sites
    ex = energy_x(lattice, g) / n_sites
    return ObservableSet(
        energy_z_density=ez,
        energy_x_density=ex,
        energy_ave_density=(ez + ex) / 2.0,
        staggered_m=staggered_magnetization(lattice),
        magnetization_z=magnetization_z(lattice),
        decorrelator=None if perturbed is None else decorrelator(lattice, perturbed),
    )


def energy_ave_density(lattice: SpinLattice, g: float, h: float) -> float:
    return (energy_z(lattice, h) + energy_x(lattice, g)) / (2.0 * lattice.n_sites)
