#!/usr/bin/env python3
"""
Tests for lattice construction, initial states and perturbed twins
"""

import sys

import numpy as np
import pytest

from errors import InvalidArgumentError
from observables import decorrelator, magnetization_z, staggered_magnetization
from spinlattice import (
    AngleParams,
    SpinLattice,
    derive_seed,
    from_angles,
    init_neel,
    init_polarized,
    init_random,
    perturb_copy,
    sublattice_sign,
)


def test_from_angles_unit_vectors():
    theta = np.array([[0.0, np.pi / 2], [np.pi, 1.0]])
    phi = np.array([[0.3, 0.0], [2.0, np.pi / 2]])
    lattice = from_angles(theta, phi)
    assert lattice.n_linear == 2
    assert lattice.spin(0, 0).z == pytest.approx(1.0)
    assert lattice.spin(0, 1).x == pytest.approx(1.0)
    assert lattice.spin(1, 0).z == pytest.approx(-1.0)
    assert lattice.max_norm_error() < 1e-14


def test_from_angles_rejects_bad_grids():
    with pytest.raises(InvalidArgumentError):
        from_angles(np.zeros((3, 3)), np.zeros((3, 2)))
    with pytest.raises(InvalidArgumentError):
        from_angles(np.zeros((3, 2)), np.zeros((3, 2)))


def test_lattice_rejects_wrong_shape_and_boundary():
    with pytest.raises(InvalidArgumentError):
        SpinLattice(3, np.zeros((3, 3, 2)))
    with pytest.raises(InvalidArgumentError):
        SpinLattice(2, np.zeros((2, 2, 3)), boundary="open")


def test_angle_params_to_spin():
    spin = AngleParams(np.pi / 2, np.pi / 2).to_spin()
    assert spin.y == pytest.approx(1.0)
    assert spin.norm() == pytest.approx(1.0)


def test_perfect_neel_and_polarized():
    neel = init_neel(6, 0.0, seed=1)
    assert staggered_magnetization(neel) == pytest.approx(1.0, abs=1e-12)
    assert magnetization_z(neel) == pytest.approx(0.0, abs=1e-12)
    assert neel.sz[0, 0] == pytest.approx(1.0)
    assert neel.sz[0, 1] == pytest.approx(-1.0)

    polarized = init_polarized(6, 0.0, seed=1)
    assert magnetization_z(polarized) == pytest.approx(1.0, abs=1e-12)


def test_initial_states_are_seeded():
    a = init_neel(8, 0.05, seed=123)
    b = init_neel(8, 0.05, seed=123)
    c = init_neel(8, 0.05, seed=124)
    assert np.array_equal(a.spins, b.spins)
    assert not np.array_equal(a.spins, c.spins)
    assert a.max_norm_error() < 1e-12


def test_neel_sublattices_share_noise():
    W = 0.02
    neel = init_neel(4, W, seed=7)
    polarized = init_polarized(4, W, seed=7)
    sign = sublattice_sign(4)
    assert np.allclose(neel.sz, sign * polarized.sz)


def test_init_rejects_bad_arguments():
    with pytest.raises(InvalidArgumentError):
        init_neel(1, 0.01, seed=0)
    with pytest.raises(InvalidArgumentError):
        init_polarized(4, -0.1, seed=0)


def test_random_lattice_is_isotropic():
    lattice = init_random(50, seed=5)
    assert lattice.max_norm_error() < 1e-12
    assert abs(lattice.spins[:, :, 2].mean()) < 0.05
    assert abs(lattice.spins[:, :, 0].mean()) < 0.05


def test_perturb_copy_zero_delta_is_exact():
    source = init_neel(10, 0.01, seed=2)
    twin = perturb_copy(source, 0.0, seed=3)
    assert np.array_equal(twin.spins, source.spins)
    assert twin.spins is not source.spins


def test_perturb_copy_leaves_source_untouched():
    source = init_neel(10, 0.01, seed=2)
    before = source.spins.copy()
    twin = perturb_copy(source, 0.01, seed=3)
    assert np.array_equal(source.spins, before)
    assert not np.array_equal(twin.spins, source.spins)
    assert twin.max_norm_error() < 1e-12
    # small kick: typical displacement of order 2*pi*delta
    distance = np.linalg.norm(twin.spins - source.spins, axis=2)
    assert distance.mean() < 0.2


def test_perturb_copy_at_exact_pole():
    source = init_polarized(4, 0.0, seed=0)
    assert np.array_equal(source.spins[:, :, 2], np.ones((4, 4)))
    twin = perturb_copy(source, 0.01, seed=5)
    assert twin.max_norm_error() < 1e-12
    assert not np.array_equal(twin.spins, source.spins)


def test_default_perturbation_gives_small_decorrelator():
    source = init_neel(50, 0.01, seed=6)
    d = decorrelator(source, perturb_copy(source, 0.01, seed=7))
    assert 0.0 < d < 0.5


def test_perturb_copy_is_seeded():
    source = init_polarized(6, 0.03, seed=4)
    assert np.array_equal(perturb_copy(source, 0.01, 9).spins, perturb_copy(source, 0.01, 9).spins)


def test_angles_round_trip_away_from_poles():
    lattice = init_random(5, seed=8)
    theta, phi = lattice.angles()
    assert np.allclose(from_angles(theta, phi).spins, lattice.spins)


def test_derive_seed():
    a = derive_seed(1, "init", "rmd:1", "6", 0)
    assert a == derive_seed(1, "init", "rmd:1", "6", 0)
    assert a != derive_seed(1, "init", "rmd:1", "6", 1)
    assert a != derive_seed(2, "init", "rmd:1", "6", 0)
    assert 0 <= a < 2 ** 63


if __name__ == "__main__":
    sys.exit(pytest.main([__file__]))
