from types import SimpleNamespace

import numpy as np
import pytest

from conftest import P, RADII, harmonic
from hfk.centers import (adm_energy, adm_energy_gauss, adm_sequence, center_Z,
                         foliation_center_estimate, hamiltonian_center, richardson,
                         stcmc_correction)
from hfk.errors import NotCentered, ZeroEnergy
from hfk.models import Euclidean, HarmonicAsymptotics, SchwarzschildIsotropic


def test_richardson_is_exact_for_first_order_tail():
    r = np.array([8.0, 16.0, 32.0])
    assert richardson(r, 3.0 + 5.0 / r) == pytest.approx(3.0)
    assert richardson(r, 1.0 - 2.0 / r ** 2, order=2) == pytest.approx(1.0)


def test_adm_sequence_schwarzschild():
    seq = adm_sequence(SchwarzschildIsotropic(1.0), [8.0, 16.0, 32.0, 64.0])
    assert np.all(np.diff(seq["error"]) < 0)
    assert np.all(np.abs(seq["rates"] - 1.0) < 0.1)
    assert np.allclose(seq["E"], seq["E_gauss"], rtol=1e-6)
    assert seq["converging"]
    assert abs(seq["extrapolated"] - 1.0) < 5e-3


def test_adm_zero_for_flat_space():
    assert abs(adm_energy(Euclidean(), 10.0)) < 1e-14
    with pytest.raises(ZeroEnergy):
        hamiltonian_center(Euclidean(), 10.0)


def test_adm_gauss_form_with_momentum_model():
    assert adm_energy_gauss(harmonic(), 20.0) == pytest.approx(adm_energy(harmonic(), 20.0),
                                                                rel=1e-6)


def test_hamiltonian_center_translation():
    c = np.array([1.0, -0.5, 0.25])
    base = SchwarzschildIsotropic(1.0)
    moved = SchwarzschildIsotropic(1.0, c=tuple(c))
    assert np.allclose(hamiltonian_center(base, 16.0), 0.0, atol=1e-12)
    errs = [np.linalg.norm(hamiltonian_center(moved, r) - c) for r in (8.0, 16.0, 32.0)]
    assert errs[1] < 0.6 * errs[0] and errs[2] < 0.6 * errs[1]
    assert errs[2] < 0.2


def test_stcmc_correction_parity():
    assert np.all(stcmc_correction(SchwarzschildIsotropic(1.0), 16.0) == 0.0)
    odd = [np.linalg.norm(stcmc_correction(harmonic(), r)) for r in (8.0, 16.0)]
    assert max(odd) < 1e-12
    even = HarmonicAsymptotics(1.0, P, k_even_amplitude=0.05, k_even_decay=3.0)
    vals = [np.linalg.norm(stcmc_correction(even, r)) for r in (8.0, 16.0, 32.0, 64.0)]
    rates = np.array(vals[1:]) / np.array(vals[:-1])
    assert np.all((rates > 0.4) & (rates < 0.6))
    # doubling the amplitude doubles the correction at leading order
    twice = HarmonicAsymptotics(1.0, P, k_even_amplitude=0.1, k_even_decay=3.0)
    assert np.linalg.norm(stcmc_correction(twice, 32.0)) == pytest.approx(2.0 * vals[2], rel=0.05)


def test_stcmc_correction_slow_decay_does_not_vanish():
    slow = HarmonicAsymptotics(1.0, P, k_even_amplitude=0.05, k_even_decay=2.0)
    vals = [np.linalg.norm(stcmc_correction(slow, r)) for r in (8.0, 16.0, 32.0)]
    assert vals[2] > 0.7 * vals[0]


def test_center_Z_symmetric_data():
    assert np.allclose(center_Z(SchwarzschildIsotropic(1.0), 16.0), 0.0, atol=1e-12)
    z = center_Z(harmonic(), 16.0)
    assert np.all(np.isfinite(z))


def test_foliation_center_estimate_schwarzschild(schw, schw_foliation):
    rep = foliation_center_estimate(schw_foliation.leaves, schw)
    assert np.allclose(rep.C_f, 0.0, atol=1e-8)
    assert np.allclose(rep.euclidean_centers, 0.0, atol=1e-6)
    assert len(rep.rows()) == 7 * len(RADII)


def test_foliation_center_estimate_translated(translated_foliation):
    model, fol = translated_foliation
    rep = foliation_center_estimate(fol.leaves, model)
    c = np.array(model.c)
    gap = np.linalg.norm(rep.C_f - c, axis=1)
    assert gap[-1] < gap[0] and gap[-1] < 0.2
    assert np.linalg.norm(rep.limits["r_xi"] - c) < 0.1


def test_not_centered():
    # r |xi| growing linearly in r
    leaves = [SimpleNamespace(r=r, xi=np.array([0.05, 0.0, 0.0])) for r in RADII]
    with pytest.raises(NotCentered):
        foliation_center_estimate(leaves, SchwarzschildIsotropic(1.0))
