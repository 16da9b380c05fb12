from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import P, harmonic, york
from hfk.errors import NonPositiveH, StepError
from hfk.functionals import (W1_field, W2_field, el_residual, energy_variation,
                             first_variation_P2, first_variation_fd, hawking_energy,
                             hawking_functional, monotonicity_pack, normal_flow,
                             second_variation_P2)
from hfk.models import Euclidean, PerturbedSchwarzschild, SchwarzschildIsotropic
from hfk.sphere import get_basis, get_grid, n_coeffs
from hfk.surface import (GraphSurface, build_surface_geometry, embedding_derivatives,
                         geometry_from_embedding)


def _alpha(seed, L=8):
    B = get_basis(L)
    return B.synth(np.random.default_rng(seed).normal(size=B.n) / (1.0 + B.l) ** 2)


def _graph(model, r, seed=1, scale=0.3, xi=(0.02, -0.01, 0.0)):
    B = get_basis(12)
    u = np.random.default_rng(seed).normal(size=n_coeffs(12)) * scale / (1.0 + B.l) ** 3
    u[B.l == 1] = 0.0
    return build_surface_geometry(model, GraphSurface(np.asarray(xi), r, u))


def test_euclidean_round_sphere():
    geom = build_surface_geometry(Euclidean(), GraphSurface.sphere(3.0))
    assert abs(hawking_energy(geom)) < 1e-12
    assert np.isclose(hawking_functional(geom), 4.0 * np.pi, rtol=1e-12)
    assert np.max(np.abs(W1_field(geom))) < 1e-9
    res = el_residual(geom)
    assert abs(res.lam) < 1e-12 and res.norm < 1e-9
    mp = monotonicity_pack(geom)
    assert np.allclose(mp.f, 0.0) and abs(mp.balance_residual) < 1e-8
    assert energy_variation(geom, 0.0, _alpha(0)) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("r", [5.0, 8.0, 20.0])
def test_schwarzschild_symmetry_sphere_energy(r):
    geom = build_surface_geometry(SchwarzschildIsotropic(1.0), GraphSurface.sphere(r))
    assert abs(hawking_energy(geom) - 1.0) < 1e-10


def test_schwarzschild_multiplier_estimate():
    # on a centred sphere lam = -Ric(nu, nu) = 2m / R^3 with the areal radius R = r phi^2
    for r in (8.0, 16.0):
        geom = build_surface_geometry(SchwarzschildIsotropic(1.0), GraphSurface.sphere(r))
        lam = -(geom.dmu @ (W1_field(geom) * geom.H)) / (geom.dmu @ geom.H ** 2)
        R = r * (1.0 + 0.5 / r) ** 2
        assert lam == pytest.approx(2.0 / R ** 3, rel=1e-10)


@pytest.mark.parametrize("axes", [(1.0, 1.2, 1.0), (1.0, 0.8, 1.3), (2.0, 2.0, 1.5)])
def test_nonround_euclidean_energy_negative(axes):
    G = get_grid(32, 32)
    X, Xd = embedding_derivatives(G.y * np.array(axes), G)
    geom = geometry_from_embedding(Euclidean(), X, Xd, G)
    assert hawking_energy(geom) < 0.0


def test_W1_is_willmore_variation():
    geom = _graph(PerturbedSchwarzschild(1.0, 0.5, parity="even"), 8.0)
    a = _alpha(4)
    fd = first_variation_fd(geom, a, lambda g: 0.25 * g.dmu @ g.H ** 2, h=1e-4 * 8.0)
    exact = -0.5 * geom.dmu @ (W1_field(geom) * a)
    assert abs(fd - exact) <= 1e-4 * abs(exact)


def test_W2_vanishes_without_k():
    assert np.all(W2_field(_graph(SchwarzschildIsotropic(1.0), 8.0)) == 0.0)


def test_W2_forms_agree():
    geom = build_surface_geometry(harmonic(), GraphSurface.sphere(10.0))
    a = W2_field(geom, form="combined")
    b = W2_field(geom, form="expanded")
    assert np.max(np.abs(a - b)) <= 1e-8 * np.max(np.abs(a))
    with pytest.raises(ValueError):
        W2_field(geom, form="other")


@pytest.mark.parametrize("make", [harmonic, york], ids=["harmonic", "york"])
def test_first_variation_P2_second_order(make):
    geom = _graph(make(), 10.0)
    a = _alpha(5)
    exact = first_variation_P2(geom, a)
    e1 = abs(first_variation_fd(geom, a, h=0.2) - exact)
    e2 = abs(first_variation_fd(geom, a, h=0.1) - exact)
    assert e1 <= 1e-3 * abs(exact)
    assert 3.0 < e1 / e2 < 5.0


def test_second_variation_symmetric():
    geom = build_surface_geometry(harmonic(), GraphSurface.sphere(16.0))
    a1, a2 = _alpha(6), _alpha(7)
    d12 = second_variation_P2(geom, a1, a2)
    d21 = second_variation_P2(geom, a2, a1)
    assert abs(d12 - d21) <= 1e-3 * max(abs(d12), abs(d21))
    flat = build_surface_geometry(SchwarzschildIsotropic(1.0), GraphSurface.sphere(16.0))
    assert second_variation_P2(flat, a1, a2) == 0.0


def test_energy_variation_on_symmetry_sphere():
    # E is constant along the Schwarzschild spheres; both routes give zero
    geom = build_surface_geometry(SchwarzschildIsotropic(1.0), GraphSurface.sphere(10.0))
    lam = el_residual(geom).lam
    a = np.ones(geom.n)
    fd = first_variation_fd(geom, a, lambda g: hawking_energy(g), h=1e-2 * 10.0)
    assert abs(fd) < 1e-12 and abs(energy_variation(geom, lam, a)) < 1e-12


def test_flow_step_error():
    # flowing into the excluded region around the puncture
    geom = build_surface_geometry(SchwarzschildIsotropic(1.0), GraphSurface.sphere(4.0))
    with pytest.raises(StepError):
        normal_flow(geom, np.ones(geom.n), -4.5)


def test_nonpositive_H_rejected():
    geom = build_surface_geometry(Euclidean(), GraphSurface.sphere(1.0))
    with pytest.raises(NonPositiveH):
        monotonicity_pack(replace(geom, H=-geom.H))


@settings(max_examples=6)
@given(st.integers(0, 10 ** 6), st.floats(6.0, 30.0))
def test_g_nonpositive(seed, r):
    mp = monotonicity_pack(_graph(harmonic(), r, seed=seed, scale=0.2))
    assert np.max(mp.g) <= 0.0


@pytest.mark.parametrize("r", [6.0, 12.0, 40.0])
def test_balance_identity_on_exact_critical_spheres(r):
    mp = monotonicity_pack(build_surface_geometry(SchwarzschildIsotropic(1.0),
                                                  GraphSurface.sphere(r)))
    assert abs(mp.balance_residual) <= 1e-6 * 4.0 * np.pi


def test_balance_identity_needs_the_euler_lagrange_equation():
    mp = monotonicity_pack(_graph(harmonic(), 6.0, seed=0, scale=0.2))
    assert abs(mp.balance_residual) > 1e-3


def test_beta_range():
    geom = build_surface_geometry(harmonic(), GraphSurface.sphere(10.0))
    with pytest.raises(ValueError):
        monotonicity_pack(geom, beta=0.5)


def test_harmonic_f_leading_term_on_axis():
    # on the plane orthogonal to p the display reduces to -4 |p|^2 (no delta(p, rho) term)
    R = 200.0
    geom = build_surface_geometry(harmonic(), GraphSurface.sphere(R))
    mp = monotonicity_pack(geom)
    rho = geom.X / R
    d = rho @ np.asarray(P)
    i = np.argmin(np.abs(d))
    assert abs(d[i]) < 0.01
    lead = -4.0 * float(np.dot(P, P))
    assert abs(R ** 4 * mp.f[i] - lead) <= 0.05 * abs(lead)
