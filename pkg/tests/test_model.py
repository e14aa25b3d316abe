"""Mixture properties, reduction consistency, stabilization, normalization."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dielsem.errors import ConfigurationError, ParameterError
from dielsem.model import (EquilibriumScales, FullModelScales, MixtureModel,
                           min_stabilization, stabilization_alpha, total_energy)
from dielsem.sem import build_mesh


def sample_model(**kw):
    args = dict(rho1=1.0, rho2=3.0, mu1=0.01, mu2=0.02, eps1=1.0, eps2=8.0,
                sigma=1.0, eta=0.1, gamma1=0.01)
    args.update(kw)
    return MixtureModel(**args)


def test_linear_interpolation_endpoints():
    m = sample_model()
    assert m.rho(1.0) == m.rho1 and m.rho(-1.0) == m.rho2
    assert m.mu(0.0) == 0.5 * (m.mu1 + m.mu2)


def test_hermite_permittivity():
    m = sample_model()
    assert m.eps(1.0) == pytest.approx(m.eps1, abs=1e-15)
    assert m.eps(-1.0) == pytest.approx(m.eps2, abs=1e-15)
    assert m.eps(0.0) == pytest.approx(0.5 * (m.eps1 + m.eps2))
    assert m.eps_prime(1.0) == 0.0 and m.eps_prime(-1.0) == 0.0
    assert m.eps_prime(0.0) == pytest.approx((8.0 - 1.0) / 2.0 * 3.0 * (-1.0) / 2.0)


def test_eps_monotone_between_bulk_values():
    m = sample_model()
    phi = np.linspace(-0.999, 0.999, 1001)
    dp = m.eps_prime(phi)
    assert np.all(dp < 0.0)  # eps2 > eps1 means decreasing in phi


def test_double_well_derivative():
    m = sample_model(eta=1.0)
    for v in (-1.0, 0.0, 1.0):
        assert m.h(v) == 0.0
    assert m.h(0.5) == pytest.approx(-0.375)
    phi = np.linspace(-2, 2, 41)
    assert np.allclose(m.h(-phi), -m.h(phi))


def test_wall_energy_prime():
    m = sample_model(theta_s=0.0, sigma=1.0)
    assert m.wall_energy_prime(1.0) == 0.0
    assert m.wall_energy_prime(-1.0) == 0.0
    assert m.wall_energy_prime(0.0) == pytest.approx(-0.75)
    neutral = sample_model(theta_s=math.pi / 2.0)
    phi = np.linspace(-1.5, 1.5, 7)
    assert np.allclose(neutral.wall_energy_prime(phi), 0.0)


def test_lambda_construction():
    m = sample_model(sigma=2.0 * math.sqrt(2.0) / 3.0, eta=1.0)
    assert m.lam == pytest.approx(1.0, rel=1e-15)


def test_positivity_validation():
    with pytest.raises(ParameterError):
        sample_model(sigma=-1.0)
    with pytest.raises(ParameterError):
        sample_model(gamma1=0.0)


@given(st.floats(-3.0, 3.0), st.floats(0.1, 100.0))
@settings(max_examples=100, deadline=None)
def test_reduction_consistency_chemical_potential(phi_bulk, e2):
    # lam h(phi) - eps'/2 |E|^2 is exactly zero in either bulk phase
    m = sample_model()
    for phi in (-1.0, 1.0):
        val = m.lam * m.h(phi) - 0.5 * m.eps_prime(phi) * e2
        assert val == 0.0
    assert math.isfinite(m.lam * m.h(phi_bulk) - 0.5 * m.eps_prime(phi_bulk) * e2)


def test_stabilization_bound_and_alpha():
    m = sample_model()
    dt, gamma0 = 0.01, 1.5
    smin = min_stabilization(m.eta, m.lam, m.gamma1, dt, gamma0)
    a = stabilization_alpha(smin, m.eta, m.lam, m.gamma1, dt, gamma0)
    assert a == pytest.approx(-smin / (2 * m.eta**2), rel=1e-12)
    a2 = stabilization_alpha(2 * smin, m.eta, m.lam, m.gamma1, dt, gamma0)
    want = -(2 * smin) / (2 * m.eta**2) * (1.0 + math.sqrt(3.0) / 2.0)
    assert a2 == pytest.approx(want, rel=1e-12)
    with pytest.raises(ConfigurationError):
        stabilization_alpha(0.9 * smin, m.eta, m.lam, m.gamma1, dt, gamma0)
    # alpha + S/eta^2 > 0 (the psi-solve Helmholtz constant stays positive)
    assert a + smin / m.eta**2 > 0.0
    assert a2 + 2 * smin / m.eta**2 > 0.0


def test_normalization_round_trip_full():
    sc = FullModelScales(L0=1e-3, Vd=300.0, mu0=1.2048e-3)
    for name in ("length", "voltage", "eps", "mu", "velocity", "pressure",
                 "rho", "lam", "gamma1", "efield", "time", "sigma"):
        v = 0.8371
        back = sc.denormalize(name, sc.normalize(name, v))
        assert back == pytest.approx(v, rel=1e-14)


def test_normalization_round_trip_equilibrium():
    sc = EquilibriumScales(L0=4e-5, Vd=100.0, gamma=2.84e-2)
    for name in ("length", "voltage", "eps", "gamma1", "lam", "efield", "time"):
        v = 3.17
        back = sc.denormalize(name, sc.normalize(name, v))
        assert back == pytest.approx(v, rel=1e-14)


def test_drop_transport_normalization_example():
    # eta = 0.01 L0 normalizes to 0.01; gamma1 = 5e-6 L0^2/mu1 to 5e-6
    sc = FullModelScales(L0=1e-3, Vd=300.0, mu0=1.2048e-3)
    assert sc.normalize("eta", 0.01 * 1e-3) == pytest.approx(0.01)
    assert sc.normalize("gamma1", 5e-6 * (1e-3) ** 2 / 1.2048e-3) == pytest.approx(5e-6)


def test_energy_pure_phase_at_rest():
    mesh = build_mesh(2.0, 1.0, 2, [], 8, electrodes=[(0.0, 2.0, 0.0)])
    m = sample_model(theta_s=math.pi / 2.0)
    phi = np.ones(mesh.ndof)
    terms = total_energy(mesh, m, phi, u=(np.zeros(mesh.ndof),) * 2,
                         E=(np.zeros(mesh.ndof),) * 2)
    assert terms["kinetic"] == 0.0
    assert abs(terms["mixing"]) < 1e-14
    assert terms["electric"] == 0.0
    assert abs(terms["wall"]) < 1e-14  # gamma_s1+gamma_s2 stored as 0


def test_energy_tanh_profile_integrates_to_sigma():
    # 1D tanh interface: mixing energy per unit area equals sigma
    m = sample_model(sigma=0.37, eta=0.02)
    mesh = build_mesh(1.0, 1.0, 1, [0.35, 0.45, 0.55, 0.65], 16, periodic_x=True)
    phi = np.tanh((mesh.y - 0.5) / (math.sqrt(2.0) * m.eta))
    terms = total_energy(mesh, m, phi)
    assert terms["mixing"] == pytest.approx(m.sigma, rel=1e-6)


def test_energy_kinetic_constant_velocity():
    mesh = build_mesh(2.0, 1.0, 2, [], 6, electrodes=[(0.0, 2.0, 0.0)])
    m = sample_model(rho1=2.0, rho2=2.0)
    phi = np.zeros(mesh.ndof)
    c = 0.7
    terms = total_energy(mesh, m, phi, u=(np.full(mesh.ndof, c), np.zeros(mesh.ndof)))
    assert terms["kinetic"] == pytest.approx(0.5 * 2.0 * c * c * 2.0, rel=1e-12)
