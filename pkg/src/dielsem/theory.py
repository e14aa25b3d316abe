"""Closed-form reference models for dielectrowetting amplitudes and heights."""

import math

from .model import EPS0_VACUUM


def film_amplitude(gamma, d_eps_rel, h0, p, V0):
    """Equilibrium wave amplitude of a thin dielectric film (SI units).

    A = 16 eps0 / (3 pi^4 gamma) * d_eps * exp(-2 pi h0 / p) * V0^2,
    reported as a magnitude.  ``d_eps_rel`` is the relative-permittivity
    difference of the two fluids, ``p`` the electrode pitch.
    """
    if min(gamma, h0, p) <= 0:
        raise ValueError("gamma, h0 and p must be positive")
    A = 16.0 * EPS0_VACUUM / (3.0 * math.pi**4 * gamma) * d_eps_rel \
        * math.exp(-2.0 * math.pi * h0 / p) * V0**2
    return abs(A)


def drop_height(h0, l0, gamma, d_eps_rel, d, V0):
    """Deformed drop height under voltage (SI units).

    h^2 = h0^2 - eps0 d_eps V0^2 Omega / (4 delta gamma), with
    Omega = h0 l0 and delta = 4 d / pi (d the electrode width).  Valid only
    while the right side stays positive; beyond that the model breaks down.
    """
    if min(h0, l0, gamma, d) <= 0:
        raise ValueError("h0, l0, gamma and d must be positive")
    delta = 4.0 * d / math.pi
    h2 = h0**2 - EPS0_VACUUM * abs(d_eps_rel) * V0**2 * (h0 * l0) \
        / (4.0 * delta * gamma)
    if h2 < 0.0:
        raise ValueError(
            f"voltage {V0:g} V is outside the model's validity range "
            f"(h^2 = {h2:.3e} < 0)")
    return math.sqrt(h2)
