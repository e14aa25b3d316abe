"""Two-fluid mixture properties, free energies, and normalization bookkeeping.

Density and viscosity interpolate linearly in the phase variable phi; the
permittivity uses Hermite interpolation so that d(eps)/d(phi) vanishes at
phi = +-1.  That zero derivative is what makes the model reduction
consistent: with one fluid absent, the electric force term drops out of the
chemical potential identically and the two-phase system collapses to the
single-phase one.

Two normalization tables are supported: the full dynamic model (length,
voltage, viscosity scales) and the simpler equilibrium system (length,
voltage, surface-tension scales).  Solvers work in normalized units
throughout; configs carry SI values and convert on the way in and out.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ParameterError

EPS0_VACUUM = 8.85418781e-12  # A^2 s^4 / (kg m^3)

LAMBDA_FACTOR = 3.0 / (2.0 * math.sqrt(2.0))


@dataclass(frozen=True)
class MixtureModel:
    """Fluid-pair properties plus phase-field parameters (normalized units)."""

    rho1: float
    rho2: float
    mu1: float
    mu2: float
    eps1: float
    eps2: float
    sigma: float
    eta: float
    gamma1: float
    theta_s: float = math.pi / 2.0
    lam: float = field(init=False)

    def __post_init__(self):
        for name in ("rho1", "rho2", "mu1", "mu2", "eps1", "eps2",
                     "sigma", "eta", "gamma1"):
            if getattr(self, name) <= 0.0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)}")
        object.__setattr__(self, "lam", LAMBDA_FACTOR * self.sigma * self.eta)

    @classmethod
    def equilibrium(cls, eps1, eps2, sigma, eta, gamma1, theta_s=math.pi / 2.0):
        """Model for the steady-state system; density and viscosity play no role."""
        return cls(rho1=1.0, rho2=1.0, mu1=1.0, mu2=1.0, eps1=eps1, eps2=eps2,
                   sigma=sigma, eta=eta, gamma1=gamma1, theta_s=theta_s)

    # -- phi-dependent coefficients (no clamping; polynomial extrapolation) --

    def rho(self, phi):
        return 0.5 * (self.rho1 + self.rho2) + 0.5 * (self.rho1 - self.rho2) * phi

    def mu(self, phi):
        return 0.5 * (self.mu1 + self.mu2) + 0.5 * (self.mu1 - self.mu2) * phi

    def eps(self, phi):
        return 0.5 * (self.eps1 + self.eps2) \
            + 0.25 * (self.eps1 - self.eps2) * phi * (3.0 - phi * phi)

    def eps_prime(self, phi):
        return 0.75 * (self.eps2 - self.eps1) * (phi * phi - 1.0)

    def h(self, phi):
        """Derivative of the double-well potential divided by lam."""
        return phi * (phi * phi - 1.0) / (self.eta * self.eta)

    def wall_energy(self, phi):
        return self.sigma * math.cos(self.theta_s) * phi * (phi * phi - 3.0) / 4.0

    def wall_energy_prime(self, phi):
        return self.sigma * math.cos(self.theta_s) * 0.75 * (phi * phi - 1.0)

    def free_energy_density(self, phi, grad_phi_sq):
        return 0.5 * self.lam * grad_phi_sq \
            + 0.25 * self.lam / self.eta**2 * (phi * phi - 1.0) ** 2

    # -- algorithmic constants ------------------------------------------------

    def eps_bar0(self):
        return max(self.eps1, self.eps2)

    def rho0(self):
        return min(self.rho1, self.rho2)

    def nu_m_default(self):
        # twice the admissible lower bound max(mu)/(2 min(rho))
        return max(self.mu1, self.mu2) / min(self.rho1, self.rho2)


def min_stabilization(eta, lam, gamma1, dt, gamma0):
    """Smallest admissible S for splitting the fourth-order phase update."""
    if dt <= 0 or lam <= 0 or gamma1 <= 0:
        raise ParameterError("dt, lam and gamma1 must be positive")
    return eta * eta * math.sqrt(4.0 * gamma0 / (lam * gamma1 * dt))


def stabilization_alpha(S, eta, lam, gamma1, dt, gamma0):
    """Negative Helmholtz root alpha for the two-equation phase splitting.

    Requires S >= eta^2 sqrt(4 gamma0 / (lam gamma1 dt)); at equality the
    discriminant vanishes and alpha = -S/(2 eta^2).
    """
    smin = min_stabilization(eta, lam, gamma1, dt, gamma0)
    if S < smin * (1.0 - 1e-12):
        raise ConfigurationError(
            f"stabilization constant S={S:g} below the admissible minimum {smin:g}")
    disc = max(0.0, 1.0 - (smin / S) ** 2)
    return -S / (2.0 * eta * eta) * (1.0 + math.sqrt(disc))


# ---------------------------------------------------------------------------
# normalization tables
# ---------------------------------------------------------------------------

class FullModelScales:
    """Normalization constants for the dynamic model.

    Choose a length scale L0, a voltage scale Vd, and a viscosity scale mu0;
    everything else follows.  ``normalize(name, si_value)`` divides by the
    scale; ``denormalize`` multiplies.
    """

    def __init__(self, L0, Vd, mu0):
        if min(L0, Vd, mu0) <= 0:
            raise ParameterError("normalization scales must be positive")
        self.L0, self.Vd, self.mu0 = float(L0), float(Vd), float(mu0)
        e0 = EPS0_VACUUM
        self.u0 = e0 * Vd**2 / (L0 * mu0)
        self.t0 = L0**2 * mu0 / (e0 * Vd**2)
        self._scales = {
            "length": self.L0,
            "eta": self.L0,
            "voltage": self.Vd,
            "eps": e0,
            "mu": self.mu0,
            "velocity": self.u0,
            "pressure": (mu0**2 / (e0 * Vd**2)) * self.u0**2,
            "rho": mu0**2 / (e0 * Vd**2),
            "lam": e0 * Vd**2,
            "sigma": e0 * Vd**2 / L0,       # lam / eta
            "gamma1": L0**2 / mu0,
            "efield": Vd / L0,
            "phi": 1.0,
            "time": self.t0,
        }

    def scale(self, name):
        try:
            return self._scales[name]
        except KeyError:
            raise ParameterError(f"unknown normalization quantity {name!r}")

    def normalize(self, name, value):
        return value / self.scale(name)

    def denormalize(self, name, value):
        return value * self.scale(name)


class EquilibriumScales:
    """Normalization constants for the pseudo-time steady-state system.

    Choose L0, Vd, and the surface tension gamma; pseudo-time itself is not
    normalized (scale 1).
    """

    def __init__(self, L0, Vd, gamma):
        if min(L0, Vd, gamma) <= 0:
            raise ParameterError("normalization scales must be positive")
        self.L0, self.Vd, self.gamma = float(L0), float(Vd), float(gamma)
        self._scales = {
            "length": self.L0,
            "eta": self.L0,
            "voltage": self.Vd,
            "eps": self.L0 * gamma / Vd**2,
            "gamma1": self.L0**3 / gamma,
            "lam": self.L0 * gamma,
            "sigma": gamma,                 # lam / eta
            "efield": Vd / self.L0,
            "phi": 1.0,
            "time": 1.0,
        }

    def scale(self, name):
        try:
            return self._scales[name]
        except KeyError:
            raise ParameterError(f"unknown normalization quantity {name!r}")

    def normalize(self, name, value):
        return value / self.scale(name)

    def denormalize(self, name, value):
        return value * self.scale(name)


# ---------------------------------------------------------------------------
# energy diagnostic
# ---------------------------------------------------------------------------

def total_energy(mesh, model, phi, u=None, E=None):
    """Volumetric energy terms plus the wall energy, reported separately.

    Returns a dict with kinetic, mixing, electric, wall, and total entries.
    The mixing term integrates the collocation gradient elementwise; the
    kinetic and electric terms use the diagonal nodal quadrature.
    """
    out = {}
    if u is not None:
        ke = 0.0
        rho = model.rho(phi)
        for comp in u:
            ke += mesh.integrate(0.5 * rho * comp * comp)
        out["kinetic"] = ke
    else:
        out["kinetic"] = 0.0

    gx_e, gy_e = mesh.elem_grad(phi)
    phi_e = mesh.gather(phi)
    F_e = model.free_energy_density(phi_e, gx_e**2 + gy_e**2)
    out["mixing"] = mesh.integrate_elem(F_e)

    if E is not None:
        e2 = np.zeros_like(phi)
        for comp in E:
            e2 += comp * comp
        out["electric"] = mesh.integrate(0.5 * model.eps(phi) * e2)
    else:
        out["electric"] = 0.0

    wall = 0.0
    for side in ("bottom",) + (() if mesh.open_top else ("top",)):
        wall += mesh.edge_integral(side, model.wall_energy(mesh.edge_values(side, phi)))
    out["wall"] = wall
    out["total"] = out["kinetic"] + out["mixing"] + out["electric"] + out["wall"]
    return out
