"""Pseudo-time solver for equilibrium interface shapes.

At steady state the model admits zero velocity, so the equilibrium
configuration follows from marching only the phase equation coupled to the
potential equation in pseudo-time until the update stalls.  Density and
viscosity play no role here; parameters are normalized with the
surface-tension-based table rather than the dynamic one.

The converged state is independent of the pseudo-step size: at a fixed
point the stabilization term vanishes identically and the iterate satisfies
the discrete steady equations, so the step size is chosen for stability and
wall-clock time only.
"""

import numpy as np

from .fourier3d import Fourier3DStepper, Grid3D
from .model import total_energy
from .stepper2d import Stepper2D


class SteadyResult:
    def __init__(self, phi, V, E, iterations, residuals, energies, converged):
        self.phi = phi
        self.V = V
        self.E = E
        self.iterations = iterations
        self.residuals = np.asarray(residuals)
        self.energies = energies
        self.converged = converged


class EquilibriumSolver2D:
    """Potential solve plus the split phase update, velocity pinned to zero."""

    def __init__(self, mesh, model, dtau=2e-6, S=None, eps_bar0=None,
                 electrode_values=None, tol_ss=1e-6, max_iter=200_000):
        self.mesh = mesh
        self.model = model
        self.dtau = float(dtau)
        self.tol_ss = float(tol_ss)
        self.max_iter = int(max_iter)
        self._st = Stepper2D(mesh, model, dt=dtau, J=1, S=S,
                             eps_bar0=eps_bar0,
                             electrode_values=electrode_values)
        self._zero = mesh.zeros()

    def pseudo_step(self, phi, V, tau=0.0):
        """One semi-implicit pseudo-time step; returns (phi, V, E)."""
        Vn, E = self._st.step_potential(phi, V, tau)
        e2 = E[0] ** 2 + E[1] ** 2
        _, phin = self._st.step_phase(1, phi, self._zero, self._zero,
                                      phi, e2, tau)
        return phin, Vn, E

    def energy(self, phi, E):
        return total_energy(self.mesh, self.model, phi, E=E)

    def run_to_steady(self, phi0, log_every=0, callback=None):
        phi = np.array(phi0, dtype=float)
        V, E = self._st.init_potential(phi)
        residuals = []
        energies = []
        converged = False
        it = 0
        for it in range(1, self.max_iter + 1):
            phin, V, E = self.pseudo_step(phi, V)
            res = float(np.max(np.abs(phin - phi)) / self.dtau)
            phi = phin
            residuals.append(res)
            if log_every and it % log_every == 0:
                energies.append((it, self.energy(phi, E)["total"]))
                if callback is not None:
                    callback(it, phi, res)
            if res < self.tol_ss:
                converged = True
                break
        return SteadyResult(phi, V, E, it, residuals, energies, converged)


class EquilibriumSolver3D:
    """Per-Fourier-mode version of the pseudo-time equilibrium march."""

    def __init__(self, grid, model, dtau=2e-6, S=None, eps_bar0=None,
                 electrode_values=None, tol_ss=1e-6, max_iter=200_000):
        self.grid = grid
        self.model = model
        self.dtau = float(dtau)
        self.tol_ss = float(tol_ss)
        self.max_iter = int(max_iter)
        self._st = Fourier3DStepper(grid, model, dt=dtau, J=1, S=S,
                                    eps_bar0=eps_bar0,
                                    electrode_values=electrode_values)
        z = np.zeros((grid.mesh.ndof, grid.Nz))
        self._zero3 = (z, z.copy(), z.copy())

    def pseudo_step(self, phi, V, tau=0.0):
        Vn, E = self._st.step_potential(phi, V, tau)
        e2 = E[0] ** 2 + E[1] ** 2 + E[2] ** 2
        _, phin = self._st.step_phase(1, phi, self._zero3, phi, e2, tau)
        return phin, Vn, E

    def run_to_steady(self, phi0, log_every=0, callback=None):
        phi = np.array(phi0, dtype=float)
        V, E = self._st.init_potential(phi)
        residuals = []
        converged = False
        it = 0
        for it in range(1, self.max_iter + 1):
            phin, V, E = self.pseudo_step(phi, V)
            res = float(np.max(np.abs(phin - phi)) / self.dtau)
            phi = phin
            residuals.append(res)
            if log_every and it % log_every == 0 and callback is not None:
                callback(it, phi, res)
            if res < self.tol_ss:
                converged = True
                break
        return SteadyResult(phi, V, E, it, residuals, [], converged)
