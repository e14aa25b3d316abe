"""Decoupled semi-implicit time stepper for the 2D two-phase dielectric model.

One step solves, in order: electric potential, electric field (projection),
the two Helmholtz systems of the split phase update, pressure, and velocity.
Nonlinear and variable-coefficient terms are treated explicitly through
J-th order extrapolations, so every linear system keeps a constant
coefficient matrix for the whole run and is factorized exactly once.

Variable-property terms are rewritten against constant references
(eps_bar0 for the permittivity, rho0 for the density, nu_m for the
kinematic viscosity) with explicit corrections; the stabilization constant
S splits the fourth-order phase equation into two Helmholtz solves with
constants (alpha + S/eta^2) and (-alpha), alpha < 0.

The first step always runs first-order (no n-1 history exists); the
configured order takes over afterwards.  All fields live in normalized
units on one shared mesh.
"""

import numpy as np

from . import kernels
from .errors import InitializationError
from .manufactured import ZeroSources
from .model import min_stabilization, stabilization_alpha, total_energy
from .operators import OperatorCache, project_l2


class BdfScheme:
    """Backward-differentiation weights and matching explicit extrapolation."""

    def __init__(self, J):
        if J not in (1, 2):
            raise ValueError("BDF order must be 1 or 2")
        self.J = J
        self.gamma0 = 1.0 if J == 1 else 1.5

    def hat(self, fn, fnm1):
        """History combination: D(xi) = gamma0 xi_{n+1} - hat(xi)."""
        return fn if self.J == 1 else 2.0 * fn - 0.5 * fnm1

    def star(self, fn, fnm1):
        """Explicit J-th order approximation of xi_{n+1}."""
        return fn if self.J == 1 else 2.0 * fn - fnm1


class Stepper2D:
    def __init__(self, mesh, model, dt, J=2, sources=None, S=None, nu_m=None,
                 eps_bar0=None, rho0=None, electrode_values=None,
                 tol_fp=1e-10, max_fp=1000):
        self.mesh = mesh
        self.model = model
        self.dt = float(dt)
        self.J = int(J)
        self.sources = sources if sources is not None else ZeroSources()
        self.eps_bar0 = model.eps_bar0() if eps_bar0 is None else float(eps_bar0)
        self.rho0 = model.rho0() if rho0 is None else float(rho0)
        self.nu_m = model.nu_m_default() if nu_m is None else float(nu_m)
        self.electrode_values = electrode_values
        self.tol_fp = tol_fp
        self.max_fp = max_fp

        gmax = BdfScheme(self.J).gamma0
        smin = min_stabilization(model.eta, model.lam, model.gamma1, self.dt, gmax)
        self.S = smin if S is None else float(S)
        self.alpha = {}
        for j in {1, self.J}:
            g0 = BdfScheme(j).gamma0
            self.alpha[j] = stabilization_alpha(self.S, model.eta, model.lam,
                                                model.gamma1, self.dt, g0)

        self.cache = OperatorCache()
        m = mesh
        self.op_V = self.cache.get(m, helm=0.0, dirichlet=m.se_dofs,
                                   scale=self.eps_bar0, pin=True, label="potential")
        self.op_P = self.cache.get(m, helm=0.0, dirichlet=m.open_dofs,
                                   pin=True, label="pressure")
        self._op_psi = {}
        self._op_phi = {}
        self._op_u = {}

        self.n = 0
        self.t = 0.0
        self.fields = {}      # current level: u, v, P, phi, V
        self.prev = {}        # level n-1
        self.E = (mesh.zeros(), mesh.zeros())
        self.psi = mesh.zeros()

    # -- operator families ----------------------------------------------------

    def _phase_ops(self, J):
        if J not in self._op_psi:
            a = self.alpha[J]
            c = a + self.S / self.model.eta**2
            self._op_psi[J] = self.cache.get(self.mesh, helm=c,
                                             label=f"psi[J={J}]")
            self._op_phi[J] = self.cache.get(self.mesh, helm=-a,
                                             label=f"phi[J={J}]")
        return self._op_psi[J], self._op_phi[J]

    def _velocity_op(self, J):
        if J not in self._op_u:
            g0 = BdfScheme(J).gamma0
            self._op_u[J] = self.cache.get(
                self.mesh, helm=g0 / (self.nu_m * self.dt),
                dirichlet=self.mesh.wall_dofs, label=f"velocity[J={J}]")
        return self._op_u[J]

    # -- initialization ---------------------------------------------------------

    def _electrode_dirichlet(self, t):
        mesh = self.mesh
        vals = mesh.zeros()
        if mesh.se_dofs.size:
            if self.electrode_values is None:
                vals[mesh.se_dofs] = mesh.se_voltages
            else:
                vals[mesh.se_dofs] = self.electrode_values(
                    mesh.x[mesh.se_dofs], mesh.y[mesh.se_dofs], t)
        return vals

    def init_potential(self, phi0, t=0.0):
        """Fixed-point iteration for the initial potential and field."""
        mesh, model = self.mesh, self.model
        fV = self._nodal(self.sources.f_V, t)
        dvals = self._electrode_dirichlet(t)
        coef_e = model.eps(mesh.gather(phi0)) - self.eps_bar0
        V = mesh.zeros()
        for _ in range(self.max_fp):
            vx_e, vy_e = mesh.elem_grad(V)
            rhs = -mesh.grad_load(coef_e * vx_e, coef_e * vy_e) - mesh.mass_load(fV)
            Vn = self.op_V.solve(rhs, dirichlet_values=dvals)
            diff = np.max(np.abs(Vn - V))
            V = Vn
            if diff < self.tol_fp * max(np.max(np.abs(V)), 1e-300):
                E = self._project_gradient(V)
                return V, E
        raise InitializationError(
            f"potential fixed point stalled at residual {diff:.3e} "
            f"after {self.max_fp} iterations")

    def set_initial(self, phi0, u0=None, v0=None, P0=None, V0=None):
        mesh = self.mesh
        f = {
            "phi": np.asarray(phi0, dtype=float).copy(),
            "u": mesh.zeros() if u0 is None else np.asarray(u0, dtype=float).copy(),
            "v": mesh.zeros() if v0 is None else np.asarray(v0, dtype=float).copy(),
            "P": mesh.zeros() if P0 is None else np.asarray(P0, dtype=float).copy(),
        }
        if V0 is None:
            f["V"], self.E = self.init_potential(f["phi"])
        else:
            f["V"] = np.asarray(V0, dtype=float).copy()
            self.E = self._project_gradient(f["V"])
        self.fields = f
        self.prev = {k: v.copy() for k, v in f.items()}
        self.n = 0
        self.t = 0.0

    # -- helpers ----------------------------------------------------------------

    def _nodal(self, fn, t):
        return fn(self.mesh.x, self.mesh.y, t)

    def _edge(self, fn, side, t):
        xb, yb = self.mesh.edge_coords(side)
        return fn(xb, yb, t)

    def _project_gradient(self, V):
        vx_e, vy_e = self.mesh.elem_grad(V)
        return (project_l2(self.mesh, self.mesh.mass_load_elem(vx_e)),
                project_l2(self.mesh, self.mesh.mass_load_elem(vy_e)))

    def _elem_deriv(self, fe):
        mesh = self.mesh
        return (kernels.deriv_x(fe, mesh.rule.diff, mesh.scale_x),
                kernels.deriv_y(fe, mesh.rule.diff, mesh.scale_y))

    def _wall_sides(self):
        return ("bottom",) + (() if self.mesh.open_top else ("top",))

    # -- substeps ----------------------------------------------------------------

    def step_potential(self, phi_star, V_star, t1):
        mesh, model = self.mesh, self.model
        coef_e = model.eps(mesh.gather(phi_star)) - self.eps_bar0
        vx_e, vy_e = mesh.elem_grad(V_star)
        rhs = -mesh.grad_load(coef_e * vx_e, coef_e * vy_e)
        rhs -= mesh.mass_load(self._nodal(self.sources.f_V, t1))
        V = self.op_V.solve(rhs, dirichlet_values=self._electrode_dirichlet(t1))
        return V, self._project_gradient(V)

    def step_phase(self, J, phi_star, u_star, v_star, phi_hat, e2, t1):
        mesh, model = self.mesh, self.model
        lamg = model.lam * model.gamma1
        alpha = self.alpha[J]
        cpsi = alpha + self.S / model.eta**2
        op_psi, op_phi = self._phase_ops(J)

        phi_s_e = mesh.gather(phi_star)
        px_e, py_e = mesh.elem_grad(phi_star)
        g_e = mesh.gather(self._nodal(self.sources.g, t1))
        Q1_e = (g_e - (mesh.gather(u_star) * px_e + mesh.gather(v_star) * py_e)
                + mesh.gather(phi_hat) / self.dt) / lamg
        e2_e = mesh.gather(e2)
        Q2_e = model.h(phi_s_e) - (self.S / model.eta**2) * phi_s_e \
            - model.eps_prime(phi_s_e) / (2.0 * model.lam) * e2_e
        q2x_e, q2y_e = self._elem_deriv(Q2_e)

        rhs = -mesh.mass_load_elem(Q1_e) + mesh.grad_load(q2x_e, q2y_e)
        if mesh.open_top:
            g1 = self._edge(self.sources.g1_open, "top", t1)
            g2 = self._edge(self.sources.g2, "top", t1)
            rhs += mesh.edge_mass_load("top", g1 + cpsi * g2)
        walls = {}
        for side in self._wall_sides():
            g1 = self._edge(self.sources.g1_wall, side, t1)
            g3 = self._edge(self.sources.g3, side, t1)
            U = -g3 - model.wall_energy_prime(
                mesh.edge_values(side, phi_star)) / model.lam
            walls[side] = U
            rhs += mesh.edge_mass_load(side, g1 + cpsi * U)
        psi = op_psi.solve(rhs)

        rhs = -mesh.mass_load(psi)
        if mesh.open_top:
            rhs += mesh.edge_mass_load("top", self._edge(self.sources.g2, "top", t1))
        for side in self._wall_sides():
            rhs += mesh.edge_mass_load(side, walls[side])
        phi = op_phi.solve(rhs)
        return psi, phi

    def _shared_forcing(self, J, phi, psi, phi_star, u_star, v_star,
                        P_star, u_hat, v_hat, e2, t1):
        """T plus the grad(mu/rho) x vorticity term: the vector G of both
        the pressure and velocity right-hand sides, all elementwise."""
        mesh, model = self.mesh, self.model
        alpha = self.alpha[J]

        phi_e = mesh.gather(phi)
        phi_s_e = mesh.gather(phi_star)
        px_e, py_e = mesh.elem_grad(phi)
        rho_e = model.rho(phi_e)
        mu_e = model.mu(phi_e)
        e2_e = mesh.gather(e2)
        lapphi_e = mesh.gather(psi) - alpha * phi_e

        br_e = lapphi_e - (self.S / model.eta**2) * (phi_e - phi_s_e) \
            - model.h(phi_s_e) \
            + model.eps_prime(phi_s_e) / (2.0 * model.lam) * e2_e
        jx_e, jy_e = self._elem_deriv(br_e)
        jfac = 0.5 * (model.rho1 - model.rho2) * model.lam * model.gamma1
        jx_e *= jfac
        jy_e *= jfac

        us_e, vs_e = mesh.gather(u_star), mesh.gather(v_star)
        ux_e, uy_e = mesh.elem_grad(u_star)
        vx_e, vy_e = mesh.elem_grad(v_star)
        omega_e = vx_e - uy_e

        fx, fy = self.sources.f(mesh.x, mesh.y, t1)
        fx_e, fy_e = mesh.gather(fx), mesh.gather(fy)
        mup = 0.5 * (model.mu1 - model.mu2)
        gmux_e, gmuy_e = mup * px_e, mup * py_e
        epsp_e = model.eps_prime(phi_e)
        psx_e, psy_e = mesh.elem_grad(P_star)

        inv_rho = 1.0 / rho_e
        Tx = (fx_e - model.lam * lapphi_e * px_e - 0.5 * epsp_e * e2_e * px_e
              + gmux_e * 2.0 * ux_e + gmuy_e * (uy_e + vx_e)
              - (jx_e * ux_e + jy_e * uy_e)) * inv_rho \
            + mesh.gather(u_hat) / self.dt \
            - (us_e * ux_e + vs_e * uy_e) \
            + (1.0 / self.rho0 - inv_rho) * psx_e
        Ty = (fy_e - model.lam * lapphi_e * py_e - 0.5 * epsp_e * e2_e * py_e
              + gmux_e * (uy_e + vx_e) + gmuy_e * 2.0 * vy_e
              - (jx_e * vx_e + jy_e * vy_e)) * inv_rho \
            + mesh.gather(v_hat) / self.dt \
            - (us_e * vx_e + vs_e * vy_e) \
            + (1.0 / self.rho0 - inv_rho) * psy_e

        mor_e = mu_e * inv_rho
        morx_e, mory_e = self._elem_deriv(mor_e)
        Gx = Tx + mory_e * omega_e
        Gy = Ty - morx_e * omega_e
        return Gx, Gy, omega_e, mor_e

    def step_pressure(self, J, G, omega_e, mor_e, t1):
        mesh = self.mesh
        g0 = BdfScheme(J).gamma0
        Gx, Gy = G
        rhs = self.rho0 * mesh.grad_load(Gx, Gy)
        for side in self._wall_sides():
            ny = mesh.edge_normal_y(side)
            om = mesh.edge_slice(side, omega_e)
            mo = mesh.edge_slice(side, mor_e)
            # n x omega = (n_y w, -n_x w); n_x = 0 on horizontal walls
            rhs -= self.rho0 * mesh.edge_grad_load(side, ny * mo * om,
                                                   np.zeros_like(om))
            xb, yb = mesh.edge_coords(side)
            _, wy = self.sources.w(xb, yb, t1)
            rhs -= (self.rho0 * g0 / self.dt) * mesh.edge_mass_load(side, ny * wy)
        dvals = mesh.zeros()
        if mesh.open_dofs.size:
            dvals[mesh.open_dofs] = self.sources.f2(
                mesh.x[mesh.open_dofs], mesh.y[mesh.open_dofs], t1)
        return self.op_P.solve(rhs, dirichlet_values=dvals)

    def step_velocity(self, J, G, omega_e, mor_e, P, t1):
        mesh = self.mesh
        op = self._velocity_op(J)
        px_e, py_e = mesh.elem_grad(P)
        Yx = G[0] - px_e / self.rho0
        Yy = G[1] - py_e / self.rho0
        K_e = (mor_e - self.nu_m) * omega_e
        zero = np.zeros_like(K_e)
        inv = 1.0 / self.nu_m
        rhs_u = inv * (mesh.mass_load_elem(Yx) + mesh.grad_load(zero, K_e))
        rhs_v = inv * (mesh.mass_load_elem(Yy) - mesh.grad_load(K_e, zero))
        if mesh.open_top:
            xb, yb = mesh.edge_coords("top")
            f1x, f1y = self.sources.f1(xb, yb, t1)
            K_edge = mesh.edge_slice("top", K_e)
            # n x omega on the top (n = (0,1)) points along +x
            rhs_u += mesh.edge_mass_load("top", f1x - inv * K_edge)
            rhs_v += mesh.edge_mass_load("top", f1y)

        du = mesh.zeros()
        dv = mesh.zeros()
        if mesh.wall_dofs.size:
            wd = mesh.wall_dofs
            wx, wy = self.sources.w(mesh.x[wd], mesh.y[wd], t1)
            du[wd], dv[wd] = wx, wy
        u = op.solve(rhs_u, dirichlet_values=du)
        v = op.solve(rhs_v, dirichlet_values=dv)
        return u, v

    # -- full step -----------------------------------------------------------------

    def advance(self):
        """One full time step; substep errors leave the state untouched."""
        J = 1 if self.n == 0 else self.J
        bdf = BdfScheme(J)
        f, p = self.fields, self.prev
        t1 = self.t + self.dt

        phi_star = bdf.star(f["phi"], p["phi"])
        V_star = bdf.star(f["V"], p["V"])
        u_star = bdf.star(f["u"], p["u"])
        v_star = bdf.star(f["v"], p["v"])
        P_star = bdf.star(f["P"], p["P"])
        phi_hat = bdf.hat(f["phi"], p["phi"])
        u_hat = bdf.hat(f["u"], p["u"])
        v_hat = bdf.hat(f["v"], p["v"])

        V, E = self.step_potential(phi_star, V_star, t1)
        e2 = E[0] ** 2 + E[1] ** 2
        psi, phi = self.step_phase(J, phi_star, u_star, v_star, phi_hat, e2, t1)
        Gx, Gy, omega_e, mor_e = self._shared_forcing(
            J, phi, psi, phi_star, u_star, v_star, P_star, u_hat, v_hat, e2, t1)
        P = self.step_pressure(J, (Gx, Gy), omega_e, mor_e, t1)
        u, v = self.step_velocity(J, (Gx, Gy), omega_e, mor_e, P, t1)

        self.prev = f
        self.fields = {"u": u, "v": v, "P": P, "phi": phi, "V": V}
        self.E = E
        self.psi = psi
        self.n += 1
        self.t = t1
        return self.fields

    def run(self, nsteps):
        for _ in range(nsteps):
            self.advance()
        return self.fields

    # -- diagnostics -----------------------------------------------------------------

    def phase_mass(self):
        return self.mesh.integrate(self.fields["phi"])

    def max_speed(self):
        return float(np.sqrt(np.max(self.fields["u"] ** 2 + self.fields["v"] ** 2)))

    def divergence_l2(self):
        ux_e, _ = self.mesh.elem_grad(self.fields["u"])
        _, vy_e = self.mesh.elem_grad(self.fields["v"])
        return float(np.sqrt(self.mesh.integrate_elem((ux_e + vy_e) ** 2)))

    def energy(self):
        return total_energy(self.mesh, self.model, self.fields["phi"],
                            u=(self.fields["u"], self.fields["v"]), E=self.E)

    # -- checkpointing ----------------------------------------------------------------

    def state_dict(self):
        out = {"n": self.n, "t": self.t, "dt": self.dt, "J": self.J}
        for k, v in self.fields.items():
            out[f"cur_{k}"] = v.copy()
        for k, v in self.prev.items():
            out[f"prev_{k}"] = v.copy()
        return out

    def load_state(self, state):
        self.n = int(state["n"])
        self.t = float(state["t"])
        self.fields = {k[4:]: state[k].copy() for k in state if k.startswith("cur_")}
        self.prev = {k[5:]: state[k].copy() for k in state if k.startswith("prev_")}
        self.E = self._project_gradient(self.fields["V"])
