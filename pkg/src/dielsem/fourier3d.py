"""Hybrid Fourier/spectral-element stepper for 3D domains, periodic in z.

Fields live on the 2D mesh nodes times a uniform z grid of Nz points.  Each
substep forms its nonlinear products pseudo-spectrally on that physical
grid (collocation in the plane, FFT differentiation in z, no dealiasing),
transforms to Fourier modes, and solves one small 2D system per mode.  The
mode-k operator differs from the 2D one only through the additive constant
beta_k^2 = (2 pi k / Lz)^2, so modes +k and -k share a factorization and
every factor is computed once per run.

Physical fields are real; solves run over the non-negative modes (rfft
layout) and negative modes follow by conjugate symmetry.  Terms carrying a
single factor of i*beta_k (the z parts of gradients against test functions)
mix the real and imaginary parts of a mode and are assembled in mode space;
everything else is assembled on the physical grid and transformed, which is
equivalent and far cheaper.
"""

import numpy as np
import scipy.sparse as sp

from .errors import InitializationError, ParameterError
from .manufactured import ZeroSources3D
from .model import min_stabilization, stabilization_alpha
from .operators import OperatorCache, project_l2
from .stepper2d import BdfScheme


def fft_z(phys, axis=-1):
    """Fourier modes with the 1/Nz normalization (mode of cos is 1/2)."""
    n = phys.shape[axis]
    if n % 2 or n < 4:
        raise ParameterError(f"Nz must be even and >= 4, got {n}")
    return np.fft.fft(phys, axis=axis) / n


def ifft_z(modes, axis=-1):
    n = modes.shape[axis]
    return np.fft.ifft(modes * n, axis=axis)


class Grid3D:
    """2D SEM mesh extruded along a periodic z direction."""

    def __init__(self, mesh, Nz, Lz):
        if Nz % 2 or Nz < 4:
            raise ParameterError(f"Nz must be even and >= 4, got {Nz}")
        self.mesh = mesh
        self.Nz = int(Nz)
        self.Lz = float(Lz)
        self.z = np.arange(Nz) * self.Lz / Nz
        self.nmodes = Nz // 2 + 1
        self.kvals = np.arange(self.nmodes)
        self.beta = 2.0 * np.pi * self.kvals / self.Lz
        self.dz_weight = self.Lz / Nz

        n = mesh.K + 1
        cols = mesh.gid.size
        self._Qvol = sp.csr_matrix(
            (np.ones(cols), (mesh.gid.ravel(), np.arange(cols))),
            shape=(mesh.ndof, cols))
        self._Qedge = {}
        for side in ("bottom", "top"):
            eg = mesh._edges[side]["egid"]
            self._Qedge[side] = sp.csr_matrix(
                (np.ones(eg.size), (eg.ravel(), np.arange(eg.size))),
                shape=(mesh.ndof, eg.size))

    # transforms -----------------------------------------------------------

    def rfft(self, f):
        return np.fft.rfft(f, axis=-1)

    def irfft(self, F):
        return np.fft.irfft(F, n=self.Nz, axis=-1)

    def dz(self, f):
        F = np.fft.rfft(f, axis=-1)
        F *= 1j * self.beta
        if self.Nz % 2 == 0:
            F[..., -1] = 0.0  # odd derivative of the Nyquist mode
        return np.fft.irfft(F, n=self.Nz, axis=-1)

    # geometry helpers ------------------------------------------------------

    def gather(self, f):
        """(ndof, Nz) -> (nelem, n, n, Nz)."""
        return f[self.mesh.gid]

    def elem_grad(self, f):
        """Collocation x/y derivatives and spectral z derivative, elementwise."""
        mesh = self.mesh
        fe = self.gather(f)
        dx = np.einsum("qa,eabz->eqbz", mesh.rule.diff, fe)
        dx *= mesh.scale_x[:, None, None, None]
        dy = np.einsum("qb,eabz->eaqz", mesh.rule.diff, fe)
        dy *= mesh.scale_y[:, None, None, None]
        dzf = self.gather(self.dz(f))
        return dx, dy, dzf

    def scatter(self, vals):
        out = self._Qvol @ vals.reshape(-1, vals.shape[-1])
        return out

    def project_elem(self, fe):
        w = self.mesh.w2d[:, :, :, None]
        return self.scatter(w * fe) / self.mesh.mass[:, None]

    def mass_load_elem(self, fe):
        return self.scatter(self.mesh.w2d[:, :, :, None] * fe)

    def grad_load(self, fx_e, fy_e):
        mesh = self.mesh
        w = mesh.rule.weights
        t1 = np.einsum("qc,eqdz->ecdz", mesh.WD, fx_e)
        t1 *= (0.5 * mesh.elem_hy[:, None, None, None]) * w[None, None, :, None]
        t2 = np.einsum("pd,ecpz->ecdz", mesh.WD, fy_e)
        t2 *= (0.5 * mesh.hx) * w[None, :, None, None]
        return self.scatter(t1 + t2)

    def edge_slice(self, side, fe):
        e = self.mesh._edges[side]
        return fe[e["elems"]][:, :, e["bidx"], :]

    def edge_values(self, side, f):
        return f[self.mesh._edges[side]["edge_gid"]]

    def edge_mass_load(self, side, vals):
        """vals has shape (nx, n, Nz); returns (ndof, Nz)."""
        mesh = self.mesh
        contrib = (0.5 * mesh.hx) * mesh.rule.weights[None, :, None] * vals
        n = mesh.K + 1
        full = np.zeros((contrib.shape[0], n, n, contrib.shape[-1]),
                        dtype=contrib.dtype)
        bidx = mesh._edges[side]["bidx"]
        full[:, :, bidx, :] = contrib
        return self._Qedge[side] @ full.reshape(-1, full.shape[-1])

    def edge_grad_load(self, side, fx, fy):
        mesh = self.mesh
        e = mesh._edges[side]
        n = mesh.K + 1
        w, D = mesh.rule.weights, mesh.rule.diff
        nzdim = fx.shape[-1]
        out = np.zeros((len(e["elems"]), n, n, nzdim),
                       dtype=np.result_type(fx, fy, float))
        out[:, :, e["bidx"], :] += np.einsum("jaz,ac->jcz", w[None, :, None] * fx, D)
        out += (mesh.hx / e["hy"]) * (w[None, :, None] * fy)[:, :, None, :] \
            * D[e["bidx"], :][None, None, :, None]
        return self._Qedge[side] @ out.reshape(-1, nzdim)

    def integrate(self, f):
        """Volume integral of a nodal (ndof, Nz) field."""
        return float(np.sum(self.mesh.mass @ f) * self.dz_weight)

    def integrate_elem(self, fe):
        return float(np.sum(self.mesh.w2d[:, :, :, None] * fe) * self.dz_weight)

    def nodal(self, fn, t=None):
        x = self.mesh.x[:, None] + 0.0 * self.z[None, :]
        y = self.mesh.y[:, None] + 0.0 * self.z[None, :]
        z = 0.0 * self.mesh.x[:, None] + self.z[None, :]
        return fn(x, y, z) if t is None else fn(x, y, z, t)

    def edge_coords(self, side):
        xb, yb = self.mesh.edge_coords(side)
        shape = xb.shape + (self.Nz,)
        return (np.broadcast_to(xb[:, :, None], shape),
                np.broadcast_to(yb[:, :, None], shape),
                np.broadcast_to(self.z[None, None, :], shape))


class Fourier3DStepper:
    """Algorithm-2 time stepper: per-mode 2D solves plus FFTs in z."""

    def __init__(self, grid, model, dt, J=2, sources=None, S=None, nu_m=None,
                 eps_bar0=None, rho0=None, electrode_values=None,
                 tol_fp=1e-10, max_fp=1000):
        self.grid = grid
        self.mesh = grid.mesh
        self.model = model
        self.dt = float(dt)
        self.J = int(J)
        self.sources = sources if sources is not None else ZeroSources3D()
        self.eps_bar0 = model.eps_bar0() if eps_bar0 is None else float(eps_bar0)
        self.rho0 = model.rho0() if rho0 is None else float(rho0)
        self.nu_m = model.nu_m_default() if nu_m is None else float(nu_m)
        self.electrode_values = electrode_values
        self.tol_fp, self.max_fp = tol_fp, max_fp

        gmax = BdfScheme(self.J).gamma0
        smin = min_stabilization(model.eta, model.lam, model.gamma1, self.dt, gmax)
        self.S = smin if S is None else float(S)
        self.alpha = {}
        for j in {1, self.J}:
            g0 = BdfScheme(j).gamma0
            self.alpha[j] = stabilization_alpha(self.S, model.eta, model.lam,
                                                model.gamma1, self.dt, g0)

        self.cache = OperatorCache()
        self.n = 0
        self.t = 0.0
        self.fields = {}
        self.prev = {}
        self.E = None
        self.psi = None

    # operators ------------------------------------------------------------------

    def _op_V(self, k):
        b2 = self.grid.beta[k] ** 2
        return self.cache.get(self.mesh, helm=b2, dirichlet=self.mesh.se_dofs,
                              scale=self.eps_bar0, pin=(k == 0),
                              label=f"potential[|k|={k}]")

    def _op_psi(self, k, J):
        c = self.alpha[J] + self.S / self.model.eta**2 + self.grid.beta[k] ** 2
        return self.cache.get(self.mesh, helm=c, label=f"psi[|k|={k},J={J}]")

    def _op_phi(self, k, J):
        c = -self.alpha[J] + self.grid.beta[k] ** 2
        return self.cache.get(self.mesh, helm=c, label=f"phi[|k|={k},J={J}]")

    def _op_P(self, k):
        b2 = self.grid.beta[k] ** 2
        return self.cache.get(self.mesh, helm=b2, dirichlet=self.mesh.open_dofs,
                              pin=(k == 0), label=f"pressure[|k|={k}]")

    def _op_u(self, k, J):
        g0 = BdfScheme(J).gamma0
        c = self.grid.beta[k] ** 2 + g0 / (self.nu_m * self.dt)
        return self.cache.get(self.mesh, helm=c, dirichlet=self.mesh.wall_dofs,
                              label=f"velocity[|k|={k},J={J}]")

    # helpers ----------------------------------------------------------------------

    def _wall_sides(self):
        return ("bottom",) + (() if self.mesh.open_top else ("top",))

    def _electrode_phys(self, t):
        """Electrode Dirichlet values on the physical (dof, z) grid."""
        mesh, grid = self.mesh, self.grid
        vals = np.zeros((mesh.ndof, grid.Nz))
        if mesh.se_dofs.size:
            if self.electrode_values is None:
                vals[mesh.se_dofs, :] = mesh.se_voltages[:, None]
            else:
                x = mesh.x[mesh.se_dofs][:, None] + 0.0 * grid.z[None, :]
                y = mesh.y[mesh.se_dofs][:, None] + 0.0 * grid.z[None, :]
                z = 0.0 * x + grid.z[None, :]
                vals[mesh.se_dofs, :] = self.electrode_values(x, y, z, t)
        return vals

    def _solve_modes(self, op_of_k, rhs_modes, dirichlet_modes=None):
        """Solve every non-negative mode; returns the mode stack (ndof, nmodes)."""
        out = np.zeros(rhs_modes.shape, dtype=complex)
        for k in range(self.grid.nmodes):
            dv = None if dirichlet_modes is None else dirichlet_modes[:, k]
            out[:, k] = op_of_k(k).solve(rhs_modes[:, k], dirichlet_values=dv)
        return out

    def _project_gradient(self, V):
        grid = self.grid
        dx_e, dy_e, _ = grid.elem_grad(V)
        Ex = grid.project_elem(dx_e)
        Ey = grid.project_elem(dy_e)
        Ez = -grid.dz(V)  # sign follows the mode-space definition -i beta_k V_k
        return Ex, Ey, Ez

    # substeps ------------------------------------------------------------------------

    def step_potential(self, phi_star, V_star, t1):
        grid, model = self.grid, self.model
        eps_e = model.eps(grid.gather(phi_star)) - self.eps_bar0
        vx_e, vy_e, _ = grid.elem_grad(V_star)
        load = -grid.grad_load(eps_e * vx_e, eps_e * vy_e)
        load -= self.mesh.mass[:, None] * grid.nodal(self.sources.f_V, t1)
        Rz = model.eps(phi_star) - self.eps_bar0
        Rz = Rz * grid.dz(V_star)
        rhs = grid.rfft(load)
        # z part of -∫R·∇ω with the test gradient -i beta_k w: +i beta_k M Rz_k
        rhs += (1j * grid.beta)[None, :] * (self.mesh.mass[:, None] * grid.rfft(Rz))
        dmodes = grid.rfft(self._electrode_phys(t1))
        V = grid.irfft(self._solve_modes(self._op_V, rhs, dmodes))
        return V, self._project_gradient(V)

    def init_potential(self, phi0, t=0.0):
        grid = self.grid
        V = np.zeros((self.mesh.ndof, grid.Nz))
        for _ in range(self.max_fp):
            Vn, E = self.step_potential(phi0, V, t)
            diff = np.max(np.abs(Vn - V))
            V = Vn
            if diff < self.tol_fp * max(np.max(np.abs(V)), 1e-300):
                return V, E
        raise InitializationError(
            f"3D potential fixed point stalled at residual {diff:.3e}")

    def step_phase(self, J, phi_star, u_star, phi_hat, e2, t1):
        grid, model, mesh = self.grid, self.model, self.mesh
        lamg = model.lam * model.gamma1
        cpsi = self.alpha[J] + self.S / model.eta**2

        phi_s_e = grid.gather(phi_star)
        px_e, py_e, pz_e = grid.elem_grad(phi_star)
        us_e = [grid.gather(c) for c in u_star]
        g_e = grid.gather(grid.nodal(self.sources.g, t1))
        Q1_e = (g_e - (us_e[0] * px_e + us_e[1] * py_e + us_e[2] * pz_e)
                + grid.gather(phi_hat) / self.dt) / lamg
        e2_e = grid.gather(e2)
        Q2_e = model.h(phi_s_e) - (self.S / model.eta**2) * phi_s_e \
            - model.eps_prime(phi_s_e) / (2.0 * model.lam) * e2_e
        q2x_e = np.einsum("qa,eabz->eqbz", mesh.rule.diff, Q2_e) \
            * mesh.scale_x[:, None, None, None]
        q2y_e = np.einsum("qb,eabz->eaqz", mesh.rule.diff, Q2_e) \
            * mesh.scale_y[:, None, None, None]

        load = -grid.mass_load_elem(Q1_e) + grid.grad_load(q2x_e, q2y_e)
        Q2_load = grid.mass_load_elem(Q2_e)  # carries the beta_k^2 weight in mode space

        walls = {}
        bl = np.zeros((mesh.ndof, grid.Nz))
        if mesh.open_top:
            xb, yb, zb = grid.edge_coords("top")
            g1 = self.sources.g1_open(xb, yb, zb, t1)
            g2 = self.sources.g2(xb, yb, zb, t1)
            bl += grid.edge_mass_load("top", g1 + cpsi * g2)
        for side in self._wall_sides():
            xb, yb, zb = grid.edge_coords(side)
            g1 = self.sources.g1_wall(xb, yb, zb, t1)
            g3 = self.sources.g3(xb, yb, zb, t1)
            U = -g3 - model.wall_energy_prime(
                grid.edge_values(side, phi_star)) / model.lam
            walls[side] = U
            bl += grid.edge_mass_load(side, g1 + cpsi * U)

        rhs = grid.rfft(load + bl)
        rhs += (grid.beta**2)[None, :] * grid.rfft(Q2_load)
        psi = grid.irfft(self._solve_modes(lambda k: self._op_psi(k, J), rhs))

        load = -self.mesh.mass[:, None] * psi
        if mesh.open_top:
            xb, yb, zb = grid.edge_coords("top")
            load += grid.edge_mass_load("top", self.sources.g2(xb, yb, zb, t1))
        for side in self._wall_sides():
            load += grid.edge_mass_load(side, walls[side])
        phi = grid.irfft(self._solve_modes(lambda k: self._op_phi(k, J),
                                           grid.rfft(load)))
        return psi, phi

    def _shared_forcing(self, J, phi, psi, phi_star, u_star, P_star, u_hat,
                        e2, t1):
        grid, model, mesh = self.grid, self.model, self.mesh
        alpha = self.alpha[J]

        phi_e = grid.gather(phi)
        phi_s_e = grid.gather(phi_star)
        gphi = grid.elem_grad(phi)
        rho_e = model.rho(phi_e)
        mu_e = model.mu(phi_e)
        e2_e = grid.gather(e2)
        lapphi_e = grid.gather(psi) - alpha * phi_e

        br_e = lapphi_e - (self.S / model.eta**2) * (phi_e - phi_s_e) \
            - model.h(phi_s_e) \
            + model.eps_prime(phi_s_e) / (2.0 * model.lam) * e2_e
        br = grid.project_elem(br_e)  # continuous by construction; cheap to re-nodalize
        jfac = 0.5 * (model.rho1 - model.rho2) * model.lam * model.gamma1
        jx_e, jy_e, jz_e = (jfac * c for c in grid.elem_grad(br))

        us_e = [grid.gather(c) for c in u_star]
        gu = [grid.elem_grad(c) for c in u_star]   # gu[i] = (dx, dy, dz) of comp i
        omega_e = (gu[2][1] - gu[1][2], gu[0][2] - gu[2][0], gu[1][0] - gu[0][1])

        f_nodal = self.sources.f(
            mesh.x[:, None] + 0.0 * grid.z[None, :],
            mesh.y[:, None] + 0.0 * grid.z[None, :],
            0.0 * mesh.x[:, None] + grid.z[None, :], t1)
        f_e = [grid.gather(c) for c in f_nodal]
        mup = 0.5 * (model.mu1 - model.mu2)
        gmu = [mup * c for c in gphi]
        epsp_e = model.eps_prime(phi_e)
        gP = grid.elem_grad(P_star)
        uhat_e = [grid.gather(c) for c in u_hat]

        inv_rho = 1.0 / rho_e
        T = []
        for i in range(3):
            Drow = [gu[i][j] + gu[j][i] for j in range(3)]
            gmu_dot_D = gmu[0] * Drow[0] + gmu[1] * Drow[1] + gmu[2] * Drow[2]
            JdotG = jx_e * gu[i][0] + jy_e * gu[i][1] + jz_e * gu[i][2]
            conv = us_e[0] * gu[i][0] + us_e[1] * gu[i][1] + us_e[2] * gu[i][2]
            Ti = (f_e[i] - model.lam * lapphi_e * gphi[i]
                  - 0.5 * epsp_e * e2_e * gphi[i] + gmu_dot_D - JdotG) * inv_rho \
                + uhat_e[i] / self.dt - conv \
                + (1.0 / self.rho0 - inv_rho) * gP[i]
            T.append(Ti)

        mor_e = mu_e * inv_rho
        mor = grid.project_elem(mor_e)
        gmor = grid.elem_grad(mor)
        G = [T[0] + (gmor[1] * omega_e[2] - gmor[2] * omega_e[1]),
             T[1] + (gmor[2] * omega_e[0] - gmor[0] * omega_e[2]),
             T[2] + (gmor[0] * omega_e[1] - gmor[1] * omega_e[0])]
        return G, omega_e, mor_e

    def step_pressure(self, J, G, omega_e, mor_e, t1):
        grid, mesh = self.grid, self.mesh
        g0 = BdfScheme(J).gamma0
        load = self.rho0 * grid.grad_load(G[0], G[1])
        zload = np.zeros((mesh.ndof, grid.Nz))
        zload += self.rho0 * grid.mass_load_elem(G[2])

        eload = np.zeros((mesh.ndof, grid.Nz))
        ezload = np.zeros((mesh.ndof, grid.Nz))
        for side in self._wall_sides():
            ny = mesh.edge_normal_y(side)
            oz = grid.edge_slice(side, omega_e[2])
            ox = grid.edge_slice(side, omega_e[0])
            mo = grid.edge_slice(side, mor_e)
            # n x omega with n = (0, ny, 0): (ny w_z, 0, -ny w_x)
            eload += grid.edge_grad_load(side, ny * mo * oz, np.zeros_like(oz))
            ezload += grid.edge_mass_load(side, -ny * mo * ox)
            xb, yb, zb = grid.edge_coords(side)
            wvals = self.sources.w(xb, yb, zb, t1)
            load -= (self.rho0 * g0 / self.dt) * grid.edge_mass_load(
                side, ny * wvals[1])
        load -= self.rho0 * eload

        rhs = grid.rfft(load)
        # -i beta_k rho0 ∫G_z v  and  +i beta_k rho0 ∮J_z v
        rhs += (-1j * grid.beta)[None, :] * grid.rfft(zload)
        rhs += (1j * grid.beta)[None, :] * self.rho0 * grid.rfft(ezload)

        dmodes = None
        if mesh.open_dofs.size:
            dvals = np.zeros((mesh.ndof, grid.Nz))
            od = mesh.open_dofs
            x = mesh.x[od][:, None] + 0.0 * grid.z[None, :]
            y = mesh.y[od][:, None] + 0.0 * grid.z[None, :]
            z = 0.0 * x + grid.z[None, :]
            dvals[od, :] = self.sources.f2(x, y, z, t1)
            dmodes = grid.rfft(dvals)
        P = grid.irfft(self._solve_modes(self._op_P, rhs, dmodes))
        return P

    def step_velocity(self, J, G, omega_e, mor_e, P, t1):
        grid, mesh = self.grid, self.mesh
        gPx, gPy, gPz = grid.elem_grad(P)
        Y = [G[0] - gPx / self.rho0, G[1] - gPy / self.rho0,
             G[2] - gPz / self.rho0]
        K = [(mor_e - self.nu_m) * c for c in omega_e]
        inv = 1.0 / self.nu_m
        zero = np.zeros_like(K[0])

        # volume loads: (1/nu) M Y_c plus the K x grad(v) pieces
        loads = [inv * grid.mass_load_elem(Y[0])
                 + inv * grid.grad_load(zero, K[2]),
                 inv * grid.mass_load_elem(Y[1])
                 - inv * grid.grad_load(K[2], zero),
                 inv * grid.mass_load_elem(Y[2])
                 - inv * grid.grad_load(-K[1], K[0])]
        # i beta_k parts: +i b (1/nu) M K_y for x, -i b (1/nu) M K_x for y
        ibx = inv * grid.mass_load_elem(K[1])
        iby = -inv * grid.mass_load_elem(K[0])

        if mesh.open_top:
            xb, yb, zb = grid.edge_coords("top")
            f1 = self.sources.f1(xb, yb, zb, t1)
            oz = grid.edge_slice("top", omega_e[2])
            ox = grid.edge_slice("top", omega_e[0])
            mo = grid.edge_slice("top", mor_e)
            # L = (mu/rho - nu)(n x omega), n = (0,1,0): (w_z, 0, -w_x)
            loads[0] += grid.edge_mass_load("top", f1[0] - inv * (mo - self.nu_m) * oz)
            loads[1] += grid.edge_mass_load("top", f1[1])
            loads[2] += grid.edge_mass_load("top", f1[2] + inv * (mo - self.nu_m) * ox)

        dmodes = [None] * 3
        if mesh.wall_dofs.size:
            wd = mesh.wall_dofs
            x = mesh.x[wd][:, None] + 0.0 * grid.z[None, :]
            y = mesh.y[wd][:, None] + 0.0 * grid.z[None, :]
            z = 0.0 * x + grid.z[None, :]
            wvals = self.sources.w(x, y, z, t1)
            for c in range(3):
                dv = np.zeros((mesh.ndof, grid.Nz))
                dv[wd, :] = wvals[c]
                dmodes[c] = grid.rfft(dv)

        out = []
        for c in range(3):
            rhs = grid.rfft(loads[c])
            if c == 0:
                rhs += (1j * grid.beta)[None, :] * grid.rfft(ibx)
            elif c == 1:
                rhs += (1j * grid.beta)[None, :] * grid.rfft(iby)
            out.append(grid.irfft(self._solve_modes(
                lambda k: self._op_u(k, J), rhs, dmodes[c])))
        return out

    # full step --------------------------------------------------------------------------

    def set_initial(self, phi0, u0=None, P0=None, V0=None):
        grid = self.grid
        shape = (self.mesh.ndof, grid.Nz)
        z3 = lambda: np.zeros(shape)
        f = {"phi": np.array(phi0, dtype=float)}
        u0 = (z3(), z3(), z3()) if u0 is None else tuple(
            np.array(c, dtype=float) for c in u0)
        f["u"], f["v"], f["w"] = u0
        f["P"] = z3() if P0 is None else np.array(P0, dtype=float)
        if V0 is None:
            f["V"], self.E = self.init_potential(f["phi"])
        else:
            f["V"] = np.array(V0, dtype=float)
            self.E = self._project_gradient(f["V"])
        self.fields = f
        self.prev = {k: v.copy() for k, v in f.items()}
        self.n = 0
        self.t = 0.0

    def advance(self):
        J = 1 if self.n == 0 else self.J
        bdf = BdfScheme(J)
        f, p = self.fields, self.prev
        t1 = self.t + self.dt

        star = {k: bdf.star(f[k], p[k]) for k in f}
        phi_hat = bdf.hat(f["phi"], p["phi"])
        u_hat = [bdf.hat(f[c], p[c]) for c in ("u", "v", "w")]
        u_star = [star[c] for c in ("u", "v", "w")]

        V, E = self.step_potential(star["phi"], star["V"], t1)
        e2 = E[0] ** 2 + E[1] ** 2 + E[2] ** 2
        psi, phi = self.step_phase(J, star["phi"], u_star, phi_hat, e2, t1)
        G, omega_e, mor_e = self._shared_forcing(
            J, phi, psi, star["phi"], u_star, star["P"], u_hat, e2, t1)
        P = self.step_pressure(J, G, omega_e, mor_e, t1)
        u = self.step_velocity(J, G, omega_e, mor_e, P, t1)

        self.prev = f
        self.fields = {"u": u[0], "v": u[1], "w": u[2], "P": P,
                       "phi": phi, "V": V}
        self.E = E
        self.psi = psi
        self.n += 1
        self.t = t1
        return self.fields

    def run(self, nsteps):
        for _ in range(nsteps):
            self.advance()
        return self.fields

    def phase_mass(self):
        return self.grid.integrate(self.fields["phi"])

    def max_speed(self):
        return float(np.sqrt(np.max(self.fields["u"] ** 2
                                    + self.fields["v"] ** 2
                                    + self.fields["w"] ** 2)))

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
        self.fields = {k[4:]: state[k].copy() for k in state
                       if k.startswith("cur_")}
        self.prev = {k[5:]: state[k].copy() for k in state
                     if k.startswith("prev_")}
        self.E = self._project_gradient(self.fields["V"])
