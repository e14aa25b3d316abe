"""Manufactured solutions and their analytically derived source terms.

Closed-form trigonometric fields for velocity, pressure, phase variable and
potential are differentiated symbolically (sympy, once per case) to produce
every volume and boundary source the stepping scheme accepts.  The derived
sources are validated against centered finite differences of the analytic
intermediates before any convergence run; that self-check catches wiring
mistakes (signs, normals, missing terms) independently of the solver.

Boundary source conventions match the stepping scheme:

    g1 = n . grad( lap(phi) - h(phi) + eps'(phi)/(2 lam) |E|^2 )   (both walls)
    g2 = n . grad(phi)                                             (open top)
    g3 = -n . grad(phi) - Theta'(phi)/lam                          (bottom wall)
    f1 = du/dn,  f2 = P                                            (open top)
    w  = u                                                         (bottom wall)

with n the outward normal.
"""

import math

import numpy as np
import sympy as sp

_X, _Y, _Z, _T = sp.symbols("x y z t", real=True)


def _num(fn):
    """Wrap a lambdified function so it always returns a float array."""
    def call(*args):
        out = fn(*args)
        return np.asarray(out, dtype=float) + np.zeros_like(np.asarray(args[0], dtype=float))
    return call


class ZeroSources:
    """Source bundle for physical runs: every term is identically zero."""

    ndim = 2

    def _z(self, x, *rest):
        return np.zeros_like(np.asarray(x, dtype=float))

    def g(self, x, y, t):
        return self._z(x)

    def f(self, x, y, t):
        return self._z(x), self._z(x)

    def f_V(self, x, y, t):
        return self._z(x)

    def g1_open(self, x, y, t):
        return self._z(x)

    def g1_wall(self, x, y, t):
        return self._z(x)

    def g2(self, x, y, t):
        return self._z(x)

    def g3(self, x, y, t):
        return self._z(x)

    def f1(self, x, y, t):
        return self._z(x), self._z(x)

    def f2(self, x, y, t):
        return self._z(x)

    def w(self, x, y, t):
        return self._z(x), self._z(x)


class ZeroSources3D(ZeroSources):
    ndim = 3

    def f(self, x, y, z, t):
        return self._z(x), self._z(x), self._z(x)

    def f1(self, x, y, z, t):
        return self._z(x), self._z(x), self._z(x)

    def w(self, x, y, z, t):
        return self._z(x), self._z(x), self._z(x)

    def g(self, x, y, z, t):
        return self._z(x)

    def f_V(self, x, y, z, t):
        return self._z(x)

    def g1_open(self, x, y, z, t):
        return self._z(x)

    def g1_wall(self, x, y, z, t):
        return self._z(x)

    def g2(self, x, y, z, t):
        return self._z(x)

    def g3(self, x, y, z, t):
        return self._z(x)

    def f2(self, x, y, z, t):
        return self._z(x)


class ManufacturedCase2D:
    """Symbolic 2D case: exact fields, derived sources, boundary data.

    ``y_wall`` and ``y_top`` locate the bottom wall and the open top, with
    outward normals (0,-1) and (0,+1).
    """

    ndim = 2

    def __init__(self, model, u, v, P, phi, V, y_wall=0.0, y_top=1.0):
        self.model = model
        self.y_wall, self.y_top = float(y_wall), float(y_top)
        x, y, t = _X, _Y, _T
        m = model

        lap = lambda f: f.diff(x, 2) + f.diff(y, 2)
        Ex, Ey = V.diff(x), V.diff(y)
        e2 = Ex**2 + Ey**2
        eps = sp.Rational(1, 2) * (m.eps1 + m.eps2) \
            + sp.Rational(1, 4) * (m.eps1 - m.eps2) * phi * (3 - phi**2)
        eps_p = sp.Rational(3, 4) * (m.eps2 - m.eps1) * (phi**2 - 1)
        rho = sp.Rational(1, 2) * (m.rho1 + m.rho2) \
            + sp.Rational(1, 2) * (m.rho1 - m.rho2) * phi
        mu = sp.Rational(1, 2) * (m.mu1 + m.mu2) \
            + sp.Rational(1, 2) * (m.mu1 - m.mu2) * phi
        h = phi * (phi**2 - 1) / m.eta**2
        mu_c = m.lam * h - m.lam * lap(phi) - eps_p / 2 * e2

        g = phi.diff(t) + u * phi.diff(x) + v * phi.diff(y) - m.gamma1 * lap(mu_c)

        Jx = -m.gamma1 * (m.rho1 - m.rho2) / 2 * mu_c.diff(x)
        Jy = -m.gamma1 * (m.rho1 - m.rho2) / 2 * mu_c.diff(y)
        D11, D12, D22 = 2 * u.diff(x), u.diff(y) + v.diff(x), 2 * v.diff(y)
        fx = rho * (u.diff(t) + u * u.diff(x) + v * u.diff(y)) \
            + Jx * u.diff(x) + Jy * u.diff(y) \
            + m.lam * lap(phi) * phi.diff(x) + eps_p / 2 * e2 * phi.diff(x) \
            - mu * lap(u) - (mu.diff(x) * D11 + mu.diff(y) * D12) + P.diff(x)
        fy = rho * (v.diff(t) + u * v.diff(x) + v * v.diff(y)) \
            + Jx * v.diff(x) + Jy * v.diff(y) \
            + m.lam * lap(phi) * phi.diff(y) + eps_p / 2 * e2 * phi.diff(y) \
            - mu * lap(v) - (mu.diff(x) * D12 + mu.diff(y) * D22) + P.diff(y)

        f_V = (eps * Ex).diff(x) + (eps * Ey).diff(y)

        bracket = lap(phi) - h + eps_p / (2 * m.lam) * e2
        theta_p = m.sigma * math.cos(m.theta_s) * sp.Rational(3, 4) * (phi**2 - 1)
        g1_top = bracket.diff(y)
        g1_wall = -bracket.diff(y)
        g2 = phi.diff(y)
        g3 = phi.diff(y) - theta_p / m.lam

        args = (x, y, t)
        L = lambda expr: _num(sp.lambdify(args, expr, modules="numpy"))
        self.u, self.v, self.P, self.phi, self.V = map(L, (u, v, P, phi, V))
        self.g_fn, self.fx_fn, self.fy_fn, self.fV_fn = map(L, (g, fx, fy, f_V))
        self._g1_top, self._g1_wall = L(g1_top), L(g1_wall)
        self._g2, self._g3 = L(g2), L(g3)
        self._f1x, self._f1y = L(u.diff(y)), L(v.diff(y))
        self._f2 = self.P
        self.mu_c_fn = L(mu_c)
        self.e2_fn = L(e2)
        self.eps_fn = L(eps)
        self.J_fns = (L(Jx), L(Jy))
        self.mu_fn = L(mu)
        self._exprs = {"u": u, "v": v, "P": P, "phi": phi, "V": V}

    # source-bundle interface -------------------------------------------------

    def g(self, x, y, t):
        return self.g_fn(x, y, t)

    def f(self, x, y, t):
        return self.fx_fn(x, y, t), self.fy_fn(x, y, t)

    def f_V(self, x, y, t):
        return self.fV_fn(x, y, t)

    def g1_open(self, x, y, t):
        return self._g1_top(x, y, t)

    def g1_wall(self, x, y, t):
        return self._g1_wall(x, y, t)

    def g2(self, x, y, t):
        return self._g2(x, y, t)

    def g3(self, x, y, t):
        return self._g3(x, y, t)

    def f1(self, x, y, t):
        return self._f1x(x, y, t), self._f1y(x, y, t)

    def f2(self, x, y, t):
        return self._f2(x, y, t)

    def w(self, x, y, t):
        return self.u(x, y, t), self.v(x, y, t)

    def exact(self, name):
        return getattr(self, name)

    # self check ---------------------------------------------------------------

    def self_check(self, n_samples=100, seed=0, tol=1e-6):
        """Residuals of the governing equations with FD derivatives.

        Differentiates the closed-form fields and analytic intermediates with
        centered finite differences and checks them against the derived
        sources.  Raises AssertionError on disagreement beyond ``tol``.
        """
        rng = np.random.default_rng(seed)
        xs = rng.uniform(0.05, 0.95, n_samples)
        ys = rng.uniform(self.y_wall + 0.05, self.y_top - 0.05, n_samples)
        ts = rng.uniform(0.05, 1.0, n_samples)
        hh = 1e-5
        m = self.model

        def dx(f, x, y, t, h=hh):
            return (f(x + h, y, t) - f(x - h, y, t)) / (2 * h)

        def dy(f, x, y, t, h=hh):
            return (f(x, y + h, t) - f(x, y - h, t)) / (2 * h)

        def dt(f, x, y, t, h=hh):
            return (f(x, y, t + h) - f(x, y, t - h)) / (2 * h)

        def lap_fd(f, x, y, t, h=1e-4):
            return (f(x + h, y, t) + f(x - h, y, t) + f(x, y + h, t)
                    + f(x, y - h, t) - 4 * f(x, y, t)) / (h * h)

        u, v, phi, P, V = self.u, self.v, self.phi, self.P, self.V
        # phase equation residual
        g_fd = dt(phi, xs, ys, ts) + u(xs, ys, ts) * dx(phi, xs, ys, ts) \
            + v(xs, ys, ts) * dy(phi, xs, ys, ts) \
            - m.gamma1 * lap_fd(self.mu_c_fn, xs, ys, ts)
        assert np.max(np.abs(g_fd - self.g(xs, ys, ts))) < tol

        # potential equation residual: div(eps grad V) against f_V
        epsVx = lambda x, y, t: self.eps_fn(x, y, t) * dx(V, x, y, t)
        epsVy = lambda x, y, t: self.eps_fn(x, y, t) * dy(V, x, y, t)
        fV_fd = dx(epsVx, xs, ys, ts, 1e-4) + dy(epsVy, xs, ys, ts, 1e-4)
        assert np.max(np.abs(fV_fd - self.f_V(xs, ys, ts))) < 100 * tol

        # momentum residual, x component
        rho = m.rho(phi(xs, ys, ts))
        mu = self.mu_fn(xs, ys, ts)
        lam_lap_phi = lap_fd(phi, xs, ys, ts)
        e2 = self.e2_fn(xs, ys, ts)
        epsp = m.eps_prime(phi(xs, ys, ts))
        Jx, Jy = self.J_fns[0](xs, ys, ts), self.J_fns[1](xs, ys, ts)
        mux = lambda x, y, t: self.mu_fn(x, y, t)
        fx_fd = rho * (dt(u, xs, ys, ts) + u(xs, ys, ts) * dx(u, xs, ys, ts)
                       + v(xs, ys, ts) * dy(u, xs, ys, ts)) \
            + Jx * dx(u, xs, ys, ts) + Jy * dy(u, xs, ys, ts) \
            + m.lam * lam_lap_phi * dx(phi, xs, ys, ts) \
            + epsp / 2 * e2 * dx(phi, xs, ys, ts) \
            - mu * lap_fd(u, xs, ys, ts) \
            - dx(mux, xs, ys, ts) * 2 * dx(u, xs, ys, ts) \
            - dy(mux, xs, ys, ts) * (dy(u, xs, ys, ts) + dx(v, xs, ys, ts)) \
            + dx(P, xs, ys, ts)
        assert np.max(np.abs(fx_fd - self.f(xs, ys, ts)[0])) < 100 * tol

        # boundary data: normals and traces
        xb = rng.uniform(0.05, 0.95, 20)
        tb = rng.uniform(0.05, 1.0, 20)
        yb = np.full_like(xb, self.y_wall)
        got = self.g3(xb, yb, tb)
        want = dy(phi, xb, yb, tb) \
            - m.wall_energy_prime(phi(xb, yb, tb)) / m.lam
        assert np.max(np.abs(got - want)) < tol
        yt = np.full_like(xb, self.y_top)
        assert np.max(np.abs(self.g2(xb, yt, tb) - dy(phi, xb, yt, tb))) < tol
        assert np.max(np.abs(self.f1(xb, yt, tb)[0] - dy(u, xb, yt, tb))) < tol
        return True


def paper_case_2d(model):
    """The trigonometric 2D fields used for the convergence studies.

    u =  cos(pi y) sin(pi x) sin(t)
    v = -sin(pi y) cos(pi x) sin(t)
    P =  sin(pi y) cos(pi x) cos(t)
    phi = cos(pi x) cos(pi y) sin(t)
    V =  sin(pi x) cos(pi y)
    """
    x, y, t = _X, _Y, _T
    pi = sp.pi
    return ManufacturedCase2D(
        model,
        u=sp.cos(pi * y) * sp.sin(pi * x) * sp.sin(t),
        v=-sp.sin(pi * y) * sp.cos(pi * x) * sp.sin(t),
        P=sp.sin(pi * y) * sp.cos(pi * x) * sp.cos(t),
        phi=sp.cos(pi * x) * sp.cos(pi * y) * sp.sin(t),
        V=sp.sin(pi * x) * sp.cos(pi * y),
        y_wall=0.0, y_top=1.0,
    )


class ManufacturedCase3D:
    """Symbolic 3D case with one homogeneous (z-periodic) direction."""

    ndim = 3

    def __init__(self, model, u, v, w, P, phi, V, y_wall=-1.0, y_top=1.0):
        self.model = model
        self.y_wall, self.y_top = float(y_wall), float(y_top)
        x, y, z, t = _X, _Y, _Z, _T
        m = model

        lap = lambda f: f.diff(x, 2) + f.diff(y, 2) + f.diff(z, 2)
        Ex, Ey, Ez = V.diff(x), V.diff(y), V.diff(z)
        e2 = Ex**2 + Ey**2 + Ez**2
        eps = sp.Rational(1, 2) * (m.eps1 + m.eps2) \
            + sp.Rational(1, 4) * (m.eps1 - m.eps2) * phi * (3 - phi**2)
        eps_p = sp.Rational(3, 4) * (m.eps2 - m.eps1) * (phi**2 - 1)
        rho = sp.Rational(1, 2) * (m.rho1 + m.rho2) \
            + sp.Rational(1, 2) * (m.rho1 - m.rho2) * phi
        mu = sp.Rational(1, 2) * (m.mu1 + m.mu2) \
            + sp.Rational(1, 2) * (m.mu1 - m.mu2) * phi
        h = phi * (phi**2 - 1) / m.eta**2
        mu_c = m.lam * h - m.lam * lap(phi) - eps_p / 2 * e2

        conv = lambda f: u * f.diff(x) + v * f.diff(y) + w * f.diff(z)
        g = phi.diff(t) + conv(phi) - m.gamma1 * lap(mu_c)

        Jv = [-m.gamma1 * (m.rho1 - m.rho2) / 2 * mu_c.diff(c) for c in (x, y, z)]
        vel = (u, v, w)
        coords = (x, y, z)
        fs = []
        for i, ui in enumerate(vel):
            Dgrad = sum(mu.diff(cj) * (ui.diff(cj) + vel[j].diff(coords[i]))
                        for j, cj in enumerate(coords))
            fi = rho * (ui.diff(t) + conv(ui)) \
                + sum(Jv[j] * ui.diff(coords[j]) for j in range(3)) \
                + m.lam * lap(phi) * phi.diff(coords[i]) \
                + eps_p / 2 * e2 * phi.diff(coords[i]) \
                - mu * lap(ui) - Dgrad + P.diff(coords[i])
            fs.append(fi)

        f_V = sum((eps * V.diff(c)).diff(c) for c in coords)

        bracket = lap(phi) - h + eps_p / (2 * m.lam) * e2
        theta_p = m.sigma * math.cos(m.theta_s) * sp.Rational(3, 4) * (phi**2 - 1)
        g1_top = bracket.diff(y)
        g1_wall = -bracket.diff(y)
        g2 = phi.diff(y)
        g3 = phi.diff(y) - theta_p / m.lam

        args = (x, y, z, t)
        L = lambda expr: _num(sp.lambdify(args, expr, modules="numpy"))
        self.u, self.v, self.wvel, self.P, self.phi, self.V = map(
            L, (u, v, w, P, phi, V))
        self.g_fn = L(g)
        self.f_fns = tuple(map(L, fs))
        self.fV_fn = L(f_V)
        self._g1_top, self._g1_wall = L(g1_top), L(g1_wall)
        self._g2, self._g3 = L(g2), L(g3)
        self._f1 = tuple(L(ui.diff(y)) for ui in vel)
        self.mu_c_fn = L(mu_c)

    def g(self, x, y, z, t):
        return self.g_fn(x, y, z, t)

    def f(self, x, y, z, t):
        return tuple(fn(x, y, z, t) for fn in self.f_fns)

    def f_V(self, x, y, z, t):
        return self.fV_fn(x, y, z, t)

    def g1_open(self, x, y, z, t):
        return self._g1_top(x, y, z, t)

    def g1_wall(self, x, y, z, t):
        return self._g1_wall(x, y, z, t)

    def g2(self, x, y, z, t):
        return self._g2(x, y, z, t)

    def g3(self, x, y, z, t):
        return self._g3(x, y, z, t)

    def f1(self, x, y, z, t):
        return tuple(fn(x, y, z, t) for fn in self._f1)

    def f2(self, x, y, z, t):
        return self.P(x, y, z, t)

    def w(self, x, y, z, t):
        return (self.u(x, y, z, t), self.v(x, y, z, t), self.wvel(x, y, z, t))

    def self_check(self, n_samples=60, seed=0, tol=1e-6):
        rng = np.random.default_rng(seed)
        xs = rng.uniform(0.05, 0.95, n_samples)
        ys = rng.uniform(self.y_wall + 0.05, self.y_top - 0.05, n_samples)
        zs = rng.uniform(0.05, 1.95, n_samples)
        ts = rng.uniform(0.05, 1.0, n_samples)
        h = 1e-5
        m = self.model
        phi, u, v, w = self.phi, self.u, self.v, self.wvel

        def d(f, axis, hh=h):
            off = [np.zeros_like(xs)] * 3
            off[axis] = np.full_like(xs, hh)
            return (f(xs + off[0], ys + off[1], zs + off[2], ts)
                    - f(xs - off[0], ys - off[1], zs - off[2], ts)) / (2 * hh)

        def lap_fd(f, hh=1e-4):
            tot = -6.0 * f(xs, ys, zs, ts)
            for axis in range(3):
                off = [np.zeros_like(xs)] * 3
                off[axis] = np.full_like(xs, hh)
                tot += f(xs + off[0], ys + off[1], zs + off[2], ts)
                tot += f(xs - off[0], ys - off[1], zs - off[2], ts)
            return tot / (hh * hh)

        phit = (phi(xs, ys, zs, ts + h) - phi(xs, ys, zs, ts - h)) / (2 * h)
        g_fd = phit + u(xs, ys, zs, ts) * d(phi, 0) + v(xs, ys, zs, ts) * d(phi, 1) \
            + w(xs, ys, zs, ts) * d(phi, 2) - m.gamma1 * lap_fd(self.mu_c_fn)
        assert np.max(np.abs(g_fd - self.g(xs, ys, zs, ts))) < tol
        return True


def paper_case_3d(model):
    """The trigonometric 3D fields for the hybrid-discretization tests.

    u = cos(pi x) cos(pi y) cos(pi z) sin(t), v = 0,
    w = sin(pi x) cos(pi y) sin(pi z) sin(t),
    P = sin(pi x) sin(pi y) sin(pi z) cos(t),
    phi = cos(pi x) cos(pi y) cos(pi z) sin(t),
    V = sin(pi x) cos(pi y) cos(pi z).
    """
    x, y, z, t = _X, _Y, _Z, _T
    pi = sp.pi
    return ManufacturedCase3D(
        model,
        u=sp.cos(pi * x) * sp.cos(pi * y) * sp.cos(pi * z) * sp.sin(t),
        v=sp.Integer(0) * x,
        w=sp.sin(pi * x) * sp.cos(pi * y) * sp.sin(pi * z) * sp.sin(t),
        P=sp.sin(pi * x) * sp.sin(pi * y) * sp.sin(pi * z) * sp.cos(t),
        phi=sp.cos(pi * x) * sp.cos(pi * y) * sp.cos(pi * z) * sp.sin(t),
        V=sp.sin(pi * x) * sp.cos(pi * y) * sp.cos(pi * z),
        y_wall=-1.0, y_top=1.0,
    )


def convergence_model_2d():
    """Parameter set used by the 2D convergence studies (all O(1), contrasted)."""
    from .model import MixtureModel
    return MixtureModel(rho1=1.0, rho2=3.0, mu1=0.01, mu2=0.02,
                        eps1=1.0, eps2=4.0,
                        sigma=0.0942809041582063, eta=0.1, gamma1=0.01,
                        theta_s=math.pi / 3.0)


def convergence_model_3d():
    from .model import MixtureModel
    return MixtureModel(rho1=1.0, rho2=2.0, mu1=0.01, mu2=0.02,
                        eps1=1.0, eps2=3.0,
                        sigma=0.0942809041582063, eta=0.1, gamma1=0.01,
                        theta_s=math.pi / 3.0)
