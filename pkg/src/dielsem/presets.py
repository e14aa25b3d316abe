"""Normalized problem setups for the experiment configurations.

Each builder converts the SI parameter block of one study into normalized
meshes/models ready for the solvers:

  * thin-film equilibrium (two coplanar electrodes under a liquid film),
  * 2D drop transport over an electrode array,
  * 2D coalescence of two drops between electrodes,
  * 3D sessile-drop deformation over an electrode array.

Dynamic runs use the viscosity-based normalization; equilibrium runs use
the surface-tension-based one.
"""

import math

import numpy as np

from .fourier3d import Grid3D
from .model import EquilibriumScales, FullModelScales, MixtureModel
from .sem import build_mesh
from .theory import film_amplitude


def film_y_breaks(h0, A, Ly, n_wall=5, n_wave=4, n_upper=4, growth=2.0):
    """Element rows for film runs: uniform below and across the expected
    wave band, geometrically graded above it."""
    lo, hi = h0 - 0.5 * A, h0 + 0.5 * A
    breaks = [lo * i / n_wall for i in range(1, n_wall + 1)]
    breaks += [lo + (hi - lo) * i / n_wave for i in range(1, n_wave)]
    breaks.append(hi)
    span = Ly - hi
    weights = np.cumsum(growth ** np.arange(n_upper))
    breaks += [hi + span * w / weights[-1] for w in weights[:-1]]
    return breaks


def film_problem(V0_volt, h0_m=14e-6, p_m=160e-6, eps_ratio=8.0,
                 gamma=2.84e-2, eta=0.01, K=12, Vd=100.0,
                 lam_gamma1=0.1, wave_estimate=None):
    """Thin-film equilibrium setup; returns (mesh, model, scales, meta).

    Lengths normalize by half the electrode width, so the domain is always
    [0,8] x [0,5] with electrodes on [1,3] (grounded) and [5,7] (at V0).
    """
    d = 0.5 * p_m
    L0 = 0.5 * d
    sc = EquilibriumScales(L0=L0, Vd=Vd, gamma=gamma)
    h0 = h0_m / L0
    A = wave_estimate
    if A is None:
        # 1.4x margin: simulated waves overshoot the closed-form estimate,
        # and the refined band must contain the actual peaks
        A = 1.4 * film_amplitude(gamma, (eps_ratio - 1.0), h0_m, p_m,
                                 max(V0_volt, 100.0)) / L0
        A = min(max(A, 0.02), 0.5 * h0)
    breaks = film_y_breaks(h0, A, 5.0)
    mesh = build_mesh(8.0, 5.0, 8, breaks, K,
                      electrodes=[(1.0, 3.0, 0.0), (5.0, 7.0, V0_volt / Vd)])
    eps1 = sc.normalize("eps", 1.0 * 8.85418781e-12)
    model = MixtureModel.equilibrium(eps1=eps1, eps2=eps_ratio * eps1,
                                     sigma=1.0, eta=eta,
                                     gamma1=lam_gamma1 / (1.0606601717798212 * eta))
    meta = {"h0": h0, "L0": L0, "A_est": A, "Vd": Vd}
    return mesh, model, sc, meta


def film_initial(mesh, model, h0):
    return np.tanh((mesh.y - h0) / (math.sqrt(2.0) * model.eta))


def drop_transport_problem(K=12, eta=0.01, V0=300.0):
    """2D drop pulled toward an electrode array; returns (mesh, model, scales, meta)."""
    L0, mu1 = 1e-3, 12.048e-4
    sc = FullModelScales(L0=L0, Vd=V0, mu0=mu1)
    rho = sc.normalize("rho", 429.7)
    model = MixtureModel(rho1=rho, rho2=rho, mu1=1.0, mu2=2.0,
                         eps1=1.0, eps2=8.1,
                         sigma=sc.normalize("sigma", 2.84e-2), eta=eta,
                         gamma1=5e-6, theta_s=math.pi / 2.0)
    mesh = build_mesh(1.6, 0.5, 16, [0.125, 0.25, 0.375], K,
                      electrodes=[(0.1, 0.2, -1.0), (0.3, 0.4, 1.0),
                                  (0.5, 0.6, -1.0), (0.7, 0.8, 1.0)])
    meta = {"dt": 1e-6, "center": (1.2, 0.0), "radius": 0.35, "pitch": 0.2,
            "array_right_edge": 0.8}
    return mesh, model, sc, meta


def drop_transport_initial(mesh, model, meta):
    x0, y0 = meta["center"]
    r = np.hypot(mesh.x - x0, mesh.y - y0)
    return np.tanh((r - meta["radius"]) / (math.sqrt(2.0) * model.eta))


def coalescence_problem(K=12, eta=0.007, V0=300.0):
    """Two circular-cap drops pulled together by a central electrode pair."""
    L0, mu1 = 1e-3, 12.048e-4
    sc = FullModelScales(L0=L0, Vd=V0, mu0=mu1)
    rho = sc.normalize("rho", 129.7)
    model = MixtureModel(rho1=rho, rho2=rho, mu1=1.0, mu2=2.0,
                         eps1=1.0, eps2=8.1,
                         sigma=sc.normalize("sigma", 1.136e-1), eta=eta,
                         gamma1=5e-6, theta_s=math.radians(75.0))
    mesh = build_mesh(2.0, 0.4, 20, [0.1, 0.2, 0.3], K,
                      electrodes=[(0.8, 0.9, 1.0), (1.0, 1.1, -1.0)])
    meta = {"dt": 1e-6, "X1": 0.6, "X2": 1.4}
    return mesh, model, sc, meta


def coalescence_initial(mesh, model, meta):
    theta = model.theta_s
    R0 = 0.3 / math.sin(theta)
    Yc = -R0 * math.cos(theta)
    se = math.sqrt(2.0) * model.eta
    d1 = np.hypot(mesh.x - meta["X1"], mesh.y - Yc) - R0
    d2 = np.hypot(mesh.x - meta["X2"], mesh.y - Yc) - R0
    return np.tanh(d1 / se) + np.tanh(d2 / se) - 1.0


def drop3d_problem(V0_volt, K=6, Nz=32, eta=0.04, y_breaks=(0.15, 0.3, 0.45),
                   Vd=100.0, lam_gamma1=0.1):
    """3D sessile drop over an electrode array along z; equilibrium setup."""
    L0 = 1.2e-3
    gamma = 3.857e-2
    sc = EquilibriumScales(L0=L0, Vd=Vd, gamma=gamma)
    Lx, Ly, Lz = 5.0 / 3.0, 2.0 / 3.0, 3.5
    nx = 20
    width = Lx / nx  # one electrode or one gap per element column
    electrodes = []
    sign = 1.0
    for i in range(0, nx, 2):
        electrodes.append((i * width, (i + 1) * width, sign * V0_volt / Vd))
        sign = -sign
    mesh = build_mesh(Lx, Ly, nx, list(y_breaks), K, electrodes=electrodes)
    grid = Grid3D(mesh, Nz, Lz)
    eps1 = sc.normalize("eps", 8.85418781e-12)
    model = MixtureModel.equilibrium(eps1=eps1, eps2=32.0 * eps1,
                                     sigma=1.0, eta=eta,
                                     gamma1=lam_gamma1 / (1.0606601717798212 * eta))
    meta = {"center": (5.0 / 6.0, 0.0, 7.0 / 4.0), "radius": 0.5, "Vd": Vd}
    return grid, model, sc, meta


def drop3d_initial(grid, model, meta):
    mesh = grid.mesh
    x = mesh.x[:, None] + 0.0 * grid.z[None, :]
    y = mesh.y[:, None] + 0.0 * grid.z[None, :]
    z = 0.0 * x + grid.z[None, :]
    X0, Y0, Z0 = meta["center"]
    r = np.sqrt((x - X0) ** 2 + (y - Y0) ** 2 + (z - Z0) ** 2)
    return np.tanh((r - meta["radius"]) / (math.sqrt(2.0) * model.eta))
