"""Convergence harness: run manufactured cases, fit rates, flag floors."""

import math

import numpy as np

from .fourier3d import Fourier3DStepper, Grid3D
from .manufactured import (convergence_model_2d, convergence_model_3d,
                           paper_case_2d, paper_case_3d)
from .model import min_stabilization
from .sem import build_mesh
from .stepper2d import Stepper2D

VARS_2D = ("u", "v", "P", "phi", "V")
VARS_3D = ("u", "v", "w", "P", "phi", "V")


def convergence_mesh_2d(K):
    """Two unit elements on [0,2]x[0,1]; wall (all electrode) below, open top."""
    return build_mesh(2.0, 1.0, 2, [], K, electrodes=[(0.0, 2.0, 0.0)])


def convergence_mesh_3d(K):
    """Two elements on [0,2]x[-1,1]; electrode under x<1, gap under x>1."""
    return build_mesh(2.0, 2.0, 2, [], K, y0=-1.0, electrodes=[(0.0, 1.0, 0.0)])


def run_case_2d(K, dt, tf, S=None, J=2, model=None, case=None):
    """Integrate the 2D manufactured problem; returns per-variable errors.

    Each entry is (Linf, L2) of the nodal error at the final time.
    """
    model = convergence_model_2d() if model is None else model
    case = paper_case_2d(model) if case is None else case
    mesh = convergence_mesh_2d(K)
    st = Stepper2D(mesh, model, dt=dt, J=J, sources=case, S=S,
                   electrode_values=lambda x, y, t: case.V(x, y, t))
    st.set_initial(phi0=case.phi(mesh.x, mesh.y, 0.0),
                   u0=case.u(mesh.x, mesh.y, 0.0),
                   v0=case.v(mesh.x, mesh.y, 0.0),
                   P0=case.P(mesh.x, mesh.y, 0.0))
    st.run(int(round(tf / dt)))
    errs = {}
    for name in VARS_2D:
        err = st.fields[name] - case.exact(name)(mesh.x, mesh.y, st.t)
        errs[name] = (float(np.max(np.abs(err))),
                      math.sqrt(mesh.integrate(err * err)))
    return errs


def run_case_3d(K, dt, tf, Nz=8, S=None, J=2, model=None, case=None):
    model = convergence_model_3d() if model is None else model
    case = paper_case_3d(model) if case is None else case
    mesh = convergence_mesh_3d(K)
    grid = Grid3D(mesh, Nz, 2.0)
    st = Fourier3DStepper(grid, model, dt=dt, J=J, sources=case, S=S,
                          electrode_values=lambda x, y, z, t: case.V(x, y, z, t))
    x = mesh.x[:, None] + 0.0 * grid.z[None, :]
    y = mesh.y[:, None] + 0.0 * grid.z[None, :]
    z = 0.0 * x + grid.z[None, :]
    st.set_initial(phi0=case.phi(x, y, z, 0.0),
                   u0=(case.u(x, y, z, 0.0), case.v(x, y, z, 0.0),
                       case.wvel(x, y, z, 0.0)),
                   P0=case.P(x, y, z, 0.0))
    st.run(int(round(tf / dt)))
    exact = {"u": case.u, "v": case.v, "w": case.wvel, "P": case.P,
             "phi": case.phi, "V": case.V}
    errs = {}
    mass3 = mesh.mass[:, None] * (grid.Lz / grid.Nz)
    for name in VARS_3D:
        err = st.fields[name] - exact[name](x, y, z, st.t)
        errs[name] = (float(np.max(np.abs(err))),
                      math.sqrt(float(np.sum(mass3 * err * err))))
    return errs


def temporal_sweep_2d(dts, K=14, tf=0.4, model=None):
    """Errors over a time-step sweep with one shared stabilization constant."""
    model = convergence_model_2d() if model is None else model
    S = min_stabilization(model.eta, model.lam, model.gamma1, min(dts), 1.5)
    return [run_case_2d(K, dt, tf, S=S, model=model) for dt in dts]


def temporal_sweep_3d(dts, K=14, tf=0.1, Nz=8, model=None):
    model = convergence_model_3d() if model is None else model
    S = min_stabilization(model.eta, model.lam, model.gamma1, min(dts), 1.5)
    return [run_case_3d(K, dt, tf, Nz=Nz, S=S, model=model) for dt in dts]


def spatial_sweep_2d(Ks, dt=1e-3, tf=0.2):
    return [run_case_2d(K, dt, tf) for K in Ks]


def spatial_sweep_3d(Ks, dt=1e-3, tf=0.1, Nz=8):
    return [run_case_3d(K, dt, tf, Nz=Nz) for K in Ks]


def fit_rate(dts, errors):
    """Least-squares slope of log(err) vs log(dt) plus its standard error."""
    x = np.log(np.asarray(dts, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    n = len(x)
    A = np.vstack([x, np.ones(n)]).T
    coef, res, _, _ = np.linalg.lstsq(A, y, rcond=None)
    slope = float(coef[0])
    if n > 2 and res.size:
        sigma2 = float(res[0]) / (n - 2)
        sxx = float(np.sum((x - x.mean()) ** 2))
        stderr = math.sqrt(sigma2 / sxx)
    else:
        stderr = 0.0
    return slope, stderr


def temporal_rates(dts, sweep, variables, norms):
    """Fitted slopes per variable; ``norms[var]`` picks 0 (Linf) or 1 (L2)."""
    out = {}
    for var in variables:
        e = [s[var][norms.get(var, 0)] for s in sweep]
        out[var] = fit_rate(dts, e)
    return out


def spatial_decay_ok(errors, max_ratio=0.2, floor_factor=2.0):
    """Monotone spectral decay check with a temporal-floor exclusion.

    Consecutive-error ratios must stay below ``max_ratio`` until both
    entries sit within ``floor_factor`` of the smallest error in the sweep
    (the temporal-accuracy floor).
    """
    e = np.asarray(errors, dtype=float)
    floor = e.min()
    for a, b in zip(e[:-1], e[1:]):
        if a > floor_factor * floor and b > floor_factor * floor:
            if b / a >= max_ratio:
                return False
    return True
