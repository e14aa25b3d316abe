"""Hybrid Fourier/SEM stepper: transforms, embedding, mode structure."""

import math

import numpy as np
import pytest

from dielsem.errors import ParameterError
from dielsem.fourier3d import Fourier3DStepper, Grid3D, fft_z, ifft_z
from dielsem.manufactured import (ZeroSources3D, convergence_model_3d,
                                  paper_case_3d)
from dielsem.model import MixtureModel
from dielsem.operators import REGISTRY
from dielsem.sem import build_mesh


def test_fft_normalization_single_harmonic():
    Lz = 2.0
    z = np.arange(8) * Lz / 8
    f = np.cos(2 * np.pi * z / Lz)[None, :]
    modes = fft_z(f)
    assert abs(modes[0, 1] - 0.5) < 1e-14
    assert abs(modes[0, -1] - 0.5) < 1e-14
    others = np.delete(modes[0], [1, 7])
    assert np.max(np.abs(others)) < 1e-14


def test_fft_constant_and_roundtrip():
    rng = np.random.default_rng(2)
    f = np.full((3, 8), 4.2)
    modes = fft_z(f)
    assert np.allclose(modes[:, 0], 4.2)
    assert np.max(np.abs(modes[:, 1:])) < 1e-13
    g = rng.standard_normal((5, 16))
    back = ifft_z(fft_z(g))
    assert np.max(np.abs(back.real - g)) < 1e-12
    assert np.max(np.abs(back.imag)) < 1e-12
    # conjugate symmetry of real data
    m = fft_z(g)
    assert np.max(np.abs(m[:, 1:] - np.conj(m[:, :0:-1]))) < 1e-12


def test_odd_nz_rejected():
    with pytest.raises(ParameterError):
        fft_z(np.zeros((2, 7)))
    mesh = build_mesh(2.0, 1.0, 2, [], 3)
    with pytest.raises(ParameterError):
        Grid3D(mesh, 6 + 1, 1.0)


def test_spectral_z_derivative():
    mesh = build_mesh(2.0, 1.0, 2, [], 4, electrodes=[(0.0, 2.0, 0.0)])
    g = Grid3D(mesh, 16, 2.0)
    f = np.sin(2 * np.pi * g.z / g.Lz)[None, :] * np.ones((mesh.ndof, 1))
    d = g.dz(f)
    want = (2 * np.pi / g.Lz) * np.cos(2 * np.pi * g.z / g.Lz)
    assert np.max(np.abs(d - want[None, :])) < 1e-12


def small_model():
    return MixtureModel(rho1=1.0, rho2=2.0, mu1=0.01, mu2=0.02, eps1=1.0,
                        eps2=4.0, sigma=0.1, eta=0.1, gamma1=0.01,
                        theta_s=math.pi / 2)


def test_mode_decoupling_in_solves():
    mesh = build_mesh(2.0, 1.0, 2, [], 5, electrodes=[(0.0, 2.0, 1.0)])
    grid = Grid3D(mesh, 8, 2.0)
    st = Fourier3DStepper(grid, small_model(), dt=1e-3)
    rng = np.random.default_rng(0)
    rhs = rng.standard_normal((mesh.ndof, grid.nmodes)) \
        + 1j * rng.standard_normal((mesh.ndof, grid.nmodes))
    base = st._solve_modes(st._op_V, rhs)
    pert = rhs.copy()
    kp = 2
    pert[:, kp] += rng.standard_normal(mesh.ndof)
    out = st._solve_modes(st._op_V, pert)
    diff = np.abs(out - base)
    assert diff[:, kp].max() > 1e-8
    mask = np.ones(grid.nmodes, dtype=bool)
    mask[kp] = False
    assert diff[:, mask].max() == 0.0


def test_z_independent_run_matches_2d():
    from dielsem.stepper2d import Stepper2D

    mesh = build_mesh(2.0, 1.0, 4, [], 5,
                      electrodes=[(0.0, 1.0, 0.2), (1.5, 2.0, -0.2)])
    model = MixtureModel(rho1=1.0, rho2=2.0, mu1=0.1, mu2=0.2, eps1=1.0,
                         eps2=4.0, sigma=0.1, eta=0.1, gamma1=0.01,
                         theta_s=math.pi / 2)
    phi2 = np.tanh((mesh.y - 0.5) / (math.sqrt(2) * model.eta))

    s2 = Stepper2D(mesh, model, dt=1e-3, J=2)
    s2.set_initial(phi0=phi2)

    grid = Grid3D(mesh, 8, 2.0)
    s3 = Fourier3DStepper(grid, model, dt=1e-3, J=2)
    s3.set_initial(phi0=np.repeat(phi2[:, None], grid.Nz, axis=1))

    for _ in range(50):
        s2.advance()
        s3.advance()
    for k2, k3 in (("u", "u"), ("v", "v"), ("P", "P"), ("phi", "phi"),
                   ("V", "V")):
        a = s2.fields[k2]
        b = s3.fields[k3]
        # stays exactly z-independent and tracks the 2D trajectory
        assert np.max(np.abs(b - b[:, :1])) < 1e-12, k3
        scale = max(1.0, np.max(np.abs(a)))
        assert np.max(np.abs(b[:, 0] - a)) < 1e-10 * scale, k3
    assert np.max(np.abs(s3.fields["w"])) < 1e-12


def test_factorization_sharing_across_modes():
    REGISTRY.reset()
    mesh = build_mesh(2.0, 1.0, 2, [], 4, electrodes=[(0.0, 2.0, 1.0)])
    grid = Grid3D(mesh, 8, 2.0)
    st = Fourier3DStepper(grid, small_model(), dt=1e-3, J=2)
    st.set_initial(phi0=np.ones((mesh.ndof, grid.Nz)))
    st.run(3)
    # per family: one factorization per |k| (startup J=1 families included once)
    for fam in ("potential", "pressure"):
        labels = [l for l in REGISTRY.counts if l.startswith(fam)]
        assert len(labels) == grid.nmodes
    assert all(c == 1 for c in REGISTRY.counts.values())


def manufactured_errors_3d(K, dt, tf, Nz=8, S=None):
    model = convergence_model_3d()
    case = paper_case_3d(model)
    mesh = build_mesh(2.0, 2.0, 2, [], K, y0=-1.0,
                      electrodes=[(0.0, 1.0, 0.0)])
    grid = Grid3D(mesh, Nz, 2.0)
    st = Fourier3DStepper(grid, model, dt=dt, J=2, sources=case, S=S,
                          electrode_values=lambda x, y, z, t: case.V(x, y, z, t))
    x, y, zz = (mesh.x[:, None] + 0 * grid.z[None, :],
                mesh.y[:, None] + 0 * grid.z[None, :],
                0 * mesh.x[:, None] + grid.z[None, :])
    st.set_initial(phi0=case.phi(x, y, zz, 0.0),
                   u0=(case.u(x, y, zz, 0.0), case.v(x, y, zz, 0.0),
                       case.wvel(x, y, zz, 0.0)),
                   P0=case.P(x, y, zz, 0.0))
    st.run(int(round(tf / dt)))
    errs = {}
    exact = {"u": case.u, "v": case.v, "w": case.wvel, "P": case.P,
             "phi": case.phi, "V": case.V}
    for name, fn in exact.items():
        err = st.fields[name] - fn(x, y, zz, st.t)
        errs[name] = np.max(np.abs(err))
    return errs


@pytest.mark.slow
def test_manufactured_3d_temporal_second_order():
    from dielsem.model import min_stabilization

    model = convergence_model_3d()
    dts = [0.01, 0.005, 0.0025, 0.00125]
    S = min_stabilization(model.eta, model.lam, model.gamma1, min(dts), 1.5)
    errs = [manufactured_errors_3d(K=14, dt=dt, tf=0.1, S=S) for dt in dts]
    for var in ("u", "v", "w", "P", "phi", "V"):
        e = np.array([er[var] for er in errs])
        slope = np.polyfit(np.log(dts), np.log(e), 1)[0]
        assert 1.7 < slope < 2.3, (var, slope, e)
