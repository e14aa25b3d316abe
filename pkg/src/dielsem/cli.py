"""Command-line entry point: run solvers, write artifacts, postprocess.

    dielsem <mode> --config cfg.yaml [--output DIR] [--set key=val ...]
                   [--restart CKPT]
    dielsem postprocess --config cfg.yaml --snapshot SNAP [SNAP ...]

Modes: convergence-2d, convergence-3d, simulate-2d, simulate-3d,
equilibrium.  Exit codes: 0 success, 2 configuration error, 3 solver
failure, 4 non-convergence.
"""

import argparse
import hashlib
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import interface as iface
from .config import apply_overrides, load_config
from .equilibrium import EquilibriumSolver2D, EquilibriumSolver3D
from .errors import ConfigurationError, NonConvergedError
from .fourier3d import Fourier3DStepper
from .model import min_stabilization, total_energy
from .operators import REGISTRY
from .snapshots import (CsvWriter, config_hash, export_text, load_checkpoint,
                        read_container, write_checkpoint, write_container)
from .stepper2d import Stepper2D
from .validation import (VARS_2D, VARS_3D, fit_rate, spatial_sweep_2d,
                         spatial_sweep_3d, temporal_sweep_2d, temporal_sweep_3d)

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_NONCONV = 0, 2, 3, 4


def _out_dir(cfg, override):
    out = Path(override or cfg.output["directory"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo_config(cfg, out):
    text = cfg.dumps()
    (out / "config_echo.yaml").write_text(text)
    return config_hash(text)


def _summary(out, status, t0, extra=None):
    data = {"status": status, "wall_seconds": time.time() - t0,
            "factorizations": dict(REGISTRY.counts),
            "max_factorizations_per_operator": REGISTRY.max_per_operator()}
    if extra:
        data.update(extra)
    (out / "run_summary.json").write_text(json.dumps(data, indent=2))


def _steps_from_config(cfg, dt):
    n = cfg.numerics["n_steps"]
    if n > 0:
        return n
    tf = cfg.numerics["t_final_normalized"]
    if tf > 0:
        return int(round(tf / dt))
    raise ConfigurationError("numerics.n_steps or numerics.t_final_normalized required")


def run_simulate_2d(cfg, out, cfg_hash, restart=None):
    mesh = cfg.build_mesh()
    model = cfg.build_model()
    dt = cfg.dt_normalized()
    num = cfg.numerics
    S = None
    if num["S_multiplier"] != 1.0:
        S = num["S_multiplier"] * min_stabilization(
            model.eta, model.lam, model.gamma1, dt, 1.5 if num["J"] == 2 else 1.0)
    st = Stepper2D(mesh, model, dt=dt, J=num["J"], S=S,
                   nu_m=num["nu_m_normalized"] or None,
                   eps_bar0=num["eps_bar0_normalized"] or None,
                   rho0=num["rho0_normalized"] or None,
                   tol_fp=num["tol_fp"], max_fp=num["max_fp"])
    st.set_initial(phi0=cfg.initial_phi(mesh))
    if restart:
        load_checkpoint(restart, st, expect_mesh_hash=mesh.content_hash())

    nsteps = _steps_from_config(cfg, dt)
    diag = CsvWriter(out / "diagnostics.csv",
                     ["step", "t", "phase_mass", "kinetic", "mixing",
                      "electric", "wall", "total", "max_u", "div_l2",
                      "centroid_x", "centroid_y", "components"])
    snap_every = cfg.output["snapshot_every"]
    ck_every = cfg.output["checkpoint_every"]
    d_every = max(cfg.output["diagnostics_every"], 1)
    mhash = mesh.content_hash()

    def record():
        en = st.energy()
        cx, cy = iface.phase_centroid(mesh, st.fields["phi"])
        phi = st.fields["phi"]
        ncomp = iface.count_components(mesh, phi, spacing=model.eta) \
            if phi.min() < 0 < phi.max() else 0
        diag.row({"step": st.n, "t": st.t, "phase_mass": st.phase_mass(),
                  "kinetic": en["kinetic"], "mixing": en["mixing"],
                  "electric": en["electric"], "wall": en["wall"],
                  "total": en["total"], "max_u": st.max_speed(),
                  "div_l2": st.divergence_l2(), "centroid_x": cx,
                  "centroid_y": cy, "components": ncomp})

    record()
    while st.n < nsteps:
        st.advance()
        if st.n % d_every == 0 or st.n == nsteps:
            record()
        if snap_every and st.n % snap_every == 0:
            write_container(out / f"snapshot_{st.n:08d}.dsem", st.fields,
                            mhash, cfg_hash=cfg_hash, n=st.n, t=st.t, dt=dt,
                            J=num["J"])
        if ck_every and st.n % ck_every == 0:
            write_checkpoint(out / f"checkpoint_{st.n:08d}.dsem", st, mhash,
                             cfg_hash=cfg_hash)
    write_container(out / "final.dsem", st.fields, mhash, cfg_hash=cfg_hash,
                    n=st.n, t=st.t, dt=dt, J=num["J"])
    if cfg.output["text_export"]:
        fields, meta = read_container(out / "final.dsem")
        export_text(out / "final.txt", fields, meta)
    diag.close()
    return {"steps": st.n, "t_final": st.t}


def run_simulate_3d(cfg, out, cfg_hash, restart=None):
    grid = cfg.build_grid3d()
    mesh = grid.mesh
    model = cfg.build_model()
    dt = cfg.dt_normalized()
    num = cfg.numerics
    st = Fourier3DStepper(grid, model, dt=dt, J=num["J"],
                          nu_m=num["nu_m_normalized"] or None,
                          tol_fp=num["tol_fp"], max_fp=num["max_fp"])
    st.set_initial(phi0=cfg.initial_phi(mesh, grid))
    if restart:
        load_checkpoint(restart, st, expect_mesh_hash=mesh.content_hash())
    nsteps = _steps_from_config(cfg, dt)
    d_every = max(cfg.output["diagnostics_every"], 1)
    snap_every = cfg.output["snapshot_every"]
    mhash = mesh.content_hash()
    diag = CsvWriter(out / "diagnostics.csv",
                     ["step", "t", "phase_mass", "max_u"])
    while st.n < nsteps:
        st.advance()
        if st.n % d_every == 0 or st.n == nsteps:
            diag.row({"step": st.n, "t": st.t,
                      "phase_mass": st.phase_mass(), "max_u": st.max_speed()})
        if snap_every and st.n % snap_every == 0:
            write_container(out / f"snapshot_{st.n:08d}.dsem", st.fields,
                            mhash, cfg_hash=cfg_hash, Nz=grid.Nz, Lz=grid.Lz,
                            n=st.n, t=st.t, dt=dt, J=num["J"])
    write_container(out / "final.dsem", st.fields, mhash, cfg_hash=cfg_hash,
                    Nz=grid.Nz, Lz=grid.Lz, n=st.n, t=st.t, dt=dt, J=num["J"])
    diag.close()
    return {"steps": st.n, "t_final": st.t}


def run_equilibrium(cfg, out, cfg_hash):
    model = cfg.build_model()
    num = cfg.numerics
    dtau = num["dtau_normalized"]
    S = None
    if num["S_multiplier"] != 1.0:
        S = num["S_multiplier"] * min_stabilization(
            model.eta, model.lam, model.gamma1, dtau, 1.0)
    three_d = cfg.geometry["Nz"] >= 4
    if three_d:
        grid = cfg.build_grid3d()
        mesh = grid.mesh
        solver = EquilibriumSolver3D(grid, model, dtau=dtau, S=S,
                                     tol_ss=num["tol_ss"],
                                     max_iter=num["max_iter"])
        phi0 = cfg.initial_phi(mesh, grid)
    else:
        mesh = cfg.build_mesh()
        solver = EquilibriumSolver2D(mesh, model, dtau=dtau, S=S,
                                     tol_ss=num["tol_ss"],
                                     max_iter=num["max_iter"])
        phi0 = cfg.initial_phi(mesh)

    hist = CsvWriter(out / "residuals.csv", ["iteration", "residual"])
    d_every = max(cfg.output["diagnostics_every"], 1)
    res = solver.run_to_steady(
        phi0, log_every=d_every,
        callback=lambda it, phi, r: hist.row({"iteration": it, "residual": r}))
    hist.close()
    mhash = mesh.content_hash()
    fields = {"phi": res.phi, "V": res.V}
    extra = {"iterations": res.iterations, "converged": res.converged,
             "final_residual": float(res.residuals[-1])}
    if three_d:
        write_container(out / "final.dsem", fields, mhash, cfg_hash=cfg_hash,
                        Nz=grid.Nz, Lz=grid.Lz, t=res.iterations * dtau)
    else:
        write_container(out / "final.dsem", fields, mhash, cfg_hash=cfg_hash,
                        t=res.iterations * dtau)
        en = total_energy(mesh, model, res.phi, E=res.E)
        extra["energy"] = en["total"]
    if not res.converged:
        raise NonConvergedError(
            f"pseudo-time iteration hit max_iter with residual "
            f"{res.residuals[-1]:.3e}")
    return extra


def run_convergence(cfg, out, three_d):
    conv = cfg.convergence
    orders = [int(k) for k in conv["orders"]]
    sweep_s = (spatial_sweep_3d if three_d else spatial_sweep_2d)(
        orders, dt=conv["dt_fixed_normalized"],
        tf=conv["t_final_normalized"])
    variables = VARS_3D if three_d else VARS_2D
    with open(out / "spatial_errors.csv", "w", encoding="utf-8") as fh:
        fh.write("order," + ",".join(
            f"{v}_linf,{v}_l2" for v in variables) + "\n")
        for K, errs in zip(orders, sweep_s):
            cells = [str(K)]
            for v in variables:
                cells += [f"{errs[v][0]:.6e}", f"{errs[v][1]:.6e}"]
            fh.write(",".join(cells) + "\n")

    dts = [float(d) for d in conv["dts_normalized"]]
    rates = {}
    if dts:
        Kfix = conv["order_fixed"]
        sweep_t = (temporal_sweep_3d if three_d else temporal_sweep_2d)(
            dts, K=Kfix)
        with open(out / "temporal_errors.csv", "w", encoding="utf-8") as fh:
            fh.write("dt," + ",".join(
                f"{v}_linf,{v}_l2" for v in variables) + "\n")
            for dt, errs in zip(dts, sweep_t):
                cells = [f"{dt:.6e}"]
                for v in variables:
                    cells += [f"{errs[v][0]:.6e}", f"{errs[v][1]:.6e}"]
                fh.write(",".join(cells) + "\n")
        with open(out / "temporal_rates.csv", "w", encoding="utf-8") as fh:
            fh.write("variable,norm,slope,stderr\n")
            for v in variables:
                for ni, norm in ((0, "linf"), (1, "l2")):
                    slope, se = fit_rate(dts, [s[v][ni] for s in sweep_t])
                    fh.write(f"{v},{norm},{slope:.4f},{se:.4f}\n")
                    rates[f"{v}_{norm}"] = slope
    return {"orders": orders, "rates": rates}


def run_postprocess(cfg, out, snaps, spacing=None):
    mesh = cfg.build_mesh()
    model = cfg.build_model()
    spacing = spacing or model.eta / 4.0
    mhash = mesh.content_hash()
    results = []
    for snap in snaps:
        fields, meta = read_container(snap)
        if meta["mesh_hash"] != mhash:
            raise ConfigurationError(
                f"{snap}: snapshot mesh hash {meta['mesh_hash']} does not "
                f"match config mesh hash {mhash}")
        phi = fields.get("phi")
        stem = Path(snap).stem
        entry = {"snapshot": str(snap), "n": meta["n"], "t": meta["t"]}
        if phi is not None and phi.ndim == 1:
            if phi.min() < 0.0 < phi.max():
                curves = iface.extract_interface(mesh, phi, spacing)
                with open(out / f"{stem}_interface.csv", "w",
                          encoding="utf-8") as fh:
                    fh.write("curve,x,y\n")
                    for ci, c in enumerate(curves):
                        for px, py in c:
                            fh.write(f"{ci},{px:.12g},{py:.12g}\n")
                entry["components"] = iface.count_components(mesh, phi, spacing)
                cx, cy = iface.phase_centroid(mesh, phi)
                entry["centroid_x"], entry["centroid_y"] = cx, cy
            else:
                entry["components"] = 0
            en = total_energy(mesh, model, phi)
            entry["mixing_energy"] = en["mixing"]
            entry["wall_energy"] = en["wall"]
        results.append(entry)
    (out / "postprocess.json").write_text(json.dumps(results, indent=2))
    return {"snapshots": len(results)}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="dielsem",
        description="Two-phase dielectric flow solver (spectral elements)")
    parser.add_argument("mode", choices=list(
        ("convergence-2d", "convergence-3d", "simulate-2d", "simulate-3d",
         "equilibrium", "postprocess")))
    parser.add_argument("--config", required=True)
    parser.add_argument("--output", default=None)
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE")
    parser.add_argument("--restart", default=None)
    parser.add_argument("--snapshot", nargs="+", default=[],
                        help="snapshots for postprocess mode")
    args = parser.parse_args(argv)

    t0 = time.time()
    try:
        cfg = load_config(args.config)
        if args.overrides:
            cfg = apply_overrides(cfg, args.overrides)
        if args.mode != "postprocess" and cfg.mode != args.mode:
            raise ConfigurationError(
                f"config mode {cfg.mode!r} does not match CLI mode {args.mode!r}")
        out = _out_dir(cfg, args.output)
        cfg_hash = _echo_config(cfg, out)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    REGISTRY.reset()
    try:
        if args.mode == "simulate-2d":
            extra = run_simulate_2d(cfg, out, cfg_hash, restart=args.restart)
        elif args.mode == "simulate-3d":
            extra = run_simulate_3d(cfg, out, cfg_hash, restart=args.restart)
        elif args.mode == "equilibrium":
            extra = run_equilibrium(cfg, out, cfg_hash)
        elif args.mode in ("convergence-2d", "convergence-3d"):
            extra = run_convergence(cfg, out, args.mode == "convergence-3d")
        else:
            extra = run_postprocess(cfg, out, args.snapshot)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        _summary(out, "config-error", t0, {"message": str(exc)})
        return EXIT_CONFIG
    except NonConvergedError as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        _summary(out, "non-converged", t0, {"message": str(exc)})
        return EXIT_NONCONV
    except Exception as exc:  # solver failure: keep partial artifacts
        print(f"solver failure: {exc}", file=sys.stderr)
        _summary(out, "solver-failure", t0, {"message": str(exc)})
        return EXIT_SOLVER
    _summary(out, "ok", t0, extra)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
