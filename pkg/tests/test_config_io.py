"""Config parsing/round-trip, snapshot format, CLI end-to-end runs."""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from dielsem.config import apply_overrides, parse_config
from dielsem.errors import ConfigurationError
from dielsem.snapshots import read_container, write_container

DROP_CFG = """
mode: simulate-2d
geometry:
  Lx_m: 1.6e-3
  Ly_m: 0.5e-3
  nx: 16
  y_breaks_m: [1.25e-4, 2.5e-4, 3.75e-4]
  order: 5
  electrodes:
    - {x0_m: 1.0e-4, x1_m: 2.0e-4, voltage_V: -300.0}
    - {x0_m: 3.0e-4, x1_m: 4.0e-4, voltage_V: 300.0}
    - {x0_m: 5.0e-4, x1_m: 6.0e-4, voltage_V: -300.0}
    - {x0_m: 7.0e-4, x1_m: 8.0e-4, voltage_V: 300.0}
physics:
  rho1_kg_m3: 429.7
  rho2_kg_m3: 429.7
  mu1_Pa_s: 1.2048e-3
  mu2_Pa_s: 2.4096e-3
  eps1_rel: 1.0
  eps2_rel: 8.1
  sigma_N_m: 2.84e-2
  eta_m: 1.0e-5
  gamma1_SI: 4.1500664009292205e-09
  theta_s_deg: 90.0
normalization:
  L0_m: 1.0e-3
  Vd_V: 300.0
  mu0_Pa_s: 1.2048e-3
numerics:
  J: 2
  dt_normalized: 1.0e-6
  n_steps: 5
initial:
  profile: semicircle
  R0_m: 3.5e-4
  x0_m: 1.2e-3
  y0_m: 0.0
output:
  directory: out
  diagnostics_every: 1
"""


def test_parse_and_normalize_drop_transport():
    cfg = parse_config(DROP_CFG)
    model = cfg.build_model()
    # eta = 0.01 L0 normalizes to 0.01; gamma1 = 5e-6 L0^2/mu1
    assert model.eta == pytest.approx(0.01)
    assert model.gamma1 == pytest.approx(5e-6, rel=1e-6)
    assert model.rho1 == pytest.approx(235.899, rel=1e-3)
    assert model.mu2 == pytest.approx(2.0)
    mesh = cfg.build_mesh()
    assert mesh.nx == 16 and mesh.ny == 4
    assert mesh.se_dofs.size > 0
    assert np.max(np.abs(mesh.se_voltages)) == pytest.approx(1.0)


def test_unknown_key_rejected():
    bad = DROP_CFG.replace("dt_normalized", "dt_normalzied")
    with pytest.raises(ConfigurationError) as err:
        parse_config(bad)
    assert "dt_normalzied" in str(err.value)


def test_missing_physics_listed():
    cfg_text = """
mode: simulate-2d
geometry: {Lx_m: 1.0e-3, Ly_m: 1.0e-3, nx: 2, order: 4}
physics: {rho1_kg_m3: 1.0, rho2_kg_m3: 1.0, mu1_Pa_s: 1.0, mu2_Pa_s: 1.0}
normalization: {L0_m: 1.0e-3, Vd_V: 100.0, mu0_Pa_s: 1.0}
"""
    with pytest.raises(ConfigurationError) as err:
        parse_config(cfg_text)
    msg = str(err.value)
    for key in ("eps1_rel", "eps2_rel", "sigma_N_m", "eta_m"):
        assert key in msg


def test_config_round_trip():
    cfg = parse_config(DROP_CFG)
    again = parse_config(cfg.dumps())
    assert cfg.to_dict() == again.to_dict()


def test_overrides():
    cfg = parse_config(DROP_CFG)
    cfg2 = apply_overrides(cfg, ["numerics.n_steps=9", "geometry.order=6"])
    assert cfg2.numerics["n_steps"] == 9
    assert cfg2.geometry["order"] == 6
    with pytest.raises(ConfigurationError):
        apply_overrides(cfg, ["numerics.bogus_key=1"])


def test_snapshot_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    fields = {"phi": rng.standard_normal(40), "V": rng.standard_normal(40)}
    p = tmp_path / "snap.dsem"
    write_container(p, fields, mesh_hash="ab" * 32, n=7, t=0.25, dt=0.05, J=2)
    back, meta = read_container(p)
    assert meta["n"] == 7 and meta["t"] == 0.25 and meta["J"] == 2
    for k in fields:
        assert np.array_equal(back[k], fields[k])


def run_cli(args):
    from dielsem.cli import main
    return main(args)


def test_cli_simulate_and_restart_bitexact(tmp_path):
    cfgfile = tmp_path / "run.yaml"
    cfgfile.write_text(DROP_CFG)
    full = tmp_path / "full"
    code = run_cli(["simulate-2d", "--config", str(cfgfile),
                    "--output", str(full),
                    "--set", "output.checkpoint_every=2",
                    "--set", "numerics.n_steps=4"])
    assert code == 0
    assert (full / "run_summary.json").exists()
    summary = json.loads((full / "run_summary.json").read_text())
    assert summary["status"] == "ok"
    assert summary["max_factorizations_per_operator"] == 1

    part = tmp_path / "part"
    code = run_cli(["simulate-2d", "--config", str(cfgfile),
                    "--output", str(part),
                    "--restart", str(full / "checkpoint_00000002.dsem"),
                    "--set", "numerics.n_steps=4"])
    assert code == 0
    a, _ = read_container(full / "final.dsem")
    b, _ = read_container(part / "final.dsem")
    for k in a:
        assert np.array_equal(a[k], b[k]), k


def test_cli_config_error_exit_code(tmp_path):
    cfgfile = tmp_path / "bad.yaml"
    cfgfile.write_text(DROP_CFG.replace("order: 5", "order: 5\n  bogus: 1"))
    assert run_cli(["simulate-2d", "--config", str(cfgfile),
                    "--output", str(tmp_path / "o")]) == 2


def test_cli_mode_mismatch(tmp_path):
    cfgfile = tmp_path / "run.yaml"
    cfgfile.write_text(DROP_CFG)
    assert run_cli(["equilibrium", "--config", str(cfgfile),
                    "--output", str(tmp_path / "o")]) == 2


def test_cli_postprocess(tmp_path):
    cfgfile = tmp_path / "run.yaml"
    cfgfile.write_text(DROP_CFG)
    outdir = tmp_path / "run"
    assert run_cli(["simulate-2d", "--config", str(cfgfile),
                    "--output", str(outdir)]) == 0
    post = tmp_path / "post"
    code = run_cli(["postprocess", "--config", str(cfgfile),
                    "--output", str(post),
                    "--snapshot", str(outdir / "final.dsem")])
    assert code == 0
    results = json.loads((post / "postprocess.json").read_text())
    assert results[0]["components"] == 1
    assert (post / "final_interface.csv").exists()


def test_cli_postprocess_mesh_hash_mismatch(tmp_path):
    cfgfile = tmp_path / "run.yaml"
    cfgfile.write_text(DROP_CFG)
    outdir = tmp_path / "run"
    run_cli(["simulate-2d", "--config", str(cfgfile), "--output", str(outdir)])
    other = tmp_path / "other.yaml"
    other.write_text(DROP_CFG.replace("order: 5", "order: 6"))
    code = run_cli(["postprocess", "--config", str(other),
                    "--output", str(tmp_path / "p"),
                    "--snapshot", str(outdir / "final.dsem")])
    assert code == 2


def test_cli_diagnostics_content(tmp_path):
    cfgfile = tmp_path / "run.yaml"
    cfgfile.write_text(DROP_CFG)
    outdir = tmp_path / "run"
    run_cli(["simulate-2d", "--config", str(cfgfile), "--output", str(outdir)])
    lines = (outdir / "diagnostics.csv").read_text().strip().splitlines()
    header = lines[0].split(",")
    assert header[:3] == ["step", "t", "phase_mass"]
    assert len(lines) >= 6  # initial row + 5 steps at cadence 1
    last = dict(zip(header, lines[-1].split(",")))
    assert int(last["components"]) == 1
    assert float(last["max_u"]) >= 0.0
