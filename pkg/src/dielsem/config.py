"""Run configuration: YAML parsing, validation, and normalization.

Configs carry dimensional (SI) quantities with the unit spelled in the key
name (``Lx_m``, ``rho1_kg_m3``, ``dt_s``, ``voltage_V``, ``theta_s_deg``);
normalization to solver units happens exactly once, inside the builders
here.  Unknown keys anywhere are errors, so typos cannot silently fall back
to defaults.  ``parse -> serialize -> parse`` is lossless.

Equilibrium-mode runs normalize lengths by ``L0_m`` and voltages by
``Vd_V`` with the surface tension as the energy scale; dynamic runs
additionally need ``mu0_Pa_s``.  The pseudo-time step and the phase
mobility product for equilibrium runs are given in normalized form, which
is how those parameters are specified in practice.
"""

import io
import math

import numpy as np
import yaml

from .errors import ConfigurationError
from .model import (EPS0_VACUUM, EquilibriumScales, FullModelScales,
                    MixtureModel)
from .sem import build_mesh

MODES = ("convergence-2d", "convergence-3d", "simulate-2d", "simulate-3d",
         "equilibrium")

_OPT = object()


def _expect(mapping, path, spec):
    """Validate one section against {key: (type, default-or-required)}."""
    if mapping is None:
        mapping = {}
    if not isinstance(mapping, dict):
        raise ConfigurationError(f"{path}: expected a mapping")
    unknown = set(mapping) - set(spec)
    if unknown:
        raise ConfigurationError(
            f"{path}: unknown keys {sorted(unknown)}; known keys are "
            f"{sorted(spec)}")
    out = {}
    missing = []
    for key, (typ, default) in spec.items():
        if key in mapping and mapping[key] is not None:
            val = mapping[key]
            if typ is float and isinstance(val, int):
                val = float(val)
            if typ is not None and not isinstance(val, typ):
                raise ConfigurationError(
                    f"{path}.{key}: expected {getattr(typ, '__name__', typ)}, "
                    f"got {type(val).__name__} ({val!r})")
            out[key] = val
        elif default is _OPT:
            missing.append(f"{path}.{key}")
        else:
            out[key] = default
    if missing:
        raise ConfigurationError("missing required keys: " + ", ".join(missing))
    return out


class RunConfig:
    """Validated run configuration with normalization helpers."""

    def __init__(self, raw):
        if not isinstance(raw, dict):
            raise ConfigurationError("top level: expected a mapping")
        unknown = set(raw) - {"mode", "geometry", "physics", "normalization",
                              "numerics", "initial", "output", "convergence"}
        if unknown:
            raise ConfigurationError(f"top level: unknown sections {sorted(unknown)}")
        self.mode = raw.get("mode")
        if self.mode not in MODES:
            raise ConfigurationError(
                f"mode: must be one of {MODES}, got {self.mode!r}")
        three_d = self.mode in ("convergence-3d", "simulate-3d")
        equilibrium = self.mode == "equilibrium"
        convergence = self.mode.startswith("convergence")
        req = (lambda d: d) if convergence else (lambda d: _OPT)

        g = _expect(raw.get("geometry"), "geometry", {
            "Lx_m": (float, req(1.0)), "Ly_m": (float, req(1.0)),
            "x0_m": (float, 0.0), "y0_m": (float, 0.0),
            "nx": (int, req(2)), "order": (int, req(8)),
            "y_breaks_m": (list, []),
            "periodic_x": (bool, True), "open_top": (bool, True),
            "Nz": (int, 0), "Lz_m": (float, 0.0),
            "electrodes": (list, []),
        })
        self.geometry = g
        self.electrodes = [
            _expect(e, f"geometry.electrodes[{i}]",
                    {"x0_m": (float, _OPT), "x1_m": (float, _OPT),
                     "voltage_V": (float, _OPT)})
            for i, e in enumerate(g["electrodes"])]
        needs_z = self.mode == "simulate-3d" or (equilibrium and g["Nz"])
        if needs_z and (g["Nz"] < 4 or g["Lz_m"] <= 0):
            raise ConfigurationError(
                "geometry.Nz and geometry.Lz_m are required for 3D runs")

        self.physics = _expect(raw.get("physics"), "physics", {
            "rho1_kg_m3": (float, 1.0), "rho2_kg_m3": (float, 1.0),
            "mu1_Pa_s": (float, 1.0), "mu2_Pa_s": (float, 1.0),
            "eps1_rel": (float, req(1.0)), "eps2_rel": (float, req(2.0)),
            "sigma_N_m": (float, req(1.0)), "eta_m": (float, req(0.1)),
            "gamma1_SI": (float, 0.0),
            "lam_gamma1_normalized": (float, 0.0),
            "theta_s_deg": (float, 90.0),
        })
        if not (equilibrium or convergence):
            for key in ("rho1_kg_m3", "rho2_kg_m3", "mu1_Pa_s", "mu2_Pa_s"):
                if raw.get("physics", {}).get(key) is None:
                    raise ConfigurationError(
                        f"physics.{key} is required for dynamic runs")

        self.normalization = _expect(raw.get("normalization"), "normalization", {
            "L0_m": (float, req(1.0)), "Vd_V": (float, req(1.0)),
            "mu0_Pa_s": (float, 0.0),
        })
        if not (equilibrium or convergence) and self.normalization["mu0_Pa_s"] <= 0:
            raise ConfigurationError(
                "normalization.mu0_Pa_s is required for dynamic runs")

        self.numerics = _expect(raw.get("numerics"), "numerics", {
            "J": (int, 2), "dt_s": (float, 0.0),
            "dt_normalized": (float, 0.0),
            "t_final_normalized": (float, 0.0), "n_steps": (int, 0),
            "S_multiplier": (float, 1.0),
            "nu_m_normalized": (float, 0.0),
            "eps_bar0_normalized": (float, 0.0),
            "rho0_normalized": (float, 0.0),
            "tol_fp": (float, 1e-10), "max_fp": (int, 1000),
            "dtau_normalized": (float, 2e-6),
            "tol_ss": (float, 1e-6), "max_iter": (int, 200000),
        })
        self.initial = _expect(raw.get("initial"), "initial", {
            "profile": (str, "uniform"),
            "value": (float, 1.0),
            "h0_m": (float, 0.0),
            "R0_m": (float, 0.0),
            "x0_m": (float, 0.0), "y0_m": (float, 0.0), "z0_m": (float, 0.0),
            "X1_m": (float, 0.0), "X2_m": (float, 0.0),
            "expression": (str, ""),
        })
        self.output = _expect(raw.get("output"), "output", {
            "directory": (str, "out"),
            "snapshot_every": (int, 0),
            "diagnostics_every": (int, 10),
            "checkpoint_every": (int, 0),
            "text_export": (bool, False),
        })
        self.convergence = _expect(raw.get("convergence"), "convergence", {
            "orders": (list, [4, 6, 8, 10]),
            "dts_normalized": (list, []),
            "order_fixed": (int, 14),
            "dt_fixed_normalized": (float, 1e-3),
            "t_final_normalized": (float, 0.2),
        })
        self._raw = raw

    # -- serialization ----------------------------------------------------------

    def to_dict(self):
        out = {"mode": self.mode, "geometry": dict(self.geometry),
               "physics": dict(self.physics),
               "normalization": dict(self.normalization),
               "numerics": dict(self.numerics), "initial": dict(self.initial),
               "output": dict(self.output), "convergence": dict(self.convergence)}
        out["geometry"]["electrodes"] = [dict(e) for e in self.electrodes]
        return out

    def dumps(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    # -- normalization and builders -----------------------------------------------

    def scales(self):
        n = self.normalization
        if self.mode == "equilibrium":
            return EquilibriumScales(L0=n["L0_m"], Vd=n["Vd_V"],
                                     gamma=self.physics["sigma_N_m"])
        return FullModelScales(L0=n["L0_m"], Vd=n["Vd_V"], mu0=n["mu0_Pa_s"])

    def build_model(self):
        p = self.physics
        sc = self.scales()
        eta = sc.normalize("eta", p["eta_m"])
        theta = math.radians(p["theta_s_deg"])
        if self.mode == "equilibrium":
            eps1 = sc.normalize("eps", p["eps1_rel"] * EPS0_VACUUM)
            eps2 = sc.normalize("eps", p["eps2_rel"] * EPS0_VACUUM)
            lg = p["lam_gamma1_normalized"]
            if lg <= 0 and p["gamma1_SI"] > 0:
                lam = 1.0606601717798212 * eta  # sigma normalizes to 1
                lg = lam * sc.normalize("gamma1", p["gamma1_SI"])
            if lg <= 0:
                raise ConfigurationError(
                    "equilibrium runs need physics.lam_gamma1_normalized or "
                    "physics.gamma1_SI")
            gamma1 = lg / (1.0606601717798212 * eta)
            return MixtureModel.equilibrium(eps1=eps1, eps2=eps2, sigma=1.0,
                                            eta=eta, gamma1=gamma1,
                                            theta_s=theta)
        if p["gamma1_SI"] <= 0:
            raise ConfigurationError("physics.gamma1_SI is required for dynamic runs")
        return MixtureModel(
            rho1=sc.normalize("rho", p["rho1_kg_m3"]),
            rho2=sc.normalize("rho", p["rho2_kg_m3"]),
            mu1=sc.normalize("mu", p["mu1_Pa_s"]),
            mu2=sc.normalize("mu", p["mu2_Pa_s"]),
            eps1=p["eps1_rel"], eps2=p["eps2_rel"],
            sigma=sc.normalize("sigma", p["sigma_N_m"]),
            eta=sc.normalize("eta", p["eta_m"]),
            gamma1=sc.normalize("gamma1", p["gamma1_SI"]),
            theta_s=theta)

    def build_mesh(self):
        g = self.geometry
        sc = self.scales()
        L = lambda v: sc.normalize("length", v)
        electrodes = [(L(e["x0_m"]), L(e["x1_m"]),
                       e["voltage_V"] / self.normalization["Vd_V"])
                      for e in self.electrodes]
        return build_mesh(L(g["Lx_m"]), L(g["Ly_m"]), g["nx"],
                          [L(v) for v in g["y_breaks_m"]], g["order"],
                          electrodes=electrodes, periodic_x=g["periodic_x"],
                          open_top=g["open_top"], x0=L(g["x0_m"]),
                          y0=L(g["y0_m"]))

    def build_grid3d(self):
        from .fourier3d import Grid3D
        sc = self.scales()
        return Grid3D(self.build_mesh(), self.geometry["Nz"],
                      sc.normalize("length", self.geometry["Lz_m"]))

    def dt_normalized(self):
        n = self.numerics
        if n["dt_normalized"] > 0:
            return n["dt_normalized"]
        if n["dt_s"] > 0:
            return self.scales().normalize("time", n["dt_s"])
        raise ConfigurationError("numerics.dt_s or numerics.dt_normalized required")

    def initial_phi(self, mesh, grid=None):
        sc = self.scales()
        ini = self.initial
        L = lambda v: sc.normalize("length", v)
        eta = sc.normalize("eta", self.physics["eta_m"])
        se = math.sqrt(2.0) * eta
        profile = ini["profile"]
        if grid is None:
            x, y = mesh.x, mesh.y
            z = np.zeros_like(x)
        else:
            x = mesh.x[:, None] + 0.0 * grid.z[None, :]
            y = mesh.y[:, None] + 0.0 * grid.z[None, :]
            z = 0.0 * x + grid.z[None, :]
        if profile == "uniform":
            return np.full_like(x, ini["value"])
        if profile == "flat_film":
            return np.tanh((y - L(ini["h0_m"])) / se)
        if profile == "semicircle":
            r = np.sqrt((x - L(ini["x0_m"])) ** 2 + (y - L(ini["y0_m"])) ** 2)
            return np.tanh((r - L(ini["R0_m"])) / se)
        if profile == "hemisphere":
            r = np.sqrt((x - L(ini["x0_m"])) ** 2 + (y - L(ini["y0_m"])) ** 2
                        + (z - L(ini["z0_m"])) ** 2)
            return np.tanh((r - L(ini["R0_m"])) / se)
        if profile == "circular_cap_pair":
            theta = math.radians(self.physics["theta_s_deg"])
            R0 = L(ini["R0_m"])
            Yc = -R0 * math.cos(theta)
            d1 = np.hypot(x - L(ini["X1_m"]), y - Yc) - R0
            d2 = np.hypot(x - L(ini["X2_m"]), y - Yc) - R0
            return np.tanh(d1 / se) + np.tanh(d2 / se) - 1.0
        if profile == "expression":
            ns = {"x": x, "y": y, "z": z, "np": np, "tanh": np.tanh,
                  "sqrt": np.sqrt, "pi": np.pi, "eta": eta, "cos": np.cos,
                  "sin": np.sin, "exp": np.exp, "hypot": np.hypot}
            return np.asarray(eval(ini["expression"], {"__builtins__": {}}, ns),
                              dtype=float) + 0.0 * x
        raise ConfigurationError(f"initial.profile: unknown profile {profile!r}")


def parse_config(text):
    """Parse and validate a YAML config document."""
    try:
        raw = yaml.safe_load(io.StringIO(text))
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"not valid YAML: {exc}")
    return RunConfig(raw)


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def apply_overrides(cfg, pairs):
    """Apply dotted-path key=value overrides and revalidate."""
    raw = cfg.to_dict()
    for pair in pairs:
        if "=" not in pair:
            raise ConfigurationError(f"override {pair!r} is not key=value")
        key, _, val = pair.partition("=")
        node = raw
        parts = key.split(".")
        for p in parts[:-1]:
            if p not in node or not isinstance(node[p], dict):
                raise ConfigurationError(f"override path {key!r} not found")
            node = node[p]
        leaf = parts[-1]
        node[leaf] = yaml.safe_load(val)
    return RunConfig(raw)
