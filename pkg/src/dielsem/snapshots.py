"""Binary snapshot and checkpoint files, diagnostics CSV, text export.

The on-disk format is deliberately simple and fully specified here:

    magic     8 bytes  b"DSEMSNAP"
    version   u32      format version (currently 1)
    kind      u8       0 = snapshot, 1 = checkpoint
    mesh_hash 32 bytes sha256 of the mesh definition
    cfg_hash  32 bytes sha256 of the config echo (zeros if unknown)
    code_ver  16 bytes package version, zero padded
    ndof u64, Nz u32, Lz f64
    n u64, t f64, dt f64, J u8
    nfields   u16
    per field: name_len u16, name utf-8, ndof*Nz little-endian f64

Everything is little-endian.  Restarting from a checkpoint reproduces the
uninterrupted run bit for bit because the entire stepper state (both history
levels) round-trips exactly.
"""

import hashlib
import struct

import numpy as np

MAGIC = b"DSEMSNAP"
VERSION = 1
CODE_VERSION = "dielsem-0.1"


def config_hash(text):
    return hashlib.sha256(text.encode()).digest()


def write_container(path, fields, mesh_hash, kind=0, cfg_hash=b"\0" * 32,
                    Nz=1, Lz=0.0, n=0, t=0.0, dt=0.0, J=2):
    """Write a snapshot/checkpoint; ``fields`` is {name: array}."""
    names = sorted(fields)
    first = fields[names[0]]
    ndof = first.shape[0]
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IB", VERSION, kind))
        fh.write(bytes.fromhex(mesh_hash) if isinstance(mesh_hash, str)
                 else mesh_hash)
        fh.write(cfg_hash)
        fh.write(CODE_VERSION.encode().ljust(16, b"\0")[:16])
        fh.write(struct.pack("<QId", ndof, Nz, Lz))
        fh.write(struct.pack("<QddB", n, t, dt, J))
        fh.write(struct.pack("<H", len(names)))
        for name in names:
            arr = np.ascontiguousarray(fields[name], dtype="<f8")
            if arr.shape[0] != ndof:
                raise ValueError(f"field {name!r} has inconsistent length")
            nb = name.encode()
            fh.write(struct.pack("<H", len(nb)))
            fh.write(nb)
            fh.write(arr.tobytes())


def read_container(path):
    """Read a snapshot/checkpoint; returns (fields, meta)."""
    with open(path, "rb") as fh:
        if fh.read(8) != MAGIC:
            raise ValueError(f"{path}: not a dielsem container")
        version, kind = struct.unpack("<IB", fh.read(5))
        if version != VERSION:
            raise ValueError(f"{path}: unsupported format version {version}")
        mesh_hash = fh.read(32).hex()
        cfg_hash = fh.read(32)
        code_ver = fh.read(16).rstrip(b"\0").decode()
        ndof, Nz, Lz = struct.unpack("<QId", fh.read(20))
        n, t, dt, J = struct.unpack("<QddB", fh.read(25))
        (nfields,) = struct.unpack("<H", fh.read(2))
        fields = {}
        for _ in range(nfields):
            (ln,) = struct.unpack("<H", fh.read(2))
            name = fh.read(ln).decode()
            data = np.frombuffer(fh.read(ndof * Nz * 8), dtype="<f8")
            fields[name] = data.reshape(ndof, Nz) if Nz > 1 else data.copy()
    meta = {"kind": kind, "mesh_hash": mesh_hash, "cfg_hash": cfg_hash,
            "code_version": code_ver, "ndof": ndof, "Nz": Nz, "Lz": Lz,
            "n": n, "t": t, "dt": dt, "J": J}
    return fields, meta


def write_checkpoint(path, stepper, mesh_hash, cfg_hash=b"\0" * 32, Nz=1, Lz=0.0):
    state = stepper.state_dict()
    fields = {k: np.atleast_1d(v) for k, v in state.items()
              if isinstance(v, np.ndarray)}
    write_container(path, fields, mesh_hash, kind=1, cfg_hash=cfg_hash,
                    Nz=Nz, Lz=Lz, n=state["n"], t=state["t"],
                    dt=state["dt"], J=state["J"])


def load_checkpoint(path, stepper, expect_mesh_hash=None):
    fields, meta = read_container(path)
    if meta["kind"] != 1:
        raise ValueError(f"{path}: not a checkpoint")
    if expect_mesh_hash is not None and meta["mesh_hash"] != expect_mesh_hash:
        raise ValueError(
            f"{path}: checkpoint mesh {meta['mesh_hash'][:12]} does not match "
            f"run mesh {expect_mesh_hash[:12]}")
    state = dict(fields)
    state.update(n=meta["n"], t=meta["t"], dt=meta["dt"], J=meta["J"])
    stepper.load_state(state)
    return meta


def export_text(path, fields, meta):
    """Plain-text dump of a container for interop."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# dielsem text export ({meta['code_version']})\n")
        for key in ("mesh_hash", "n", "t", "dt", "J", "Nz", "Lz"):
            fh.write(f"# {key} = {meta[key]}\n")
        for name in sorted(fields):
            arr = np.asarray(fields[name])
            fh.write(f"# field {name} shape {arr.shape}\n")
            np.savetxt(fh, arr.reshape(arr.shape[0], -1))


class CsvWriter:
    """Line-buffered CSV with a fixed header; flushes on every row."""

    def __init__(self, path, columns):
        self.columns = list(columns)
        self._fh = open(path, "w", encoding="utf-8", buffering=1)
        self._fh.write(",".join(self.columns) + "\n")

    def row(self, values):
        cells = []
        for c in self.columns:
            v = values[c]
            cells.append(f"{v:.17g}" if isinstance(v, float) else str(v))
        self._fh.write(",".join(cells) + "\n")

    def close(self):
        self._fh.close()
