"""Constant-coefficient Helmholtz/Poisson operators with cached factorizations.

The whole point of the time-stepping scheme is that every linear system has a
coefficient matrix that never changes during a run, so each operator is
assembled and factorized exactly once and then reused for thousands of
back-substitutions.  A module-level registry counts factorizations so tests
can assert that property.

Dirichlet conditions are imposed by lifting: the interior block is
factorized, and known boundary values are moved to the right-hand side.
Complex right-hand sides (3D Fourier modes) are solved as two real solves
against the same real factor.
"""

import hashlib
import threading

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import AssemblyError, SolverError


class FactorizationRegistry:
    """Counts operator factorizations per run; keyed by operator label."""

    def __init__(self):
        self._lock = threading.Lock()
        self.counts = {}

    def record(self, label):
        with self._lock:
            self.counts[label] = self.counts.get(label, 0) + 1

    def reset(self):
        with self._lock:
            self.counts.clear()

    def total(self):
        return sum(self.counts.values())

    def max_per_operator(self):
        return max(self.counts.values(), default=0)


REGISTRY = FactorizationRegistry()


def _assemble_csr(mesh, helm, scale):
    """Global CSR of scale * (∫∇u·∇v + helm ∫uv) on the mesh."""
    n = mesh.K + 1
    w = mesh.rule.weights
    A1 = mesh.A1
    Ix = np.repeat(np.arange(n), n)    # flatten (a, b) -> a * n + b
    Iy = np.tile(np.arange(n), n)

    rows, cols, vals = [], [], []
    w2 = np.outer(w, w).ravel()
    for ey in range(mesh.ny):
        hy = mesh.hy[ey]
        loc = (hy / mesh.hx) * np.kron(A1, np.diag(w)) \
            + (mesh.hx / hy) * np.kron(np.diag(w), A1) \
            + helm * (0.25 * mesh.hx * hy) * np.diag(w2)
        loc = loc * scale
        for ex in range(mesh.nx):
            g = mesh.gid[ey * mesh.nx + ex].ravel()
            rows.append(np.repeat(g, n * n))
            cols.append(np.tile(g, n * n))
            vals.append(loc.ravel())
    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(mesh.ndof, mesh.ndof),
    )
    return A.tocsr()


class SolveOperator:
    """An assembled operator plus its (lazily computed) direct factorization."""

    def __init__(self, mesh, helm, dirichlet=None, scale=1.0, pin=False, label=None):
        self.mesh = mesh
        self.helm = float(helm)
        self.scale = float(scale)
        self.label = label or f"helm={helm:.6g}"
        dir_idx = np.unique(np.asarray(dirichlet if dirichlet is not None else [],
                                       dtype=np.int64))
        self.pin_dof = None
        if dir_idx.size == 0 and helm <= 0.0:
            if not pin:
                raise AssemblyError(
                    f"operator {self.label!r}: pure-Neumann Laplacian is singular; "
                    "supply a Dirichlet set or enable pinning to fix the nullspace")
            # pin one interior DOF to zero to remove the constant nullspace
            interior = np.setdiff1d(np.arange(mesh.ndof), dir_idx)
            self.pin_dof = int(interior[len(interior) // 2])
            dir_idx = np.array([self.pin_dof], dtype=np.int64)
        self.dirichlet = dir_idx
        self.interior = np.setdiff1d(np.arange(mesh.ndof), dir_idx)

        self.matrix = _assemble_csr(mesh, self.helm, self.scale)
        self.matrix_sha = hashlib.sha256(
            self.matrix.indptr.tobytes() + self.matrix.indices.tobytes()
            + self.matrix.data.tobytes()).hexdigest()
        self._Aii = self.matrix[self.interior][:, self.interior].tocsc()
        self._Aid = self.matrix[self.interior][:, self.dirichlet].tocsr() \
            if dir_idx.size else None
        self._lu = None
        self._lock = threading.Lock()

    @property
    def factorized(self):
        return self._lu is not None

    def factorize(self):
        """Compute and cache the sparse LU factor of the interior block."""
        with self._lock:
            if self._lu is None:
                try:
                    # minimum-degree on A^T+A: ~2.5x less fill than COLAMD here
                    self._lu = spla.splu(self._Aii, permc_spec="MMD_AT_PLUS_A",
                                         options={"SymmetricMode": True})
                except RuntimeError as exc:
                    raise SolverError(f"factorization of {self.label!r} failed: {exc}")
                REGISTRY.record(self.label)
        return self

    def solve(self, rhs, dirichlet_values=None):
        """Solve A x = rhs with the cached factor; rhs is an assembled load.

        ``dirichlet_values`` may be a scalar, an array over the Dirichlet
        DOFs, or a full-length array (values read at the Dirichlet set).
        """
        if rhs.shape != (self.mesh.ndof,):
            raise SolverError(
                f"rhs length {rhs.shape} does not match ndof {self.mesh.ndof}")
        if self._lu is None:
            self.factorize()
        nd = self.dirichlet.size
        if dirichlet_values is None:
            dvals = np.zeros(nd)
        else:
            dv = np.asarray(dirichlet_values)
            dvals = np.full(nd, dv) if dv.ndim == 0 else (
                dv[self.dirichlet] if dv.shape == (self.mesh.ndof,) else dv)
        if self.pin_dof is not None:
            dvals = np.zeros(1)

        x = np.zeros(self.mesh.ndof, dtype=np.result_type(rhs, dvals, float))
        x[self.dirichlet] = dvals
        b = rhs[self.interior]
        if nd:
            b = b - self._Aid @ dvals
        if np.iscomplexobj(b):
            x[self.interior] = self._lu.solve(b.real.copy()) \
                + 1j * self._lu.solve(b.imag.copy())
        else:
            x[self.interior] = self._lu.solve(b)
        return x

    def residual(self, x, rhs):
        r = self.matrix @ x - rhs
        r = r[self.interior]
        denom = max(np.max(np.abs(rhs[self.interior])), 1e-300)
        return float(np.max(np.abs(r)) / denom)


class OperatorCache:
    """Shares one factorization among operators with an identical identity.

    The identity is (mesh, scale, Helmholtz constant, Dirichlet set);
    operators for Fourier modes +k and -k therefore collapse onto one entry
    because they only enter through beta_k^2.
    """

    def __init__(self):
        self._store = {}
        self._lock = threading.Lock()

    def get(self, mesh, helm, dirichlet=None, scale=1.0, pin=False, label=None):
        d = np.unique(np.asarray(dirichlet if dirichlet is not None else [],
                                 dtype=np.int64))
        key = (mesh.content_hash(), float(scale), float(helm),
               hashlib.sha256(d.tobytes()).hexdigest(), bool(pin and d.size == 0))
        with self._lock:
            op = self._store.get(key)
            if op is None:
                op = SolveOperator(mesh, helm, dirichlet=d, scale=scale,
                                   pin=pin, label=label)
                self._store[key] = op
        return op

    def __len__(self):
        return len(self._store)


def project_l2(mesh, rhs_load):
    """Field whose mass-matrix product equals the given load (diagonal GLL mass)."""
    return rhs_load / mesh.mass
