"""Hot inner-loop kernels with a numba fast path and a pure-numpy fallback.

Every kernel exists in two functionally identical variants.  The active
backend is chosen once at import time from the ``DIELSEM_KERNELS``
environment variable:

    DIELSEM_KERNELS=numba   force the JIT kernels (error if numba is missing)
    DIELSEM_KERNELS=numpy   force the vectorized numpy fallbacks
    unset / auto            numba when importable, numpy otherwise

All kernels operate on stacked per-element arrays of shape
``(nelem, n, n)`` where ``n = K + 1`` nodes per direction, with index
``[e, a, b]`` meaning x-node ``a`` and y-node ``b``.  ``benchmarks/``
contains a script timing both backends against each other.
"""

import os

import numpy as np

_choice = os.environ.get("DIELSEM_KERNELS", "auto").lower()
if _choice not in ("auto", "numba", "numpy"):
    raise ValueError(f"DIELSEM_KERNELS must be auto|numba|numpy, got {_choice!r}")

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    numba = None
    _HAVE_NUMBA = False

if _choice == "numba" and not _HAVE_NUMBA:  # pragma: no cover
    raise ImportError("DIELSEM_KERNELS=numba but numba is not importable")

USE_NUMBA = _HAVE_NUMBA and _choice != "numpy"


# ---------------------------------------------------------------------------
# numpy reference implementations
# ---------------------------------------------------------------------------

def gather_np(gid, u):
    """Element-local copies of a global nodal field: out[e,a,b] = u[gid[e,a,b]]."""
    return u[gid]


def scatter_add_np(gid, vals, ndof):
    """Sum element-local contributions into a global vector (duplicates add)."""
    if np.iscomplexobj(vals):
        re = np.bincount(gid.ravel(), weights=vals.real.ravel(), minlength=ndof)
        im = np.bincount(gid.ravel(), weights=vals.imag.ravel(), minlength=ndof)
        return re + 1j * im
    return np.bincount(gid.ravel(), weights=vals.ravel(), minlength=ndof)


def deriv_x_np(fe, D, scale_x):
    """d/dx of element fields: (2/hx) D applied along the x index, per element."""
    out = np.einsum("qa,eab->eqb", D, fe)
    out *= scale_x[:, None, None]
    return out


def deriv_y_np(fe, D, scale_y):
    """d/dy of element fields: (2/hy) D applied along the y index, per element."""
    out = np.einsum("qb,eab->eaq", D, fe)
    out *= scale_y[:, None, None]
    return out


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if _HAVE_NUMBA:

    @numba.njit(cache=True, parallel=True)
    def _gather_nb(gid, u, out):
        ne, na, nb = gid.shape
        for e in numba.prange(ne):
            for a in range(na):
                for b in range(nb):
                    out[e, a, b] = u[gid[e, a, b]]

    @numba.njit(cache=True)
    def _scatter_add_nb(gid, vals, out):
        ne, na, nb = gid.shape
        for e in range(ne):
            for a in range(na):
                for b in range(nb):
                    out[gid[e, a, b]] += vals[e, a, b]

    @numba.njit(cache=True, parallel=True)
    def _deriv_x_nb(fe, D, scale_x, out):
        ne, n, _ = fe.shape
        for e in numba.prange(ne):
            s = scale_x[e]
            for q in range(n):
                for b in range(n):
                    acc = 0.0
                    for a in range(n):
                        acc += D[q, a] * fe[e, a, b]
                    out[e, q, b] = s * acc

    @numba.njit(cache=True, parallel=True)
    def _deriv_y_nb(fe, D, scale_y, out):
        ne, n, _ = fe.shape
        for e in numba.prange(ne):
            s = scale_y[e]
            for a in range(n):
                for q in range(n):
                    acc = 0.0
                    for b in range(n):
                        acc += D[q, b] * fe[e, a, b]
                    out[e, a, q] = s * acc

    def gather_nb(gid, u):
        out = np.empty(gid.shape, dtype=u.dtype)
        if np.iscomplexobj(u):
            return u[gid]  # complex path stays in numpy
        _gather_nb(gid, u, out)
        return out

    def scatter_add_nb(gid, vals, ndof):
        if np.iscomplexobj(vals):
            return scatter_add_np(gid, vals, ndof)
        out = np.zeros(ndof)
        _scatter_add_nb(gid, np.ascontiguousarray(vals), out)
        return out

    def deriv_x_nb(fe, D, scale_x):
        if np.iscomplexobj(fe):
            return deriv_x_np(fe, D, scale_x)
        out = np.empty_like(fe)
        _deriv_x_nb(np.ascontiguousarray(fe), D, scale_x, out)
        return out

    def deriv_y_nb(fe, D, scale_y):
        if np.iscomplexobj(fe):
            return deriv_y_np(fe, D, scale_y)
        out = np.empty_like(fe)
        _deriv_y_nb(np.ascontiguousarray(fe), D, scale_y, out)
        return out


# JIT launch overhead beats the work on small batches, so the dispatchers
# route small arrays to numpy even on the numba backend.  Crossovers were
# measured with benchmarks/bench_kernels.py; they differ per kernel because
# fancy indexing (gather) is already near memory bandwidth while the tensor
# contractions gain from fusion earlier.
GATHER_MIN = 400_000
DERIV_MIN = 60_000
SCATTER_MIN = 60_000

if USE_NUMBA:
    def gather(gid, u):
        return gather_nb(gid, u) if gid.size >= GATHER_MIN else gather_np(gid, u)

    def scatter_add(gid, vals, ndof):
        if gid.size >= SCATTER_MIN:
            return scatter_add_nb(gid, vals, ndof)
        return scatter_add_np(gid, vals, ndof)

    def deriv_x(fe, D, scale_x):
        return deriv_x_nb(fe, D, scale_x) if fe.size >= DERIV_MIN \
            else deriv_x_np(fe, D, scale_x)

    def deriv_y(fe, D, scale_y):
        return deriv_y_nb(fe, D, scale_y) if fe.size >= DERIV_MIN \
            else deriv_y_np(fe, D, scale_y)

    BACKEND = "numba"
else:
    gather = gather_np
    scatter_add = scatter_add_np
    deriv_x = deriv_x_np
    deriv_y = deriv_y_np
    BACKEND = "numpy"
