"""Gauss-Lobatto-Legendre basis and 2D quadrilateral spectral-element meshes.

The mesh is a tensor product of ``nx`` uniform columns and rows given by a
list of y-break points, which is what every configuration in this code needs
(rectangular channel, bottom wall carrying electrode segments, open top,
optionally periodic in x).  Elements are axis-aligned rectangles with affine
maps, so all Jacobians are constant per element.

Nodal fields are plain float (or complex) arrays with one coefficient per
global DOF.  Shared edge and corner nodes hold a single DOF, which makes
C0 continuity and periodic identification exact by construction.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigurationError, ParameterError

MAX_ORDER = 32


@dataclass(frozen=True)
class GllRule:
    """Gauss-Lobatto-Legendre nodes, weights and differentiation matrix on [-1,1]."""

    order: int
    nodes: np.ndarray
    weights: np.ndarray
    diff: np.ndarray          # diff[q, a] = l_a'(x_q)
    bary: np.ndarray          # barycentric weights of the nodal Lagrange basis


def _legendre_and_deriv(K, x):
    """P_K(x) and P_K'(x) by the three-term recurrence."""
    p0 = np.ones_like(x)
    p1 = x.copy()
    if K == 0:
        return p0, np.zeros_like(x)
    for k in range(1, K):
        p0, p1 = p1, ((2 * k + 1) * x * p1 - k * p0) / (k + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        dp = K * (x * p1 - p0) / (x * x - 1.0)  # not used at the endpoints
    return p1, dp


def gll_rule(K):
    """GLL rule of order K: K+1 nodes (roots of (1-x^2) P_K'(x)), weights, D.

    Interior nodes are found by Newton iteration on P_K' seeded with
    Chebyshev-Gauss-Lobatto points; weights are 2 / (K (K+1) P_K(x_j)^2).
    Exact for polynomials of degree <= 2K-1.
    """
    if not (1 <= K <= MAX_ORDER):
        raise ParameterError(f"element order must be in [1, {MAX_ORDER}], got {K}")
    n = K + 1
    x = -np.cos(np.pi * np.arange(n) / K)
    if K >= 2:
        xi = x[1:-1].copy()
        for _ in range(100):
            p, dp = _legendre_and_deriv(K, xi)
            # Newton on f = (1-x^2) P_K' = K (P_{K-1} - x P_K); f' via the
            # Legendre ODE: ((1-x^2) P_K')' = -K(K+1) P_K
            step = (1.0 - xi * xi) * dp / (K * (K + 1) * p + 2.0 * xi * dp)
            xi += step
            if np.max(np.abs(step)) < 1e-15:
                break
        x[1:-1] = xi
    x[0], x[-1] = -1.0, 1.0
    p, _ = _legendre_and_deriv(K, x)
    w = 2.0 / (K * n * p * p)

    # Barycentric weights, then the differentiation matrix.
    diffs = x[:, None] - x[None, :]
    np.fill_diagonal(diffs, 1.0)
    bary = 1.0 / np.prod(diffs, axis=1)
    D = np.empty((n, n))
    with np.errstate(divide="ignore"):
        for q in range(n):
            D[q] = bary / bary[q] / (x[q] - x)
            D[q, q] = 0.0
    np.fill_diagonal(D, -D.sum(axis=1))
    return GllRule(order=K, nodes=x, weights=w, diff=D, bary=bary)


_rule_cache = {}


def cached_rule(K):
    rule = _rule_cache.get(K)
    if rule is None:
        rule = _rule_cache[K] = gll_rule(K)
    return rule


def lagrange_basis(rule, t):
    """Values of the nodal Lagrange basis at points t, shape (len(t), K+1)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros((t.size, rule.order + 1))
    d = t[:, None] - rule.nodes[None, :]
    exact = np.isclose(d, 0.0, atol=1e-14)
    on_node = exact.any(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = rule.bary[None, :] / d
        out = terms / terms.sum(axis=1)[:, None]
    if on_node.any():
        out[on_node] = exact[on_node].astype(float)
    return out


@dataclass(frozen=True)
class Electrode:
    x0: float
    x1: float
    voltage: float


@dataclass
class Mesh2D:
    """Tensor-product quadrilateral SEM mesh with tagged boundaries.

    Boundary DOF sets (all disjoint by construction):
      ``se_dofs``   electrode segments on the bottom wall (Dirichlet V)
      ``sg_dofs``   gap segments on the bottom wall (plus the top if closed)
      ``open_dofs`` the open top boundary (empty when ``open_top`` is False)
    ``wall_dofs`` is the union of se and sg.
    """

    Lx: float
    Ly: float
    nx: int
    K: int
    x0: float = 0.0
    y0: float = 0.0
    y_breaks: tuple = ()
    periodic_x: bool = True
    open_top: bool = True
    electrodes: tuple = ()

    rule: GllRule = field(init=False, repr=False)
    ndof: int = field(init=False)

    def __post_init__(self):
        if self.nx < 1:
            raise ParameterError("nx must be >= 1")
        ybr = np.asarray(self.y_breaks, dtype=float)
        if ybr.size and (np.any(np.diff(ybr) <= 0)
                         or ybr[0] <= self.y0 or ybr[-1] >= self.y0 + self.Ly):
            raise ConfigurationError("y_breaks must be strictly increasing inside (y0, y0+Ly)")
        self.rule = cached_rule(self.K)
        self.ny = ybr.size + 1
        self.x_edges = self.x0 + self.Lx * np.arange(self.nx + 1) / self.nx
        self.y_edges = np.concatenate(([self.y0], ybr, [self.y0 + self.Ly]))
        self.hx = self.Lx / self.nx
        self.hy = np.diff(self.y_edges)
        self._check_electrodes()
        self._number_dofs()
        self._tag_boundaries()
        self._local_matrices()

    # -- construction ------------------------------------------------------

    def _check_electrodes(self):
        segs = sorted(self.electrodes, key=lambda s: s.x0)
        tol = 1e-9 * max(self.Lx, 1.0)
        for s in segs:
            if s.x1 <= s.x0:
                raise ConfigurationError(f"electrode [{s.x0}, {s.x1}] has non-positive width")
            for endpoint in (s.x0, s.x1):
                ratio = (endpoint - self.x0) / self.hx
                if abs(ratio - round(ratio)) * self.hx > tol:
                    raise ConfigurationError(
                        f"electrode [{s.x0}, {s.x1}] is not aligned with element "
                        f"edges (spacing {self.hx:g}); offending endpoint {endpoint!r}")
        for a, b in zip(segs, segs[1:]):
            if b.x0 < a.x1 - tol or (abs(b.x0 - a.x1) <= tol and a.voltage != b.voltage):
                raise ConfigurationError(
                    f"electrodes [{a.x0},{a.x1}] and [{b.x0},{b.x1}] overlap or touch "
                    "with different voltages")

    def _number_dofs(self):
        K, nx, ny = self.K, self.nx, self.ny
        n = K + 1
        self.ngx = nx * K if self.periodic_x else nx * K + 1
        self.ngy = ny * K + 1
        self.ndof = self.ngx * self.ngy
        self.nelem = nx * ny

        gx = np.empty((nx, n), dtype=np.int64)
        for ex in range(nx):
            gx[ex] = (ex * K + np.arange(n)) % self.ngx if self.periodic_x \
                else ex * K + np.arange(n)
        gy = np.empty((ny, n), dtype=np.int64)
        for ey in range(ny):
            gy[ey] = ey * K + np.arange(n)

        gid = np.empty((self.nelem, n, n), dtype=np.int64)
        for ey in range(ny):
            for ex in range(nx):
                gid[ey * nx + ex] = gy[ey][None, :] * self.ngx + gx[ex][:, None]
        self.gid = gid

        ref = self.rule.nodes
        xs = np.empty(self.ngx)
        for ex in range(nx):
            xs[gx[ex]] = self.x_edges[ex] + (ref + 1.0) * 0.5 * self.hx
        if self.periodic_x:
            xs[0] = self.x0  # wrap column keeps the master coordinate
        ys = np.empty(self.ngy)
        for ey in range(ny):
            ys[gy[ey]] = self.y_edges[ey] + (ref + 1.0) * 0.5 * self.hy[ey]
        self.x = np.tile(xs, self.ngy)
        self.y = np.repeat(ys, self.ngx)

        # per-element metric factors
        self.elem_hy = np.repeat(self.hy, nx)
        self.scale_x = np.full(self.nelem, 2.0 / self.hx)
        self.scale_y = 2.0 / self.elem_hy

        w2 = np.outer(self.rule.weights, self.rule.weights)
        self.w2d = 0.25 * self.hx * self.elem_hy[:, None, None] * w2[None, :, :]
        self.mass = kernels.scatter_add(self.gid, self.w2d, self.ndof)

    def _tag_boundaries(self):
        bottom = np.arange(self.ngx)
        top = np.arange(self.ngx) + (self.ngy - 1) * self.ngx
        xs = self.x[bottom]
        tol = 1e-9 * max(self.Lx, 1.0)
        se_mask = np.zeros(self.ngx, dtype=bool)
        volt = np.zeros(self.ngx)
        for s in self.electrodes:
            m = (xs >= s.x0 - tol) & (xs <= s.x1 + tol)
            se_mask |= m
            volt[m] = s.voltage
        self.se_dofs = bottom[se_mask]
        self.se_voltages = volt[se_mask]
        self.sg_dofs = bottom[~se_mask]
        if self.open_top:
            self.open_dofs = top
        else:
            self.open_dofs = np.empty(0, dtype=np.int64)
            self.sg_dofs = np.concatenate([self.sg_dofs, top])
        self.bottom_dofs = bottom
        self.top_dofs = top
        self.wall_dofs = np.concatenate([self.se_dofs, self.sg_dofs])
        if not self.periodic_x:
            self.left_dofs = np.arange(self.ngy, dtype=np.int64) * self.ngx
            self.right_dofs = self.left_dofs + self.ngx - 1
        else:
            self.left_dofs = self.right_dofs = np.empty(0, dtype=np.int64)

        # edge bookkeeping for boundary integrals
        n = self.K + 1
        self._edges = {}
        for side, ey, bidx in (("bottom", 0, 0), ("top", self.ny - 1, self.K)):
            elems = ey * self.nx + np.arange(self.nx)
            egid = self.gid[elems]                       # (nx, n, n)
            self._edges[side] = {
                "elems": elems,
                "egid": egid,
                "bidx": bidx,
                "edge_gid": egid[:, :, bidx],            # (nx, n)
                "hy": self.hy[ey],
                "normal_y": -1.0 if side == "bottom" else 1.0,
            }

    def _local_matrices(self):
        w, D = self.rule.weights, self.rule.diff
        self.A1 = D.T @ (w[:, None] * D)   # 1D stiffness on the reference interval
        self.WD = w[:, None] * D           # WD[q, a] = w_q D[q, a]

    # -- hashing -----------------------------------------------------------

    def content_hash(self):
        h = hashlib.sha256()
        h.update(np.array([self.Lx, self.Ly, self.x0, self.y0], dtype="<f8").tobytes())
        h.update(np.array([self.nx, self.K, int(self.periodic_x), int(self.open_top)],
                          dtype="<i8").tobytes())
        h.update(np.asarray(self.y_breaks, dtype="<f8").tobytes())
        for s in self.electrodes:
            h.update(np.array([s.x0, s.x1, s.voltage], dtype="<f8").tobytes())
        return h.hexdigest()

    # -- fields ------------------------------------------------------------

    def zeros(self, dtype=float):
        return np.zeros(self.ndof, dtype=dtype)

    def nodal(self, fn, t=None):
        """Evaluate fn(x, y) or fn(x, y, t) at the global nodes."""
        return fn(self.x, self.y) if t is None else fn(self.x, self.y, t)

    def gather(self, u):
        return kernels.gather(self.gid, u)

    def elem_grad(self, u):
        """Collocation gradient per element; discontinuous across edges."""
        fe = kernels.gather(self.gid, u)
        return (kernels.deriv_x(fe, self.rule.diff, self.scale_x),
                kernels.deriv_y(fe, self.rule.diff, self.scale_y))

    def project_elem(self, fe):
        """L2 projection of elementwise values onto the C0 nodal space."""
        return kernels.scatter_add(self.gid, self.w2d * fe, self.ndof) / self.mass

    def nodal_grad(self, u):
        """Continuous gradient: L2 projection of the collocation derivative."""
        dx_e, dy_e = self.elem_grad(u)
        return self.project_elem(dx_e), self.project_elem(dy_e)

    def integrate(self, u):
        """Integral of a nodal field over the domain (GLL quadrature)."""
        return float(self.mass @ u) if not np.iscomplexobj(u) else complex(self.mass @ u)

    def integrate_elem(self, fe):
        return (self.w2d * fe).sum()

    # -- volume loads --------------------------------------------------------

    def mass_load(self, u):
        """Load vector of the integral ∫ u ω for a nodal field u."""
        return self.mass * u

    def mass_load_elem(self, fe):
        return kernels.scatter_add(self.gid, self.w2d * fe, self.ndof)

    def grad_load(self, fx_e, fy_e):
        """Load vector of ∫ (Fx ∂x ω + Fy ∂y ω) for elementwise vector values."""
        w = self.rule.weights
        t1 = np.einsum("qc,eqd->ecd", self.WD, fx_e)
        t1 *= (0.5 * self.elem_hy[:, None, None]) * w[None, None, :]
        t2 = np.einsum("pd,ecp->ecd", self.WD, fy_e)
        t2 *= (0.5 * self.hx) * w[None, :, None]
        return kernels.scatter_add(self.gid, t1 + t2, self.ndof)

    # -- edge coordinates and loads ------------------------------------------

    def edge_coords(self, side):
        e = self._edges[side]
        g = e["edge_gid"]
        return self.x[g], self.y[g]

    def edge_values(self, side, u):
        return u[self._edges[side]["edge_gid"]]

    def edge_slice(self, side, fe):
        """Edge-node values of an elementwise array, from the adjacent elements."""
        e = self._edges[side]
        return fe[e["elems"]][:, :, e["bidx"]]

    def edge_normal_y(self, side):
        return self._edges[side]["normal_y"]

    def edge_mass_load(self, side, vals):
        """Load of ∮ f ω over one horizontal boundary; vals has shape (nx, K+1)."""
        e = self._edges[side]
        contrib = (0.5 * self.hx) * self.rule.weights[None, :] * vals
        return kernels.scatter_add(e["edge_gid"][:, :, None], contrib[:, :, None], self.ndof)

    def edge_integral(self, side, vals):
        return ((0.5 * self.hx) * self.rule.weights[None, :] * vals).sum()

    def edge_grad_load(self, side, fx, fy):
        """Load of ∮ (Fx ∂x ω + Fy ∂y ω) over one horizontal boundary.

        The tangential part differentiates along the edge; the normal part
        reaches into the first row of element nodes through ∂y of the basis.
        """
        e = self._edges[side]
        n = self.K + 1
        w, D = self.rule.weights, self.rule.diff
        bidx = e["bidx"]
        out = np.zeros((len(e["elems"]), n, n), dtype=np.result_type(fx, fy, float))
        # tangential: sum_a w_a Fx[j,a] D[a,c] -> row (c, bidx)
        out[:, :, bidx] += np.einsum("ja,ac->jc", w[None, :] * fx, D)
        # normal: (hx/hy) w_c Fy[j,c] D[bidx,d]
        out += (self.hx / e["hy"]) * (w[None, :] * fy)[:, :, None] * D[bidx, :][None, None, :]
        return kernels.scatter_add(e["egid"], out, self.ndof)

    # -- interpolation -------------------------------------------------------

    def _locate_x(self, xq):
        ex = np.clip(((xq - self.x0) / self.hx).astype(int), 0, self.nx - 1)
        t = 2.0 * (xq - self.x_edges[ex]) / self.hx - 1.0
        return ex, np.clip(t, -1.0, 1.0)

    def _locate_y(self, yq):
        ey = np.clip(np.searchsorted(self.y_edges, yq, side="right") - 1, 0, self.ny - 1)
        t = 2.0 * (yq - self.y_edges[ey]) / self.hy[ey] - 1.0
        return ey, np.clip(t, -1.0, 1.0)

    def resample_grid(self, u, xs, ys):
        """Spectral evaluation of a nodal field on a tensor grid.

        Returns values with shape (len(xs), len(ys)).
        """
        ex, tx = self._locate_x(np.asarray(xs, dtype=float))
        ey, ty = self._locate_y(np.asarray(ys, dtype=float))
        bx = lagrange_basis(self.rule, tx)
        by = lagrange_basis(self.rule, ty)
        fe = self.gather(u)
        n = self.K + 1
        out = np.empty((len(xs), len(ys)), dtype=u.dtype)
        for col in range(self.nx):
            mx = ex == col
            if not mx.any():
                continue
            for row in range(self.ny):
                my = ey == row
                if not my.any():
                    continue
                vals = fe[row * self.nx + col]
                out[np.ix_(mx, my)] = bx[mx] @ vals @ by[my].T
        return out

    def eval_points(self, u, xq, yq):
        """Pointwise spectral evaluation (vectorized over query points)."""
        xq = np.atleast_1d(np.asarray(xq, dtype=float))
        yq = np.atleast_1d(np.asarray(yq, dtype=float))
        ex, tx = self._locate_x(xq)
        ey, ty = self._locate_y(yq)
        bx = lagrange_basis(self.rule, tx)
        by = lagrange_basis(self.rule, ty)
        fe = self.gather(u)[ey * self.nx + ex]
        return np.einsum("pa,pab,pb->p", bx, fe, by)


def build_mesh(Lx, Ly, nx, y_breaks, K, electrodes=(), periodic_x=True,
               open_top=True, x0=0.0, y0=0.0):
    """Construct the tensor-product mesh used by every solver in this package.

    ``electrodes`` is an iterable of (x0, x1, voltage) triples; segment
    endpoints must coincide with element edges (columns are uniform).
    """
    segs = tuple(Electrode(float(a), float(b), float(v)) for a, b, v in electrodes)
    return Mesh2D(Lx=float(Lx), Ly=float(Ly), nx=int(nx), K=int(K),
                  x0=float(x0), y0=float(y0),
                  y_breaks=tuple(float(v) for v in y_breaks),
                  periodic_x=bool(periodic_x), open_top=bool(open_top),
                  electrodes=segs)
