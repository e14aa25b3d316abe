"""Assembled operators: symmetry, determinism, manufactured solves, caching."""

import numpy as np
import pytest

from dielsem.errors import AssemblyError, SolverError
from dielsem.operators import REGISTRY, OperatorCache, SolveOperator, project_l2
from dielsem.sem import build_mesh


def fig2_mesh(K=12):
    return build_mesh(2.0, 1.0, 2, [], K, electrodes=[(0.0, 2.0, 0.0)])


def test_matrix_symmetry():
    m = fig2_mesh(K=6)
    op = SolveOperator(m, helm=1.0)
    asym = (op.matrix - op.matrix.T)
    assert np.max(np.abs(asym.data)) if asym.nnz else 0.0 == 0.0


def test_assembly_determinism():
    m = fig2_mesh(K=8)
    a = SolveOperator(m, helm=2.5, dirichlet=m.bottom_dofs)
    b = SolveOperator(m, helm=2.5, dirichlet=m.bottom_dofs)
    assert a.matrix_sha == b.matrix_sha


def test_zero_data_dirichlet_gives_zero():
    m = build_mesh(1.0, 1.0, 2, [0.5], 5, periodic_x=False)
    alldofs = np.unique(np.concatenate([m.bottom_dofs, m.top_dofs,
                                        m.left_dofs, m.right_dofs]))
    op = SolveOperator(m, helm=0.0, dirichlet=alldofs)
    x = op.solve(np.zeros(m.ndof))
    assert np.max(np.abs(x)) == 0.0


def test_constant_dirichlet_harmonic():
    m = build_mesh(1.0, 1.0, 2, [0.5], 5, periodic_x=False)
    alldofs = np.unique(np.concatenate([m.bottom_dofs, m.top_dofs,
                                        m.left_dofs, m.right_dofs]))
    op = SolveOperator(m, helm=0.0, dirichlet=alldofs)
    x = op.solve(np.zeros(m.ndof), dirichlet_values=4.2)
    assert np.max(np.abs(x - 4.2)) < 1e-11


def test_manufactured_helmholtz():
    # -Lap u + u = f with u = cos(pi x) cos(pi y); bottom Dirichlet, top natural
    m = fig2_mesh(K=12)
    u_exact = np.cos(np.pi * m.x) * np.cos(np.pi * m.y)
    f = (1.0 + 2.0 * np.pi**2) * u_exact
    op = SolveOperator(m, helm=1.0, dirichlet=m.bottom_dofs)
    x = op.solve(m.mass_load(f), dirichlet_values=u_exact)
    assert np.max(np.abs(x - u_exact)) < 1e-10


def test_forward_multiply_oracle():
    m = fig2_mesh(K=9)
    op = SolveOperator(m, helm=3.0, dirichlet=m.bottom_dofs)
    rng = np.random.default_rng(7)
    x0 = rng.standard_normal(m.ndof)
    rhs = op.matrix @ x0
    x = op.solve(rhs, dirichlet_values=x0)
    assert np.max(np.abs(x - x0)) < 1e-10 * max(1.0, np.max(np.abs(x0)))
    assert op.residual(x, rhs) < 1e-10


def test_sine_line_solve():
    # -u'' + u = f on a single-row strip with both ends Dirichlet:
    # u = sin(pi x) / (1 + pi^2) solves it with f = sin(pi x)
    m = build_mesh(1.0, 0.1, 4, [], 12, periodic_x=False)
    ends = np.concatenate([m.left_dofs, m.right_dofs])
    op = SolveOperator(m, helm=1.0, dirichlet=ends)
    x = op.solve(m.mass_load(np.sin(np.pi * m.x)), dirichlet_values=0.0)
    assert np.max(np.abs(x - np.sin(np.pi * m.x) / (1 + np.pi**2))) < 1e-10


def test_pure_neumann_requires_pin():
    m = fig2_mesh(K=4)
    with pytest.raises(AssemblyError):
        SolveOperator(m, helm=0.0)
    op = SolveOperator(m, helm=0.0, pin=True)
    rhs = m.mass_load(np.cos(np.pi * m.x))  # zero mean, solvable
    x = op.solve(rhs)
    assert abs(x[op.pin_dof]) == 0.0
    assert op.residual(x, rhs) < 1e-9


def test_factorization_determinism_and_counting():
    REGISTRY.reset()
    m = fig2_mesh(K=6)
    op = SolveOperator(m, helm=1.0, dirichlet=m.bottom_dofs, label="probe")
    op.factorize()
    op.factorize()
    rhs = m.mass_load(np.sin(m.x))
    a = op.solve(rhs)
    b = op.solve(rhs)
    assert np.array_equal(a, b)          # bit-identical repeated solves
    assert REGISTRY.counts["probe"] == 1


def test_cache_shares_identical_operators():
    cache = OperatorCache()
    m = fig2_mesh(K=5)
    a = cache.get(m, helm=2.0, dirichlet=m.bottom_dofs)
    b = cache.get(m, helm=2.0, dirichlet=m.bottom_dofs)
    c = cache.get(m, helm=3.0, dirichlet=m.bottom_dofs)
    assert a is b and a is not c
    assert len(cache) == 2


def test_complex_rhs_two_real_solves():
    m = fig2_mesh(K=8)
    op = SolveOperator(m, helm=2.0, dirichlet=m.bottom_dofs)
    rng = np.random.default_rng(3)
    re, im = rng.standard_normal((2, m.ndof))
    z = op.solve(re + 1j * im)
    assert np.array_equal(z.real, op.solve(re))
    assert np.array_equal(z.imag, op.solve(im))


def test_rhs_shape_mismatch():
    m = fig2_mesh(K=4)
    op = SolveOperator(m, helm=1.0, dirichlet=m.bottom_dofs)
    with pytest.raises(SolverError):
        op.solve(np.zeros(3))


def test_project_l2_derivative():
    # the K=12 interpolation floor on unit elements sits at ~2e-10; K=14 is
    # comfortably below 1e-10
    for K, tol in ((12, 1e-9), (14, 1e-10)):
        m = fig2_mesh(K=K)
        v = np.sin(np.pi * m.x) * np.cos(np.pi * m.y)
        dx_e, _ = m.elem_grad(v)
        p = project_l2(m, m.mass_load_elem(dx_e))
        assert np.max(np.abs(p - np.pi * np.cos(np.pi * m.x) * np.cos(np.pi * m.y))) < tol
