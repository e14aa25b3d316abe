"""Timing comparison of the numba and numpy kernel backends.

Runs the shared hot kernels (gather, scatter-add, tensor derivatives) over a
range of element-batch sizes and reports per-call times for both backends,
plus the full-step cost of the 2D stepper under each. Run it twice; numba
compiles on first use (cache=True keeps the artifacts).

    python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from dielsem import kernels
from dielsem.sem import build_mesh


def _time(fn, *args, repeat=50):
    fn(*args)  # warm up / compile
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def bench_kernels():
    print(f"active backend: {kernels.BACKEND}")
    print(f"{'case':>28s} {'numpy':>12s} {'numba':>12s} {'ratio':>7s}")
    rng = np.random.default_rng(0)
    for ne, K in ((8, 8), (64, 12), (512, 12), (2048, 16)):
        n = K + 1
        ndof = ne * n * n  # upper bound; duplicates are fine for timing
        gid = rng.integers(0, ndof, size=(ne, n, n))
        u = rng.standard_normal(ndof)
        fe = rng.standard_normal((ne, n, n))
        D = rng.standard_normal((n, n))
        scale = rng.standard_normal(ne)

        rows = [
            ("gather", (kernels.gather_np, (gid, u)),
             (getattr(kernels, "gather_nb", None), (gid, u))),
            ("scatter_add", (kernels.scatter_add_np, (gid, fe, ndof)),
             (getattr(kernels, "scatter_add_nb", None), (gid, fe, ndof))),
            ("deriv_x", (kernels.deriv_x_np, (fe, D, scale)),
             (getattr(kernels, "deriv_x_nb", None), (fe, D, scale))),
            ("deriv_y", (kernels.deriv_y_np, (fe, D, scale)),
             (getattr(kernels, "deriv_y_nb", None), (fe, D, scale))),
        ]
        for name, (fnp, anp), (fnb, anb) in rows:
            t_np = _time(fnp, *anp)
            if fnb is None:
                print(f"{name}[{ne}x{n}x{n}]".rjust(28)
                      + f" {t_np*1e6:10.1f}us {'n/a':>12s}")
                continue
            t_nb = _time(fnb, *anb)
            print(f"{name}[{ne}x{n}x{n}]".rjust(28)
                  + f" {t_np*1e6:10.1f}us {t_nb*1e6:10.1f}us"
                  + f" {t_np/t_nb:6.2f}x")


def bench_step():
    import os
    from dielsem.model import MixtureModel
    from dielsem.stepper2d import Stepper2D
    import math

    model = MixtureModel(rho1=200.0, rho2=200.0, mu1=1.0, mu2=2.0,
                         eps1=1.0, eps2=8.0, sigma=30.0, eta=0.012,
                         gamma1=5e-6, theta_s=math.pi / 2)
    mesh = build_mesh(1.6, 0.5, 16, [0.125, 0.25, 0.375], 10,
                      electrodes=[(0.1, 0.2, -1.0), (0.3, 0.4, 1.0)])
    st = Stepper2D(mesh, model, dt=1e-6, J=2)
    r = np.hypot(mesh.x - 1.2, mesh.y)
    st.set_initial(phi0=np.tanh((r - 0.35) / (math.sqrt(2) * model.eta)))
    st.run(10)
    t0 = time.perf_counter()
    st.run(100)
    per = (time.perf_counter() - t0) / 100
    print(f"\nfull 2D step ({mesh.ndof} DOFs, backend {kernels.BACKEND}): "
          f"{per*1e3:.2f} ms")


if __name__ == "__main__":
    bench_kernels()
    bench_step()
