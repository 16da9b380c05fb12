"""Time the per-node kernels on the numba and numpy paths.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--nodes N]

The numba timings exclude the first (compiling) call.  The full geometry
build is timed through whichever backend the current process selected; run
once with HFK_NO_NUMBA=1 to time it on the numpy path.
"""
import argparse
import time

import numpy as np

from hfk import _kernels
from hfk.models import HarmonicAsymptotics, eval_k_jet, eval_metric_jet
from hfk.surface import GraphSurface, build_surface_geometry


def _inputs(model, n, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 3))
    x = 20.0 * x / np.linalg.norm(x, axis=1)[:, None]
    mj = eval_metric_jet(model, x)
    kj = eval_k_jet(model, x)
    ginv, Gam, Ric, _ = _kernels.curvature_np(mj.g, mj.dg, mj.ddg)
    nk = _kernels.cov_k_np(Gam, kj.k, kj.dk)
    T = rng.normal(size=(n, 2, 3))
    Xab = rng.normal(size=(n, 2, 2, 3))
    Xab = 0.5 * (Xab + Xab.transpose(0, 2, 1, 3))
    return mj, kj, ginv, Gam, Ric, nk, T, Xab


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--nodes", type=int, default=32 * 32)
    args = ap.parse_args(argv)
    model = HarmonicAsymptotics(1.0, (0.1, 0.0, 0.0))
    mj, kj, ginv, Gam, Ric, nk, T, Xab = _inputs(model, args.nodes)
    cases = {
        "curvature": (lambda f: f(mj.g, mj.dg, mj.ddg), "curvature"),
        "cov_k": (lambda f: f(Gam, kj.k, kj.dk), "cov_k"),
        "surface": (lambda f: f(mj.g, ginv, mj.dg, Gam, Ric, kj.k, nk, T, Xab), "surface"),
    }
    print(f"backend of this process: {_kernels.backend()}, nodes: {args.nodes}")
    print(f"{'kernel':<12}{'numpy [ms]':>14}{'numba [ms]':>14}{'speedup':>10}")
    for name, (call, stem) in cases.items():
        t_np = _best(lambda: call(getattr(_kernels, stem + "_np")), args.repeat)
        if _kernels.HAVE_NUMBA:
            nb = getattr(_kernels, stem + "_nb")
            call(nb)
            t_nb = _best(lambda: call(nb), args.repeat)
            print(f"{name:<12}{1e3 * t_np:>14.3f}{1e3 * t_nb:>14.3f}{t_np / t_nb:>10.1f}")
        else:
            print(f"{name:<12}{1e3 * t_np:>14.3f}{'-':>14}{'-':>10}")
    surf = GraphSurface.sphere(20.0)
    build_surface_geometry(model, surf)
    t_geom = _best(lambda: build_surface_geometry(model, surf), args.repeat)
    print(f"geometry build ({_kernels.backend()}): {1e3 * t_geom:.3f} ms")


if __name__ == "__main__":
    main()
