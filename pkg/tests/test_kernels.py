import importlib.util
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from conftest import harmonic, random_points
from hfk import _kernels
from hfk.models import eval_k_jet, eval_metric_jet

needs_numba = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba path disabled")


def _inputs(n=64, seed=0):
    model = harmonic()
    x = random_points(n, 9.0, seed)
    mj, kj = eval_metric_jet(model, x), eval_k_jet(model, x)
    ginv, Gam, Ric, _ = _kernels.curvature_np(mj.g, mj.dg, mj.ddg)
    nk = _kernels.cov_k_np(Gam, kj.k, kj.dk)
    rng = np.random.default_rng(seed)
    T = rng.normal(size=(n, 2, 3))
    Xab = rng.normal(size=(n, 2, 2, 3))
    return mj, kj, ginv, Gam, Ric, nk, T, Xab + Xab.transpose(0, 2, 1, 3)


@needs_numba
def test_curvature_paths_agree():
    mj, *_ = _inputs()
    for a, b in zip(_kernels.curvature_np(mj.g, mj.dg, mj.ddg),
                    _kernels.curvature_nb(mj.g, mj.dg, mj.ddg)):
        assert np.allclose(a, b, rtol=1e-12, atol=1e-15 * np.max(np.abs(a)))


@needs_numba
def test_cov_k_paths_agree():
    mj, kj, ginv, Gam, Ric, nk, T, Xab = _inputs()
    assert np.allclose(_kernels.cov_k_nb(Gam, kj.k, kj.dk), nk, rtol=1e-12, atol=1e-18)


@needs_numba
def test_surface_paths_agree():
    mj, kj, ginv, Gam, Ric, nk, T, Xab = _inputs()
    args = (mj.g, ginv, mj.dg, Gam, Ric, kj.k, nk, T, Xab)
    for a, b in zip(_kernels.surface_np(*args), _kernels.surface_nb(*args)):
        assert np.allclose(a, b, rtol=1e-10, atol=1e-13 * max(np.max(np.abs(a)), 1e-300))


_SCRIPT = """
import json, numpy as np
from hfk import _kernels
from hfk.models import HarmonicAsymptotics
from hfk.surface import GraphSurface, build_surface_geometry
from hfk.functionals import hawking_energy
g = build_surface_geometry(HarmonicAsymptotics(1.0, (0.1, 0.0, 0.0)), GraphSurface.sphere(9.0, (0.03, 0.0, 0.0)))
print(json.dumps({"backend": _kernels.backend(), "E": hawking_energy(g), "H": g.H[:8].tolist()}))
"""


def _probe(flag):
    env = dict(os.environ)
    env.pop("HFK_NO_NUMBA", None)
    if flag is not None:
        env["HFK_NO_NUMBA"] = flag
    out = subprocess.run([sys.executable, "-c", _SCRIPT], env=env, capture_output=True,
                         text=True, check=True)
    return json.loads(out.stdout)


def test_environment_switch_selects_numpy():
    off = _probe("1")
    assert off["backend"] == "numpy"
    on = _probe(None)
    assert on["backend"] == ("numba" if importlib.util.find_spec("numba") else "numpy")
    assert on["E"] == pytest.approx(off["E"], rel=1e-12)
    assert np.allclose(on["H"], off["H"], rtol=1e-12)
    assert _probe("0")["backend"] == on["backend"]
