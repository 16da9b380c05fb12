"""Command line driver: ``hfk <kind> --config <path> [--out <dir>]``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure (solver,
degenerate surface, failed validation), 4 hypothesis violation
(BoundaryMinimum, NotAFoliation, NotCentered).

CSV bodies depend only on the configuration; timestamps and wall times go to
``manifest.json``.  ``HFK_THREADS`` caps the worker pool used for
independent per-radius evaluations.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .centers import adm_energy, adm_energy_gauss, foliation_center_estimate
from .errors import ConfigError, HfkError, HypothesisViolation, NotAFoliation, NotCentered
from .functionals import BETA_DEFAULT, W2_field, hawking_energy, monotonicity_pack
from .models import model_from_dict, model_to_dict
from .reduction import (DELTA_TILDE, MAX_ITER, TOL, F_r, _leaf_from_solution, build_foliation,
                        ls_solve, minimize_G)
from .sphere import get_basis
from .surface import GraphSurface, build_surface_geometry, laplace_beltrami

__all__ = ["ExperimentConfig", "KINDS", "load_config", "run", "emit_plot_data", "main",
           "ARCHIVE_SCHEMA", "ARCHIVE_VERSION"]

KINDS = ("solve-leaf", "foliate", "energy-report", "center-report", "monotonicity-report",
         "validate")
ARCHIVE_SCHEMA = "hfk-leaf-archive"
ARCHIVE_VERSION = 1

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_HYPOTHESIS = 0, 2, 3, 4


@dataclass
class ExperimentConfig:
    kind: str
    model: dict
    radii: list
    L_max: int = 12
    grid: list = field(default_factory=lambda: [32, 32])
    xi: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    delta_tilde: float = DELTA_TILDE
    tol: float = TOL
    max_iter: int = MAX_ITER
    beta: float = BETA_DEFAULT
    minimize: bool = True
    check_convexity: bool = True
    n_starts: int = 1
    seed: int = 0
    xi_drift: list = None
    output_dir: str = "hfk-out"

    def validate(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if not isinstance(self.L_max, int) or self.L_max < 4:
            raise ConfigError("L_max must be an integer >= 4")
        if len(self.grid) != 2 or min(self.grid) < 2 * self.L_max + 2:
            raise ConfigError("grid must be [n_theta, n_phi] with both >= 2 L_max + 2")
        if not self.radii:
            raise ConfigError("radii must be a non-empty list")
        if any(b <= a for a, b in zip(self.radii[:-1], self.radii[1:])):
            raise ConfigError("radii must be strictly increasing")
        if min(self.radii) <= 0:
            raise ConfigError("radii must be positive")
        for name in ("tol", "delta_tilde"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        if not 0.0 <= self.beta < 0.5:
            raise ConfigError("beta must lie in [0, 1/2)")
        if len(self.xi) != 3:
            raise ConfigError("xi must have three components")
        if self.xi_drift is not None and len(self.xi_drift) != len(self.radii):
            raise ConfigError("xi_drift needs one 3-vector per radius")
        try:
            self.model_obj = model_from_dict(self.model)
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"bad model description: {exc}") from exc
        if self.model_obj.m > 0 and min(self.radii) < 4 * self.model_obj.m:
            raise ConfigError("solver radii must be at least 4 m")
        return self


_FIELDS = set(ExperimentConfig.__dataclass_fields__)


def load_config(path, kind=None, out=None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - _FIELDS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if kind is not None:
        if "kind" in raw and raw["kind"] != kind:
            raise ConfigError(f"config kind {raw['kind']!r} does not match {kind!r}")
        raw["kind"] = kind
    if out is not None:
        raw["output_dir"] = str(out)
    for key in ("kind", "model", "radii"):
        if key not in raw:
            raise ConfigError(f"config needs {key!r}")
    raw["radii"] = [float(r) for r in raw["radii"]]
    try:
        cfg = ExperimentConfig(**raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("HFK_THREADS", "1")))
    except ValueError:
        return 1


def _pmap(fn, items):
    """Order preserving map over a capped thread pool."""
    n = _workers()
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12e")
    return str(v)


def _csv_text(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


class _Writer:
    """Collects every output file and writes them from one place."""

    def __init__(self, out: Path):
        self.out = out
        self.files = {}

    def add(self, name, text):
        self.files[name] = text

    def flush(self):
        self.out.mkdir(parents=True, exist_ok=True)
        for name in sorted(self.files):
            p = self.out / name
            p.parent.mkdir(parents=True, exist_ok=True)
            p.write_text(self.files[name])


# -- leaves ------------------------------------------------------------------

def _kw(cfg):
    return dict(L=cfg.L_max, grid=tuple(cfg.grid), tol=cfg.tol, delta_tilde=cfg.delta_tilde)


def _solve_leaves(cfg):
    model = cfg.model_obj
    leaves, u = [], None
    for r in cfg.radii:
        if cfg.minimize:
            leaf = minimize_G(model, r, None, u, n_starts=cfg.n_starts, seed=cfg.seed,
                              check_convexity=cfg.check_convexity, **_kw(cfg))
        else:
            sol = ls_solve(model, cfg.xi, r, u, max_iter=cfg.max_iter, **_kw(cfg))
            leaf = _leaf_from_solution(model, sol, F_r(sol.geometry, model.m, r), np.zeros(3),
                                       np.zeros(3), False, 1)
        u = leaf.solution.u
        leaves.append(leaf)
    return leaves


def _foliation(cfg, raise_on_failure=True):
    return build_foliation(cfg.model_obj, cfg.radii, xi_drift=cfg.xi_drift,
                           check_convexity=cfg.check_convexity,
                           raise_on_failure=raise_on_failure, **_kw(cfg))


LEAF_COLUMNS = ["r", "xi_x", "xi_y", "xi_z", "lam", "area", "hawking_energy", "int_f",
                "int_f_minus_lam", "center_x", "center_y", "center_z", "G_r", "minimizer",
                "residual_perp", "residual_L1", "iterations", "hessian_min_eig"]


def _leaf_row(leaf):
    s = leaf.solution
    eig = leaf.hessian_eigs
    return {"r": s.r, "xi_x": s.xi[0], "xi_y": s.xi[1], "xi_z": s.xi[2], "lam": s.lam,
            "area": leaf.area, "hawking_energy": leaf.hawking_energy, "int_f": leaf.int_f,
            "int_f_minus_lam": leaf.int_f_minus_lam, "center_x": leaf.euclidean_center[0],
            "center_y": leaf.euclidean_center[1], "center_z": leaf.euclidean_center[2],
            "G_r": leaf.G_value, "minimizer": leaf.minimizer, "residual_perp": s.residual_perp,
            "residual_L1": s.residual_L1, "iterations": s.iterations,
            "hessian_min_eig": float(np.min(eig)) if len(eig) else float("nan")}


def leaf_archive(model, leaves) -> dict:
    recs = []
    for lf in leaves:
        s = lf.solution
        B = s.surface.basis
        recs.append({
            "r": s.r, "xi": [float(v) for v in s.xi], "lam": s.lam, "L_max": s.L,
            "grid": list(s.grid),
            "coefficients": [[int(B.l[i]), int(B.m[i]), float(s.u[i])] for i in range(B.n)],
            "diagnostics": {k: (float(v) if not isinstance(v, (bool, np.bool_)) else bool(v))
                            for k, v in _leaf_row(lf).items()
                            if k not in ("r", "xi_x", "xi_y", "xi_z", "lam")},
        })
    return {"schema": ARCHIVE_SCHEMA, "version": ARCHIVE_VERSION, "model": model_to_dict(model),
            "leaves": recs}


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, allow_nan=True) + "\n"


def _emit_leaves(w, cfg, leaves):
    w.add("leaves.csv", _csv_text([_leaf_row(lf) for lf in leaves], LEAF_COLUMNS))
    w.add("leaves.json", _dump(leaf_archive(cfg.model_obj, leaves)))


# -- plot data ---------------------------------------------------------------

def _series(xs, ys) -> str:
    return "".join(f"{_fmt(float(x))} {_fmt(float(y))}\n" for x, y in zip(xs, ys))


def emit_plot_data(kind: str, report: dict) -> dict:
    """Two-column (r, quantity) series for external plotting."""
    out = {}
    if kind == "energy-report":
        out["plot_r_hawking_energy.dat"] = _series(report["r"], report["hawking_energy"])
        out["plot_r_energy_error.dat"] = _series(report["r"], report["energy_error"])
    elif kind == "center-report":
        out["plot_r_center_gap.dat"] = _series(report["r"], report["center_gap"])
    elif kind == "monotonicity-report":
        out["plot_r_int_f.dat"] = _series(report["r"], report["int_f"])
    return out


# -- experiments -------------------------------------------------------------

def _run_solve_leaf(cfg, w):
    leaves = _solve_leaves(cfg)
    _emit_leaves(w, cfg, leaves)
    return {"leaves": len(leaves)}


def _run_foliate(cfg, w):
    rep = _foliation(cfg, raise_on_failure=False)
    _emit_leaves(w, cfg, rep.leaves)
    rows = [{"r_inner": a.r, "r_outer": b.r, "ordering_margin": o, "containment_margin": c}
            for a, b, o, c in zip(rep.leaves[:-1], rep.leaves[1:], rep.ordering_margin,
                                  rep.containment_margin)]
    w.add("foliation.csv", _csv_text(rows, ["r_inner", "r_outer", "ordering_margin",
                                            "containment_margin"]))
    summary = {"is_foliation": rep.is_foliation, "leaves": len(rep.leaves)}
    if not rep.is_foliation:
        raise NotAFoliation("leaf ordering check failed; see foliation.csv")
    return summary


def _run_energy(cfg, w):
    model = cfg.model_obj
    rep = _foliation(cfg, raise_on_failure=False)
    leaves = rep.leaves
    E_adm = _pmap(lambda r: adm_energy(model, r, cfg.L_max, tuple(cfg.grid)), cfg.radii)
    E_gauss = _pmap(lambda r: adm_energy_gauss(model, r, cfg.L_max, tuple(cfg.grid)), cfg.radii)
    rows = []
    for lf, ea, eg in zip(leaves, E_adm, E_gauss):
        rows.append({"r": lf.r, "hawking_energy": lf.hawking_energy,
                     "energy_error": abs(lf.hawking_energy - model.m), "adm_integral": ea,
                     "adm_integral_gauss": eg, "adm_error": abs(ea - model.m)})
    cols = ["r", "hawking_energy", "energy_error", "adm_integral", "adm_integral_gauss",
            "adm_error"]
    w.add("energy.csv", _csv_text(rows, cols))
    _emit_leaves(w, cfg, leaves)
    rep_d = {c: [row[c] for row in rows] for c in cols}
    for name, text in emit_plot_data("energy-report", rep_d).items():
        w.add(name, text)
    return {"leaves": len(leaves)}


def _run_center(cfg, w):
    model = cfg.model_obj
    rep = _foliation(cfg, raise_on_failure=False)
    crep = foliation_center_estimate(rep.leaves, model)
    w.add("centers.csv", _csv_text(crep.rows(), ["r", "estimator", "x", "y", "z"]))
    gap = np.linalg.norm(crep.r_xi - crep.C_f, axis=1)
    summary = {"radii": crep.radii,
               "limits": {k: [float(t) for t in np.atleast_1d(v)] for k, v in crep.limits.items()},
               "converged": {k: bool(v) for k, v in crep.converged.items()},
               "E_adm": [float(e) for e in crep.E_adm]}
    w.add("centers.json", _dump(summary))
    for name, text in emit_plot_data("center-report", {"r": crep.radii,
                                                       "center_gap": gap}).items():
        w.add(name, text)
    _emit_leaves(w, cfg, rep.leaves)
    return {"leaves": len(rep.leaves)}


def _run_monotonicity(cfg, w):
    rep = _foliation(cfg, raise_on_failure=False)
    rows = []
    for lf in rep.leaves:
        mp = monotonicity_pack(lf.solution.geometry, lam=lf.lam, beta=cfg.beta)
        rows.append({"r": lf.r, "lam": lf.lam, "hawking_energy": lf.hawking_energy,
                     "int_f": mp.int_f, "int_f_minus_lam": mp.int_f_minus_lam, "int_g": mp.int_g,
                     "int_f_tilde": mp.int_f_tilde, "int_f_beta": mp.int_f_beta,
                     "max_g": float(np.max(mp.g)), "balance_residual": mp.balance_residual,
                     "min_dec_margin": float(np.min(mp.mu - mp.J_norm))})
    cols = ["r", "lam", "hawking_energy", "int_f", "int_f_minus_lam", "int_g", "int_f_tilde",
            "int_f_beta", "max_g", "balance_residual", "min_dec_margin"]
    w.add("monotonicity.csv", _csv_text(rows, cols))
    _emit_leaves(w, cfg, rep.leaves)
    for name, text in emit_plot_data("monotonicity-report",
                                     {"r": [r["r"] for r in rows],
                                      "int_f": [r["int_f"] for r in rows]}).items():
        w.add(name, text)
    E = [r["hawking_energy"] for r in rows]
    return {"int_f_negative": all(r["int_f"] < 0 for r in rows),
            "energy_nondecreasing": all(b >= a for a, b in zip(E[:-1], E[1:]))}


def validation_checks(model, r, L=12, grid=(32, 32), seed=0) -> list:
    """Invariant suite on the coordinate sphere of radius r: (name, value, tol) triples."""
    rng = np.random.default_rng(seed)
    B = get_basis(L, *grid)
    a = rng.normal(size=B.n)
    f = B.synth(a)
    out = [("sh_round_trip", float(np.max(np.abs(B.analyze(f) - a))), 1e-12),
           ("sh_parseval", abs(float(a @ a) - B.grid.integrate(f * f)) / float(a @ a), 1e-10)]
    geom = build_surface_geometry(model, GraphSurface.sphere(r, L=L, grid=grid), intrinsic=True)
    nn = np.einsum("nij,ni,nj->n", geom.g, geom.nu, geom.nu)
    nt = np.einsum("nij,ni,naj->na", geom.g, geom.nu, geom.T)
    Bo = geom.B - 0.5 * geom.H[:, None, None] * geom.gam
    out += [("normal_unit", float(np.max(np.abs(nn - 1))), 1e-10),
            ("normal_tangent", float(np.max(np.abs(nt)) / r), 1e-10),
            ("traceless_Bo", float(np.max(np.abs(np.einsum("nab,nab->n", geom.gam_inv, Bo)))) * r,
             1e-10)]
    gauss = 2 * geom.Ric_nn - (geom.Sc - geom.ScS + geom.H ** 2 - geom.B2)
    out.append(("gauss_equation", float(np.max(np.abs(gauss))), 1e-6))
    out.append(("gauss_bonnet", abs(0.5 * float(geom.dmu @ geom.ScS) - 4 * np.pi), 1e-8))
    lap = float(geom.dmu @ laplace_beltrami(geom, geom.H))
    out.append(("divergence_theorem", abs(lap) / max(np.sqrt(geom.dmu @ geom.H ** 2), 1e-300),
                1e-9))
    if model.has_k:
        d = np.max(np.abs(W2_field(geom, form="combined") - W2_field(geom, form="expanded")))
        out.append(("W2_leibniz", float(d) * r ** 4, 1e-8))
    if np.all(geom.H > 0):
        mp = monotonicity_pack(geom)
        out.append(("g_nonpositive", max(float(np.max(mp.g)), 0.0), 1e-14))
        out.append(("balance_identity", abs(mp.balance_residual), 1e-6 * 4 * np.pi))
        out.append(("hawking_energy_finite", 0.0 if np.isfinite(hawking_energy(geom)) else 1.0,
                    0.5))
    return out


def _run_validate(cfg, w):
    model = cfg.model_obj
    res = _pmap(lambda r: validation_checks(model, r, cfg.L_max, tuple(cfg.grid), cfg.seed),
                cfg.radii)
    rows = []
    for r, checks in zip(cfg.radii, res):
        for name, val, tol in checks:
            rows.append({"r": r, "check": name, "value": val, "tolerance": tol,
                         "passed": bool(val <= tol)})
    w.add("validate.csv", _csv_text(rows, ["r", "check", "value", "tolerance", "passed"]))
    failed = [f"{row['check']}@r={row['r']:g}" for row in rows if not row["passed"]]
    if failed:
        raise _ValidationFailed("validation failed: " + ", ".join(failed))
    return {"checks": len(rows)}


class _ValidationFailed(HfkError):
    pass


_RUNNERS = {"solve-leaf": _run_solve_leaf, "foliate": _run_foliate,
            "energy-report": _run_energy, "center-report": _run_center,
            "monotonicity-report": _run_monotonicity, "validate": _run_validate}


def _versions():
    import scipy
    v = {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
         "backend": _kernels.backend()}
    try:
        from importlib.metadata import version
        v["artifact"] = version("artifact")
    except Exception:
        v["artifact"] = "unknown"
    if _kernels.HAVE_NUMBA:
        import numba
        v["numba"] = numba.__version__
    return v


def run(cfg: ExperimentConfig) -> int:
    """Run one experiment and write its files; returns the exit status."""
    out = Path(cfg.output_dir)
    w = _Writer(out)
    t0 = time.time()
    status, message, summary = EXIT_OK, "ok", {}
    try:
        summary = _RUNNERS[cfg.kind](cfg, w)
    except (HypothesisViolation, NotCentered) as exc:
        status, message = EXIT_HYPOTHESIS, f"{type(exc).__name__}: {exc}"
    except ConfigError as exc:
        status, message = EXIT_CONFIG, f"{type(exc).__name__}: {exc}"
    except HfkError as exc:
        status, message = EXIT_SOLVER, f"{type(exc).__name__}: {exc}"
    cfg_echo = {k: getattr(cfg, k) for k in _FIELDS}
    manifest = {"config": cfg_echo, "versions": _versions(), "status": status,
                "message": message, "summary": summary,
                "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(t0)),
                "wall_seconds": time.time() - t0, "threads": _workers(),
                "files": sorted(w.files)}
    w.add("manifest.json", json.dumps(manifest, indent=1, sort_keys=True, default=str) + "\n")
    w.flush()
    return status


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="hfk", description=__doc__.splitlines()[0])
    ap.add_argument("kind", choices=KINDS)
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", default=None)
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config, args.kind, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    status = run(cfg)
    if status != EXIT_OK:
        msg = json.loads((Path(cfg.output_dir) / "manifest.json").read_text())["message"]
        print(msg, file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
