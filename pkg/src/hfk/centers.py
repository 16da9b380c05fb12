"""ADM energy, Hamiltonian and STCMC centers and the foliation-center estimate.

Flat-measure integrals over coordinate spheres S_r(a) reuse the quadrature
grid of the surfaces with the round weights scaled by r^2, so flat and curved
integrals are sampled at the same nodes.  Limits are never asserted: the
report functions return the r-sequence, a Richardson estimate and a
convergence flag.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotCentered, ZeroEnergy
from .functionals import W2_field
from .models import InitialDataModel, eval_metric_jet
from .sphere import get_grid
from .surface import DEFAULT_GRID, DEFAULT_L, GraphSurface, build_surface_geometry
from .tensor import ambient_pack

__all__ = ["CenterReport", "adm_energy", "adm_energy_gauss", "adm_sequence",
           "hamiltonian_center", "stcmc_correction", "center_Z", "foliation_center_term",
           "foliation_center_estimate", "richardson", "ZERO_ENERGY"]

ZERO_ENERGY = 1e-12


def _flat_sphere(r, a, grid):
    G = get_grid(*grid)
    a = np.zeros(3) if a is None else np.asarray(a, float)
    return a + r * G.y, G.y, r * r * G.weights


def adm_energy(model: InitialDataModel, r: float, L: int = DEFAULT_L, grid=DEFAULT_GRID) -> float:
    """r/8pi int (Sc/2 - Ric(nu, nu)) dmu over the centered coordinate sphere."""
    geom = build_surface_geometry(model, GraphSurface.sphere(r, L=L, grid=grid))
    return float(r / (8.0 * np.pi) * (geom.dmu @ (0.5 * geom.Sc - geom.Ric_nn)))


def adm_energy_gauss(model: InitialDataModel, r: float, L: int = DEFAULT_L, grid=DEFAULT_GRID
                     ) -> float:
    """Same integral rewritten with the Gauss equation, r/16pi int (Sc^S - H^2/2 + |Bo|^2)."""
    geom = build_surface_geometry(model, GraphSurface.sphere(r, L=L, grid=grid), intrinsic=True)
    return float(r / (16.0 * np.pi) * (geom.dmu @ (geom.ScS - 0.5 * geom.H ** 2 + geom.Bo2)))


def richardson(radii, values, order: float = 1.0):
    """Extrapolate v(r) = v_inf + c r^-order from the last two entries."""
    r = np.asarray(radii, float)
    v = np.asarray(values, float)
    if len(r) < 2:
        return v[-1]
    t = (r[-1] / r[-2]) ** order
    return (t * v[-1] - v[-2]) / (t - 1.0)


def _converging(radii, values, floor: float = 1e-10) -> bool:
    """Successive differences shrink at least like the expected O(1/r) rate."""
    v = np.asarray(values, float)
    if v.ndim == 1:
        v = v[:, None]
    d = np.linalg.norm(np.diff(v, axis=0), axis=1)
    if len(d) < 2:
        return bool(len(d) == 1 and d[0] <= floor)
    for a, b in zip(d[:-1], d[1:]):
        if b > floor and b > 0.8 * a:
            return False
    return True


def adm_sequence(model: InitialDataModel, radii, L: int = DEFAULT_L, grid=DEFAULT_GRID) -> dict:
    """ADM integrals over a radius schedule with step-doubling diagnostics."""
    radii = [float(r) for r in radii]
    E = np.array([adm_energy(model, r, L, grid) for r in radii])
    Eg = np.array([adm_energy_gauss(model, r, L, grid) for r in radii])
    err = np.abs(E - model.m)
    eps = None
    if len(radii) >= 2 and np.all(err > 0):
        eps = -np.diff(np.log(err)) / np.diff(np.log(radii))
    return {"radii": radii, "E": E, "E_gauss": Eg, "error": err, "rates": eps,
            "extrapolated": float(richardson(radii, E)), "converging": _converging(radii, E)}


def _energy(model, r, E):
    if E is None:
        E = adm_energy(model, r)
    if abs(E) < ZERO_ENERGY:
        raise ZeroEnergy(f"ADM energy estimate {E:.3g} is too small to normalise a center")
    return E


def hamiltonian_center(model: InitialDataModel, r: float, E: float = None, grid=DEFAULT_GRID
                       ) -> np.ndarray:
    """Flux integral of the Hamiltonian center over |x| = r divided by 16 pi E."""
    E = _energy(model, r, E)
    X, n, w = _flat_sphere(r, None, grid)
    mj = eval_metric_jet(model, X)
    g, dg = mj.g, mj.dg                      # dg[n, c, a, b] = d_c g_ab
    div = np.einsum("niij->nj", dg)          # sum_i d_i g_ij
    dtr = np.einsum("njii->nj", dg)          # d_j sum_i g_ii
    flux = np.einsum("nj,nj->n", div - dtr, n)
    trg = np.einsum("nii->n", g)
    term2 = np.einsum("nil,ni->nl", g, n) - trg[:, None] * n
    integrand = X * flux[:, None] - term2
    return (w @ integrand) / (16.0 * np.pi * E)


def _pi_nn(model, X, nu):
    mj, cp, k, nk = ambient_pack(model, X)
    trk = np.einsum("nab,nab->n", cp.ginv, k)
    gnn = np.einsum("nab,na,nb->n", mj.g, nu, nu)
    return np.einsum("nab,na,nb->n", k, nu, nu) - trk * gnn, (mj, cp, k, nk, trk)


def stcmc_correction(model: InitialDataModel, r: float, E: float = None, grid=DEFAULT_GRID
                     ) -> np.ndarray:
    """r^2/(32 pi E) int pi(nu, nu)^2 nu dmu_delta over the centered sphere."""
    E = _energy(model, r, E)
    if not model.has_k:
        return np.zeros(3)
    X, n, w = _flat_sphere(r, None, grid)
    pnn, _ = _pi_nn(model, X, n)
    return r * r * (w @ (pnn[:, None] ** 2 * n)) / (32.0 * np.pi * E)


def center_Z(model: InitialDataModel, r: float, q=(0.0, 0.0, 0.0), grid=DEFAULT_GRID
             ) -> np.ndarray:
    """Recentred correction Z(r) on S_r(q) for the alternative center C_H + Z.

    r^3/128pi int Sc nu + r pi(nu,nu) (nabla_nu pi)(nu,nu) nu + 2 pi(nu,nu) k(nu, .)
    + pi(nu,nu)^2 nu dmu_delta, with nu the flat normal of S_r(q).
    """
    X, n, w = _flat_sphere(r, q, grid)
    pnn, (mj, cp, k, nk, trk) = _pi_nn(model, X, n)
    integrand = cp.Sc[:, None] * n
    if model.has_k:
        # (nabla_nu pi)(nu, nu) = (nabla_nu k)(nu, nu) - (nabla_nu tr k) g(nu, nu)
        nk_nnn = np.einsum("ncab,nc,na,nb->n", nk, n, n, n)
        dtr_n = np.einsum("nab,ncab,nc->n", cp.ginv, nk, n)
        gnn = np.einsum("nab,na,nb->n", mj.g, n, n)
        dpi = nk_nnn - dtr_n * gnn
        k_n = np.einsum("nij,ni->nj", k, n)
        integrand = integrand + (r * pnn * dpi)[:, None] * n + 2.0 * pnn[:, None] * k_n \
            + (pnn ** 2)[:, None] * n
    return r ** 3 * (w @ integrand) / (128.0 * np.pi)


def foliation_center_term(model: InitialDataModel, r: float, xi, L: int = DEFAULT_L,
                          grid=DEFAULT_GRID) -> dict:
    """r^3/128pi int_{S_r(r xi)} (Sc + r W2) nu dmu_delta, split into its two parts."""
    xi = np.asarray(xi, float)
    geom = build_surface_geometry(model, GraphSurface.sphere(r, xi, L=L, grid=grid))
    G = get_grid(*grid)
    w = r * r * G.weights
    n = G.y
    sc = r ** 3 * (w @ (geom.Sc[:, None] * n)) / (128.0 * np.pi)
    if model.has_k:
        w2 = r ** 4 * (w @ (W2_field(geom)[:, None] * n)) / (128.0 * np.pi)
    else:
        w2 = np.zeros(3)
    return {"Sc": sc, "W2": w2, "total": sc + w2}


@dataclass
class CenterReport:
    radii: list
    euclidean_centers: np.ndarray      # c(Sigma_r) of the solved leaves
    r_xi: np.ndarray                   # r xi(r)
    C_H: np.ndarray                    # Hamiltonian integrand value at each r
    stcmc: np.ndarray                  # STCMC correction at each r
    C_f: np.ndarray                    # C_H + foliation term at each r
    W2_term: np.ndarray
    Sc_term: np.ndarray
    E_adm: np.ndarray
    limits: dict = field(default_factory=dict)
    converged: dict = field(default_factory=dict)

    def rows(self):
        """Flat rows, one per radius per estimator."""
        out = []
        names = [("euclidean_center", self.euclidean_centers), ("r_xi", self.r_xi),
                 ("C_H", self.C_H), ("stcmc_correction", self.stcmc), ("C_f", self.C_f),
                 ("W2_term", self.W2_term), ("Sc_term", self.Sc_term)]
        for i, r in enumerate(self.radii):
            for name, arr in names:
                v = arr[i]
                out.append({"r": r, "estimator": name, "x": float(v[0]), "y": float(v[1]),
                            "z": float(v[2])})
        return out


def foliation_center_estimate(leaves, model: InitialDataModel, growth_tol: float = 0.5,
                              floor: float = 1e-6) -> CenterReport:
    """Evaluate the center estimators on a list of solved leaves."""
    leaves = sorted(leaves, key=lambda lf: lf.r)
    radii = [float(lf.r) for lf in leaves]
    rxi = np.array([lf.r * np.asarray(lf.xi) for lf in leaves])
    norms = np.linalg.norm(rxi, axis=1)
    if len(radii) >= 2 and norms[-1] > floor and norms[0] > 0:
        slope = np.log(norms[-1] / norms[0]) / np.log(radii[-1] / radii[0])
        if slope > growth_tol and np.all(np.diff(norms) > 0):
            raise NotCentered(f"r |xi(r)| grows like r^{slope:.2f}")
    ec, CH, st, Cf, W2t, Sct, E = [], [], [], [], [], [], []
    for lf in leaves:
        r = lf.r
        e = adm_energy(model, r, lf.solution.L, lf.solution.grid)
        ch = hamiltonian_center(model, r, e, lf.solution.grid)
        term = foliation_center_term(model, r, lf.xi, lf.solution.L, lf.solution.grid)
        ec.append(np.asarray(lf.euclidean_center))
        CH.append(ch)
        st.append(stcmc_correction(model, r, e, lf.solution.grid))
        Cf.append(ch + term["total"])
        W2t.append(term["W2"])
        Sct.append(term["Sc"])
        E.append(e)
    rep = CenterReport(radii, np.array(ec), rxi, np.array(CH), np.array(st), np.array(Cf),
                       np.array(W2t), np.array(Sct), np.array(E))
    for name in ("euclidean_centers", "r_xi", "C_H", "stcmc", "C_f"):
        arr = getattr(rep, name)
        rep.limits[name] = richardson(radii, arr) if len(radii) >= 2 else arr[-1]
        rep.converged[name] = _converging(radii, arr)
    return rep
