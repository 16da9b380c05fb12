"""Graph surfaces over coordinate spheres and their geometry.

A surface is parametrised by y in S^2 (colatitude t, longitude p),

    Phi(y) = r xi + (r + u(y)) y,

which is the map x -> x + u(x)(x/r - xi) restricted to the sphere of radius r
about r xi.  All derivatives are spectral.  Fields that are not band-limited
(H, tangential vector fields) are differentiated after analysis at the
largest band the grid integrates exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import _kernels
from .errors import DegenerateSurface, DomainError
from .models import InitialDataModel
from .sphere import SHBasis, get_basis, get_grid, lm_index, n_coeffs
from .tensor import ambient_pack

__all__ = ["GraphSurface", "SurfaceGeometry", "build_surface_geometry", "geometry_from_embedding",
           "surface_integrate", "laplace_beltrami", "div_sigma", "grad_sigma",
           "euclidean_center", "flat_measure", "write_coefficients", "read_coefficients",
           "DEFAULT_L", "DEFAULT_GRID"]

DEFAULT_L = 12
DEFAULT_GRID = (32, 32)

_D1 = ("t", "p")
_D2 = ("tt", "tp", "pp")
_D3 = ("ttt", "ttp", "tpp", "ppp")


def _key(*idx):
    """Canonical derivative key: t's first, e.g. ('p', 't') -> 'tp'."""
    s = "".join(idx)
    return "t" * s.count("t") + "p" * s.count("p")


@dataclass(frozen=True)
class GraphSurface:
    xi: np.ndarray
    r: float
    u: np.ndarray
    L: int = DEFAULT_L
    n_theta: int = DEFAULT_GRID[0]
    n_phi: int = DEFAULT_GRID[1]

    def __post_init__(self):
        xi = np.asarray(self.xi, float).reshape(3)
        u = np.zeros(n_coeffs(self.L)) if self.u is None else np.asarray(self.u, float)
        if u.shape != (n_coeffs(self.L),):
            raise ValueError(f"u needs {n_coeffs(self.L)} coefficients, got {u.shape}")
        if self.r <= 0:
            raise ValueError("radius must be positive")
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "u", u)

    @classmethod
    def sphere(cls, r, xi=(0.0, 0.0, 0.0), L=DEFAULT_L, grid=DEFAULT_GRID):
        return cls(np.asarray(xi, float), float(r), np.zeros(n_coeffs(L)), L, *grid)

    @property
    def grid(self):
        return get_grid(self.n_theta, self.n_phi)

    @property
    def basis(self) -> SHBasis:
        return get_basis(self.L, self.n_theta, self.n_phi)

    @property
    def center(self) -> np.ndarray:
        return self.r * self.xi

    def with_u(self, u) -> "GraphSurface":
        return replace(self, u=np.asarray(u, float))

    def u_mean(self) -> float:
        """The l = 0 part of u as a value (not a coefficient)."""
        return float(self.u[0] / np.sqrt(4.0 * np.pi))

    def embedding(self, third: bool = False):
        """Nodes Phi(y) and the partial derivatives of Phi in (t, p)."""
        G, B = self.grid, self.basis
        keys = _D1 + _D2 + (_D3 if third else ())
        ud = {"": B.synth(self.u)}
        for k in keys:
            ud[k] = B.synth(self.u, k)
        yd = dict(G.yd)
        yd[""] = G.y
        R = self.r + ud[""]
        X = self.center + R[:, None] * G.y
        Xd = {}
        for k in keys:
            # Leibniz rule for (r + u) y over every split of the multi-index
            idx = list(k)
            n = len(idx)
            acc = np.zeros_like(G.y)
            for mask in range(1 << n):
                a = _key(*[idx[i] for i in range(n) if mask >> i & 1])
                b = _key(*[idx[i] for i in range(n) if not mask >> i & 1])
                fa = R if a == "" else ud[a]
                acc = acc + fa[:, None] * yd[b]
            Xd[k] = acc
        return X, Xd


@dataclass
class SurfaceGeometry:
    """Per-node geometry of a surface in an initial data set."""

    model: InitialDataModel
    grid: object
    dbasis: SHBasis
    X: np.ndarray
    Xd: dict
    g: np.ndarray
    ginv: np.ndarray
    dg: np.ndarray
    Gamma: np.ndarray
    Ric: np.ndarray
    Sc: np.ndarray
    k: np.ndarray
    nk: np.ndarray
    T: np.ndarray            # (N, 2, 3) tangents d_t Phi, d_p Phi
    gam: np.ndarray          # induced metric (N, 2, 2)
    gam_inv: np.ndarray
    sqrt_det: np.ndarray
    dmu: np.ndarray          # curved quadrature weights (area element included)
    nu: np.ndarray           # unit normal, vector components
    nu_low: np.ndarray       # unit normal, covector components
    B: np.ndarray
    H: np.ndarray
    B2: np.ndarray
    Bo2: np.ndarray
    trk: np.ndarray
    k_nn: np.ndarray
    P: np.ndarray
    Ric_nn: np.ndarray
    dtrk_nu: np.ndarray      # nabla_nu tr k
    dknn_nu: np.ndarray      # (nabla_nu k)(nu, nu)
    dgam: np.ndarray         # (N, 2, 2, 2) [c, a, b] = d_c gam_ab
    Gam_s: np.ndarray        # surface Christoffels [c, a, b] = Gamma^c_ab
    ScS: Optional[np.ndarray] = None
    surface: Optional[GraphSurface] = None

    @property
    def area(self) -> float:
        return float(np.sum(self.dmu))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def flat_dmu(self) -> np.ndarray:
        return flat_measure(self.grid, self.T)


def flat_measure(grid, T) -> np.ndarray:
    cr = np.cross(T[:, 0], T[:, 1])
    return grid.weights * np.linalg.norm(cr, axis=1) / np.sin(grid.theta)


def _derivative_band(grid) -> int:
    return grid.capacity


def geometry_from_embedding(model: InitialDataModel, X, Xd, grid, intrinsic: bool = False,
                            surface: Optional[GraphSurface] = None,
                            check_orientation: bool = True) -> SurfaceGeometry:
    """Assemble the geometry from nodes and spectral derivatives of the embedding."""
    N = X.shape[0]
    rho = np.linalg.norm(X - np.asarray(model.c), axis=1)
    if model.variant != "Euclidean" and np.any(rho <= model.inner_radius):
        raise DomainError("surface enters the excluded region around the model center")
    mj, cp, k, nk = ambient_pack(model, X)
    g, ginv, Gam = mj.g, cp.ginv, cp.Gamma
    T = np.stack([Xd["t"], Xd["p"]], axis=1)
    Xab = np.empty((N, 2, 2, 3))
    for key, (a, b) in {"tt": (0, 0), "tp": (0, 1), "pp": (1, 1)}.items():
        Xab[:, a, b] = Xd[key]
        Xab[:, b, a] = Xd[key]
    (gam, gam_inv, det, nu, nu_low, B, H, B2, trk, k_nn, Ric_nn, dtrk_nu, dknn_nu,
     dgam, Gam_s) = _kernels.surface(g, ginv, mj.dg, Gam, cp.Ric, k, nk, T, Xab)
    if np.any(~(det > 0)):
        raise DegenerateSurface("induced metric is degenerate at some node")
    sdet = np.sqrt(det)
    dmu = grid.weights * sdet / np.sin(grid.theta)
    if check_orientation:
        rad = X / np.maximum(np.linalg.norm(X, axis=1), 1e-300)[:, None]
        if np.any(np.einsum("ni,ni->n", nu, rad) <= 0):
            raise DegenerateSurface("normal is not outward pointing at every node")
    Bo2 = B2 - 0.5 * H * H
    P = trk - k_nn

    geom = SurfaceGeometry(
        model=model, grid=grid, dbasis=get_basis(_derivative_band(grid), grid.n_theta, grid.n_phi),
        X=X, Xd=Xd, g=g, ginv=ginv, dg=mj.dg, Gamma=Gam, Ric=cp.Ric, Sc=cp.Sc, k=k, nk=nk,
        T=T, gam=gam, gam_inv=gam_inv, sqrt_det=sdet, dmu=dmu, nu=nu, nu_low=nu_low,
        B=B, H=H, B2=B2, Bo2=Bo2, trk=trk, k_nn=k_nn, P=P, Ric_nn=Ric_nn,
        dtrk_nu=dtrk_nu, dknn_nu=dknn_nu, dgam=dgam, Gam_s=Gam_s, surface=surface)
    if intrinsic:
        geom.ScS = _intrinsic_scalar(geom, mj, Xab)
    return geom


def _intrinsic_scalar(geom: SurfaceGeometry, mj, Xab) -> np.ndarray:
    """Scalar curvature of the induced metric from its own derivatives."""
    Xd, T, g = geom.Xd, geom.T, geom.g
    N = geom.n
    Xabc = np.empty((N, 2, 2, 2, 3))
    for a in range(2):
        for b in range(2):
            for c in range(2):
                Xabc[:, a, b, c] = Xd[_key(*["tp"[a], "tp"[b], "tp"[c]])]
    dg, ddg = mj.dg, mj.ddg
    # second derivatives of gam_ab along the surface, index [c, d, a, b]
    t1 = np.einsum("nklij,ndl,nck,nai,nbj->ncdab", ddg, T, T, T, T)
    t2 = np.einsum("nkij,ncdk,nai,nbj->ncdab", dg, Xab, T, T)
    A = np.einsum("nkij,nck,nadi,nbj->ncdab", dg, T, Xab, T)
    t3 = A + A.transpose(0, 1, 2, 4, 3)
    Bm = np.einsum("nlij,ndl,naci,nbj->ncdab", dg, T, Xab, T)
    t4 = Bm + Bm.transpose(0, 1, 2, 4, 3)
    C = np.einsum("nij,nacdi,nbj->ncdab", g, Xabc, T)
    D = np.einsum("nij,naci,nbdj->ncdab", g, Xab, Xab)
    t5 = C + C.transpose(0, 1, 2, 4, 3) + D + D.transpose(0, 1, 2, 4, 3)
    ddgam = t1 + t2 + t3 + t4 + t5
    gam, Gs = geom.gam, geom.Gam_s
    R1212 = 0.5 * (ddgam[:, 1, 0, 0, 1] + ddgam[:, 0, 1, 1, 0]
                   - ddgam[:, 0, 0, 1, 1] - ddgam[:, 1, 1, 0, 0])
    R1212 = R1212 + (np.einsum("nef,ne,nf->n", gam, Gs[:, :, 1, 0], Gs[:, :, 0, 1])
                     - np.einsum("nef,ne,nf->n", gam, Gs[:, :, 1, 1], Gs[:, :, 0, 0]))
    det = geom.sqrt_det ** 2
    return 2.0 * R1212 / det


def build_surface_geometry(model: InitialDataModel, surf: GraphSurface,
                           intrinsic: bool = False) -> SurfaceGeometry:
    X, Xd = surf.embedding(third=intrinsic)
    return geometry_from_embedding(model, X, Xd, surf.grid, intrinsic=intrinsic, surface=surf)


def embedding_derivatives(X, grid, third: bool = False):
    """Spectral derivatives of arbitrary node positions (analysis at grid capacity)."""
    B = get_basis(grid.capacity, grid.n_theta, grid.n_phi)
    a = B.analyze(X)
    keys = _D1 + _D2 + (_D3 if third else ())
    return B.synth(a), {k: B.matrix(k) @ a for k in keys}


def surface_integrate(geom: SurfaceGeometry, field) -> float:
    return float(np.dot(geom.dmu, field))


def _field_derivs(geom, f, specs=("t", "p")):
    _, d = geom.dbasis.derivatives(f, specs)
    return d


def grad_sigma(geom: SurfaceGeometry, f) -> np.ndarray:
    """Surface gradient of a scalar as ambient vector components (N, 3)."""
    d = _field_derivs(geom, f)
    df = np.stack([d["t"], d["p"]], axis=1)
    up = np.einsum("nab,nb->na", geom.gam_inv, df)
    return np.einsum("na,nai->ni", up, geom.T)


def laplace_beltrami(geom: SurfaceGeometry, f) -> np.ndarray:
    d = _field_derivs(geom, f, ("t", "p", "tt", "tp", "pp"))
    df = np.stack([d["t"], d["p"]], axis=1)
    hess = np.empty((geom.n, 2, 2))
    hess[:, 0, 0], hess[:, 1, 1] = d["tt"], d["pp"]
    hess[:, 0, 1] = hess[:, 1, 0] = d["tp"]
    hess = hess - np.einsum("ncab,nc->nab", geom.Gam_s, df)
    return np.einsum("nab,nab->n", geom.gam_inv, hess)


def div_sigma(geom: SurfaceGeometry, omega) -> np.ndarray:
    """Surface divergence of the tangential part of an ambient covector field.

    omega has shape (N, 3) (covector components).  The tangential vector
    field V = gam^ab omega(T_b) T_a has smooth Cartesian components, which
    are differentiated spectrally.
    """
    om_a = np.einsum("ni,nai->na", omega, geom.T)
    V = np.einsum("nab,nb,nai->ni", geom.gam_inv, om_a, geom.T)
    B = geom.dbasis
    a = B.analyze(V)
    dV = np.stack([B.matrix("t") @ a, B.matrix("p") @ a], axis=1)        # (N, 2, 3)
    cov = dV + np.einsum("nikl,nak,nl->nai", geom.Gamma, geom.T, V)
    return np.einsum("nab,nij,nai,nbj->n", geom.gam_inv, geom.g, cov, geom.T)


def euclidean_center(surf) -> np.ndarray:
    """Flat-measure barycenter of the surface nodes."""
    if isinstance(surf, SurfaceGeometry):
        X, T, grid = surf.X, surf.T, surf.grid
    else:
        X, Xd = surf.embedding()
        T = np.stack([Xd["t"], Xd["p"]], axis=1)
        grid = surf.grid
    w = flat_measure(grid, T)
    return (w @ X) / w.sum()


# -- coefficient files -------------------------------------------------------

def write_coefficients(path, surf: GraphSurface) -> None:
    lines = ["# hfk graph-surface coefficients v1",
             f"L_max {surf.L}", f"n_theta {surf.n_theta}", f"n_phi {surf.n_phi}",
             f"r {surf.r!r}", "xi " + " ".join(repr(float(v)) for v in surf.xi)]
    B = surf.basis
    for i in range(B.n):
        lines.append(f"{B.l[i]} {B.m[i]} {float(surf.u[i])!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_coefficients(path) -> GraphSurface:
    head = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if parts[0] in ("L_max", "n_theta", "n_phi", "r", "xi"):
                head[parts[0]] = parts[1:]
            else:
                rows.append((int(parts[0]), int(parts[1]), float(parts[2])))
    L = int(head["L_max"][0])
    u = np.zeros(n_coeffs(L))
    for l, m, v in rows:
        u[lm_index(l, m)] = v
    return GraphSurface(np.array([float(v) for v in head["xi"]]), float(head["r"][0]), u, L,
                        int(head["n_theta"][0]), int(head["n_phi"][0]))
