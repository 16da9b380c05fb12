"""Lyapunov-Schmidt reduction for Hawking surfaces near large coordinate spheres.

For a center parameter xi and radius r the projected problem

    P_perp(lam H + W1 + W2) = 0,    |Sigma| = 4 pi r^2,

is solved for the graph function u (first band removed) and lam.  The
remaining three equations are the critical-point equations of the reduced
energy G_r(xi) = F_r(Sigma_{xi,r}), which is then minimised over xi.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import (BoundaryMinimum, DegenerateSurface, DomainError, NoConvergence,
                     NotAFoliation, TailError)
from .functionals import el_residual, hawking_energy, monotonicity_pack
from .models import InitialDataModel
from .sphere import get_basis, get_grid, n_coeffs
from .surface import (DEFAULT_GRID, DEFAULT_L, GraphSurface, SurfaceGeometry,
                      build_surface_geometry, euclidean_center)
from .tensor import ambient_pack

__all__ = ["LSSolution", "FoliationLeaf", "ReducedEnergyEval", "FoliationReport",
           "ls_solve", "F_r", "G_r_direct", "G1_closed_form", "G1_series", "G1_direct",
           "G_r_asymptotic", "G_r_terms", "reduced_energy_eval", "minimize_G",
           "build_foliation", "u_diagnostic_expansion", "legendre_values", "DELTA_TILDE"]

DELTA_TILDE = 0.25
TOL = 1e-9
MAX_ITER = 40


@dataclass
class LSSolution:
    xi: np.ndarray
    r: float
    u: np.ndarray
    lam: float
    residual_perp: float      # rescaled Lambda_1-orthogonal residual (bands <= L)
    residual_L1: float        # rescaled Lambda_1 residual
    area_error: float         # |Sigma| / (4 pi r^2) - 1
    iterations: int
    L: int = DEFAULT_L
    grid: tuple = DEFAULT_GRID
    jacobians: int = 0
    geometry: Optional[SurfaceGeometry] = field(default=None, repr=False)
    jacobian: Optional[tuple] = field(default=None, repr=False)

    @property
    def surface(self) -> GraphSurface:
        return GraphSurface(self.xi, self.r, self.u, self.L, *self.grid)

    @property
    def u0(self) -> float:
        """Mean value of u, i.e. its band-0 part as a function."""
        return float(self.u[0] / np.sqrt(4.0 * np.pi))


class _Problem:
    """Equation map z = (u without band 1, lam) -> rescaled residuals."""

    def __init__(self, model, xi, r, L, grid):
        self.model, self.xi, self.r, self.L, self.grid = model, np.asarray(xi, float), float(r), L, grid
        B = get_basis(L, *grid)
        self.free = np.flatnonzero(B.l != 1)
        self.nc = n_coeffs(L)
        self.rows = self.free        # residual coefficients kept, same index set

    def surface(self, z) -> GraphSurface:
        u = np.zeros(self.nc)
        u[self.free] = z[:-1]
        return GraphSurface(self.xi, self.r, u, self.L, *self.grid)

    def evaluate(self, z, full=False):
        geom = build_surface_geometry(self.model, self.surface(z))
        res = el_residual(geom, lam=z[-1])
        r = self.r
        F = np.empty(len(z))
        F[:-1] = r ** 3 * res.coeffs[self.rows]
        F[-1] = (geom.area - 4.0 * np.pi * r * r) / (r * r)
        if full:
            return F, geom, res
        return F

    def jacobian(self, z, F0):
        """Forward differences in the u coefficients; lam enters linearly."""
        n = len(z)
        J = np.empty((n, n))
        h = 1e-6 * self.r
        for j in range(n - 1):
            zp = z.copy()
            zp[j] += h
            J[:, j] = (self.evaluate(zp) - F0) / h
        geom = build_surface_geometry(self.model, self.surface(z))
        a = geom.dbasis.analyze(geom.H)
        J[:-1, -1] = self.r ** 3 * a[self.rows]
        J[-1, -1] = 0.0
        return J


def _initial_lambda(problem, z):
    geom = build_surface_geometry(problem.model, problem.surface(z))
    return el_residual(geom).lam


def ls_solve(model: InitialDataModel, xi, r: float, initial_u=None, *, L: int = DEFAULT_L,
             grid=DEFAULT_GRID, tol: float = TOL, max_iter: int = MAX_ITER,
             delta_tilde: float = DELTA_TILDE, jacobian=None, initial_lam=None) -> LSSolution:
    """Solve the projected Euler-Lagrange equation with the area constraint.

    Chord-Newton: a forward-difference Jacobian is built once (or reused via
    ``jacobian``) and rebuilt only when a step fails to reduce the residual
    well.  Steps are halved until the residual norm decreases.
    """
    xi = np.asarray(xi, float).reshape(3)
    if np.linalg.norm(xi) > 1.0 - delta_tilde + 1e-12:
        raise DomainError(f"|xi| = {np.linalg.norm(xi):.4g} exceeds 1 - delta_tilde")
    if r <= 0 or (model.m > 0 and r < 4.0 * model.m - 1e-12):
        raise DomainError("solver radius must be at least 4 m")
    grid = tuple(grid)
    prob = _Problem(model, xi, r, L, grid)
    z = np.zeros(len(prob.free) + 1)
    if initial_u is not None:
        u0 = np.asarray(initial_u, float)
        if u0.shape != (prob.nc,):
            raise ValueError("initial_u has the wrong number of coefficients")
        z[:-1] = u0[prob.free]
    z[-1] = _initial_lambda(prob, z) if initial_lam is None else initial_lam
    F = prob.evaluate(z)
    nF = np.linalg.norm(F)
    lu, fresh, n_jac, it = jacobian, False, 0, 0
    while nF > tol:
        if it >= max_iter:
            raise NoConvergence(f"no convergence after {max_iter} iterations (residual {nF:.3g})")
        it += 1
        if lu is None:
            lu = lu_factor(prob.jacobian(z, F))
            fresh, n_jac = True, n_jac + 1
        dz = -lu_solve(lu, F)
        t, accepted = 1.0, False
        for _ in range(12):
            try:
                F1 = prob.evaluate(z + t * dz)
            except (DegenerateSurface, DomainError):
                t *= 0.5
                continue
            n1 = np.linalg.norm(F1)
            if n1 < nF:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            if fresh:
                raise NoConvergence(f"line search failed at residual {nF:.3g}")
            lu = None
            continue
        slow = n1 > 0.25 * nF
        z, F, nF = z + t * dz, F1, n1
        if slow and not fresh:
            lu = None
        fresh = False if lu is not None and slow else fresh
        if lu is not None and not slow:
            fresh = False
    F, geom, res = prob.evaluate(z, full=True)
    surf = prob.surface(z)
    on = prob.rows
    B = get_basis(L, *grid)
    r3 = r ** 3
    l1 = res.coeffs[:prob.nc][B.l == 1]
    return LSSolution(xi, float(r), surf.u, float(z[-1]),
                      residual_perp=float(np.linalg.norm(F[:-1])),
                      residual_L1=float(r3 * np.linalg.norm(l1)),
                      area_error=float(geom.area / (4.0 * np.pi * r * r) - 1.0),
                      iterations=it, L=L, grid=grid, jacobians=n_jac, geometry=geom, jacobian=lu)


# -- reduced energy ----------------------------------------------------------

def F_r(geom: SurfaceGeometry, m: float = 2.0, r: float = None) -> float:
    """r^2 (int (H^2 - P^2) - 16 pi + 32 pi m / r); m = 2 gives the 64 pi / r form."""
    if r is None:
        r = geom.surface.r if geom.surface is not None else np.sqrt(geom.area / (4.0 * np.pi))
    Q = float(geom.dmu @ (geom.H ** 2 - geom.P ** 2))
    return r * r * (Q - 16.0 * np.pi + 32.0 * np.pi * m / r)


def G_r_direct(model, xi, r, initial_u=None, **kw) -> float:
    sol = ls_solve(model, xi, r, initial_u, **kw)
    return F_r(sol.geometry, model.m, r)


def G1_series(s: float) -> float:
    """Power series of G_1 in s^2: pi sum c_k s^(2k), c_k = 32 - 96/(2k+1) + 128/k."""
    s2, term, total, k = s * s, 1.0, 0.0, 1
    while True:
        term *= s2
        ck = 32.0 - 96.0 / (2 * k + 1) + 128.0 / k
        inc = ck * term
        total += inc
        if abs(inc) < 1e-18 * max(abs(total), 1e-300) or k > 4000:
            break
        k += 1
    return np.pi * total


def _G1_series_deriv(s: float) -> float:
    s2, total, k, pw = s * s, 0.0, 1, s
    while True:
        ck = 32.0 - 96.0 / (2 * k + 1) + 128.0 / k
        inc = 2 * k * ck * pw
        total += inc
        if abs(inc) < 1e-18 * max(abs(total), 1e-300) or k > 4000:
            break
        k += 1
        pw *= s2
    return np.pi * total


def G1_direct(s: float) -> float:
    """The four closed-form terms of G_1 summed as written."""
    return (64.0 * np.pi + 32.0 * np.pi / (1.0 - s * s)
            - 48.0 * np.pi / s * np.log((1.0 + s) / (1.0 - s))
            - 128.0 * np.pi * np.log(1.0 - s * s))


def _G1_direct_deriv(s: float) -> float:
    q = 1.0 - s * s
    Lg = np.log((1.0 + s) / (1.0 - s))
    return (64.0 * np.pi * s / q ** 2 + 48.0 * np.pi * Lg / s ** 2
            - 96.0 * np.pi / (s * q) + 256.0 * np.pi * s / q)


def G1_closed_form(xi, m: float = 2.0):
    """G_1 at xi and its radial derivative, scaled by (m/2)^2 (m = 2 is the plain form)."""
    s = float(np.linalg.norm(np.atleast_1d(np.asarray(xi, float))))
    if s >= 1.0:
        raise DomainError("G_1 is defined for |xi| < 1")
    if s < 0.1:
        val, der = G1_series(s), _G1_series_deriv(s)
    else:
        val, der = G1_direct(s), _G1_direct_deriv(s)
    sc = (m / 2.0) ** 2
    return sc * val, sc * der


def _flat_sphere(r, xi, grid):
    G = get_grid(*grid)
    return r * np.asarray(xi, float) + r * G.y, G.y, r * r * G.weights


def G_r_terms(model: InitialDataModel, xi, r: float, grid=DEFAULT_GRID, n_radial: int = 32,
              rmax_factor: float = 64.0, tail_tol: float = 0.01) -> dict:
    """The pieces of the large-r expansion of G_r at xi."""
    xi = np.asarray(xi, float)
    g1, _ = G1_closed_form(xi, model.m if model.m > 0 else 2.0)
    G = get_grid(*grid)
    a = r * xi
    # volume integral of Sc outside B_r(a): s = 1/t, dv = t^-4 dt dOmega
    vol, tail = 0.0, 0.0
    has_sc = model.variant == "PerturbedSchwarzschild"
    if has_sc:
        Rmax = rmax_factor * r
        tn, tw = np.polynomial.legendre.leggauss(n_radial)
        lo, hi = 1.0 / Rmax, 1.0 / r
        t = 0.5 * (hi - lo) * tn + 0.5 * (hi + lo)
        wt = 0.5 * (hi - lo) * tw
        s = 1.0 / t
        pts = (a[None, None, :] + s[:, None, None] * G.y[None, :, :]).reshape(-1, 3)
        _, cp, _, _ = ambient_pack(model, pts)
        Sc = cp.Sc.reshape(len(s), -1)
        shell = Sc @ G.weights                       # int Sc dOmega at radius s
        vol = float(np.sum(wt * shell * s ** 4))
        # tail beyond Rmax, assuming s^2 int Sc dOmega ~ s^-q
        pts = a + Rmax * G.y
        _, cp, _, _ = ambient_pack(model, pts)
        I_R = Rmax ** 2 * float(cp.Sc @ G.weights)
        q = max(model.decay, 1.0 + 1e-9)
        tail = I_R * Rmax / (q - 1.0)
        if abs(tail) > tail_tol * max(abs(vol), 1e-300) and abs(tail) > 1e-14:
            raise TailError(f"truncated tail {tail:.3g} exceeds {tail_tol:.0%} of {vol:.3g}")
        vol += tail
    X, nu, w = _flat_sphere(r, xi, grid)
    mom = 0.0
    if model.has_k:
        mj, cp, k, _ = ambient_pack(model, X)
        trk = np.einsum("nab,nab->n", cp.ginv, k)
        pi_nn = np.einsum("nab,na,nb->n", k, nu, nu) - trk * np.einsum("nab,na,nb->n", mj.g, nu, nu)
        mom = float(w @ pi_nn ** 2)
    return {"G1": g1, "G2": 2.0 * r * vol, "G3": -r * r * mom, "tail": 2.0 * r * tail}


def G_r_asymptotic(model: InitialDataModel, xi, r: float, **kw) -> float:
    t = G_r_terms(model, xi, r, **kw)
    return t["G1"] + t["G2"] + t["G3"]


@dataclass
class ReducedEnergyEval:
    xi: np.ndarray
    direct: float
    asymptotic: float
    gradient: np.ndarray
    hessian: np.ndarray


class _Evaluator:
    """Caches warm starts and the Jacobian while G_r is sampled at one radius."""

    def __init__(self, model, r, L, grid, tol, delta_tilde, u0=None):
        self.model, self.r, self.L, self.grid, self.tol, self.dt = model, r, L, grid, tol, delta_tilde
        self.u = u0
        self.lu = None
        self.cache = {}
        self.solves = 0

    def solve(self, xi):
        key = tuple(np.round(np.asarray(xi, float), 14))
        if key in self.cache:
            return self.cache[key]
        sol = ls_solve(self.model, xi, self.r, self.u, L=self.L, grid=self.grid, tol=self.tol,
                       delta_tilde=self.dt, jacobian=self.lu)
        self.lu = sol.jacobian
        self.u = sol.u
        self.solves += 1
        val = F_r(sol.geometry, self.model.m, self.r)
        self.cache[key] = (val, sol)
        return val, sol

    def __call__(self, xi):
        return self.solve(xi)[0]


def _fd_grad_hess(fun, x, h):
    n = len(x)
    f0 = fun(x)
    g = np.zeros(n)
    Hm = np.zeros((n, n))
    E = np.eye(n) * h
    fp = [fun(x + E[i]) for i in range(n)]
    fm = [fun(x - E[i]) for i in range(n)]
    for i in range(n):
        g[i] = (fp[i] - fm[i]) / (2 * h)
        Hm[i, i] = (fp[i] - 2 * f0 + fm[i]) / h ** 2
    for i in range(n):
        for j in range(i + 1, n):
            v = (fun(x + E[i] + E[j]) - fun(x + E[i] - E[j]) - fun(x - E[i] + E[j])
                 + fun(x - E[i] - E[j])) / (4 * h * h)
            Hm[i, j] = Hm[j, i] = v
    return f0, g, Hm


def reduced_energy_eval(model, xi, r, h: float = 1e-3, L=DEFAULT_L, grid=DEFAULT_GRID,
                        tol=TOL) -> ReducedEnergyEval:
    ev = _Evaluator(model, r, L, grid, tol, DELTA_TILDE)
    xi = np.asarray(xi, float)
    f0, g, Hm = _fd_grad_hess(ev, xi, h)
    return ReducedEnergyEval(xi, f0, G_r_asymptotic(model, xi, r, grid=grid), g, Hm)


@dataclass
class FoliationLeaf:
    solution: LSSolution
    G_value: float
    minimizer: bool
    gradient: np.ndarray
    hessian_eigs: np.ndarray
    hawking_energy: float
    int_f: float
    int_f_minus_lam: float
    euclidean_center: np.ndarray
    area: float
    solves: int = 0
    starts: list = field(default_factory=list)

    @property
    def r(self):
        return self.solution.r

    @property
    def xi(self):
        return self.solution.xi

    @property
    def lam(self):
        return self.solution.lam


def _leaf_from_solution(model, sol, val, grad, eigs, minimizer, solves=0):
    geom = sol.geometry
    try:
        mp = monotonicity_pack(geom, lam=sol.lam)
        int_f, int_fl = mp.int_f, mp.int_f_minus_lam
    except Exception:
        int_f = int_fl = float("nan")
    return FoliationLeaf(sol, float(val), bool(minimizer), np.asarray(grad), np.asarray(eigs),
                         hawking_energy(geom), int_f, int_fl, euclidean_center(geom), geom.area,
                         solves)


def minimize_G(model: InitialDataModel, r: float, xi0=None, u0=None, *, L=DEFAULT_L,
               grid=DEFAULT_GRID, tol=TOL, delta_tilde=DELTA_TILDE, step0: float = 0.05,
               xtol: float = 1e-7, grad_tol: float = 1e-4, n_starts: int = 1, seed: int = 0,
               check_convexity: bool = True) -> FoliationLeaf:
    """Minimise G_r over |xi| <= 1 - delta_tilde.

    Compass search with a shrinking stencil, then Newton polish with a
    finite-difference Hessian.  Extra starts (``n_starts`` > 1) are drawn from
    a seeded generator and only used as a uniqueness probe.
    """
    grid = tuple(grid)
    ev = _Evaluator(model, r, L, grid, tol, delta_tilde, u0)
    bound = 1.0 - delta_tilde
    xi_start = np.zeros(3) if xi0 is None else np.asarray(xi0, float)
    rng = np.random.default_rng(seed)
    starts = [xi_start] + [rng.uniform(-0.3, 0.3, 3) * bound for _ in range(n_starts - 1)]
    results = []
    for st in starts:
        results.append(_minimize_from(ev, st, bound, step0, xtol))
    best = min(results, key=lambda t: t[1])
    x, fx = best
    # Newton polish and derivative report
    h = max(1e-3 * step0, 1e-4)
    for _ in range(3):
        f0, g, Hm = _fd_grad_hess(ev, x, h)
        try:
            dx = -np.linalg.solve(Hm, g)
        except np.linalg.LinAlgError:
            break
        if np.linalg.norm(dx) > 4 * h or not np.all(np.isfinite(dx)):
            break
        xn = x + dx
        if np.linalg.norm(xn) > bound:
            break
        fn = ev(xn)
        if fn > f0:
            break
        x = xn
        if np.linalg.norm(dx) < xtol:
            break
    f0, g, Hm = _fd_grad_hess(ev, x, h)
    eigs = np.linalg.eigvalsh(Hm)
    val, sol = ev.solve(x)
    if np.linalg.norm(x) >= bound - 10 * xtol:
        raise BoundaryMinimum(f"minimiser at |xi| = {np.linalg.norm(x):.4g} reaches the domain boundary")
    ok = np.linalg.norm(g) <= grad_tol * max(1.0, abs(val))
    if check_convexity:
        ok = ok and eigs.min() >= -1e-6 * max(1.0, np.abs(eigs).max())
    leaf = _leaf_from_solution(model, sol, val, g, eigs, ok, ev.solves)
    leaf.starts = [(np.asarray(x_).tolist(), float(f_)) for x_, f_ in results]
    return leaf


def _minimize_from(ev, x, bound, step, xtol):
    x = np.asarray(x, float).copy()
    fx = ev(x)
    dirs = np.vstack([np.eye(3), -np.eye(3)])
    while step > max(xtol, 1e-4):
        improved = False
        for d in dirs:
            y = x + step * d
            if np.linalg.norm(y) > bound:
                continue
            fy = ev(y)
            if fy < fx:
                x, fx, improved = y, fy, True
                break
        if not improved:
            step *= 0.5
    return x, fx


# -- foliations --------------------------------------------------------------

@dataclass
class FoliationReport:
    leaves: list
    ordering_margin: np.ndarray      # per consecutive pair: min over nodes of d(dPhi/dr, y)
    containment_margin: np.ndarray   # per pair: min over directions of h_outer - h_inner
    is_foliation: bool


def _support(X, dirs):
    return np.max(dirs @ X.T, axis=1)


def foliation_check(leaves: Sequence) -> FoliationReport:
    order, contain = [], []
    for a, b in zip(leaves[:-1], leaves[1:]):
        sa, sb = a.solution.surface, b.solution.surface
        Xa, _ = sa.embedding()
        Xb, _ = sb.embedding()
        y = sa.grid.y
        dr = sb.r - sa.r
        dPhi = (Xb - Xa) / dr
        order.append(float(np.min(np.einsum("ni,ni->n", dPhi, y))))
        contain.append(float(np.min(_support(Xb, y) - _support(Xa, y))))
    order, contain = np.array(order), np.array(contain)
    ok = bool(np.all(order > 0) and np.all(contain > 0))
    return FoliationReport(list(leaves), order, contain, ok)


def build_foliation(model: InitialDataModel, radii, *, L=DEFAULT_L, grid=DEFAULT_GRID, tol=TOL,
                    delta_tilde=DELTA_TILDE, xi_drift=None, check_convexity=True,
                    raise_on_failure: bool = True):
    """Solve one leaf per radius (warm started) and check the ordering of the leaves.

    ``xi_drift`` (one 3-vector per radius) moves each leaf off its minimiser
    before the check; it exists to exercise the failure path.
    """
    radii = [float(r) for r in radii]
    if any(b <= a for a, b in zip(radii[:-1], radii[1:])):
        raise ValueError("radii must be strictly increasing")
    leaves = []
    xi_prev, r_prev, u_prev = None, None, None
    for i, r in enumerate(radii):
        xi0 = None if xi_prev is None else xi_prev * r_prev / r
        leaf = minimize_G(model, r, xi0, u_prev, L=L, grid=grid, tol=tol, delta_tilde=delta_tilde,
                          check_convexity=check_convexity)
        if xi_drift is not None:
            xd = leaf.xi + np.asarray(xi_drift[i], float)
            sol = ls_solve(model, xd, r, leaf.solution.u, L=L, grid=grid, tol=tol,
                           delta_tilde=delta_tilde)
            leaf = _leaf_from_solution(model, sol, F_r(sol.geometry, model.m, r), leaf.gradient,
                                       leaf.hessian_eigs, False)
        leaves.append(leaf)
        xi_prev, r_prev, u_prev = leaf.xi, r, leaf.solution.u
    rep = foliation_check(leaves)
    if raise_on_failure and not rep.is_foliation:
        raise NotAFoliation(f"leaves are not ordered: margins {rep.ordering_margin}, "
                            f"containment {rep.containment_margin}")
    return rep


# -- diagnostic expansion ----------------------------------------------------

def legendre_values(lmax: int, x) -> np.ndarray:
    """P_0..P_lmax at x by the three-term recurrence."""
    x = np.asarray(x, float)
    out = np.empty((lmax + 1,) + x.shape)
    out[0] = 1.0
    if lmax >= 1:
        out[1] = x
    for l in range(1, lmax):
        out[l + 1] = ((2 * l + 1) * x * out[l] - l * out[l - 1]) / (l + 1)
    return out


def u_diagnostic_expansion(sol: LSSolution, m: float, lmax: int = 200) -> dict:
    """Compare u with its leading-order Legendre series (scaled from m = 2 to m)."""
    xi = np.asarray(sol.xi, float)
    s = float(np.linalg.norm(xi))
    G = get_grid(*sol.grid)
    series = np.full(G.size, -2.0)
    n_terms = 0
    if s > 0:
        cosang = -(G.y @ (xi / s))
        P = legendre_values(lmax, cosang)
        for l in range(2, lmax + 1):
            coef = 4.0 * s ** l / l
            if coef < 1e-12:
                break
            series += coef * P[l]
            n_terms += 1
    series *= m / 2.0
    u = sol.surface.basis.synth(sol.u)
    dev = u - series
    return {"series": series, "u": u, "sup_deviation": float(np.max(np.abs(dev))),
            "mean_deviation": float(np.mean(dev)), "terms": n_terms}
