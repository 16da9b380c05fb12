"""Analytic initial data sets (g, k) on the asymptotic end of R^3.

Every variant evaluates on arrays of points of shape ``(N, 3)`` (a single
point of shape ``(3,)`` is accepted and the leading axis is dropped in the
result).  Index layout of the jets:

* ``g[n, a, b]``
* ``dg[n, c, a, b]``      = d_c g_ab
* ``ddg[n, c, d, a, b]``  = d_c d_d g_ab
* ``k[n, a, b]``, ``dk[n, c, a, b]`` = d_c k_ab

All variants have closed form jets.  A fourth-order finite-difference jet
(``fd_metric_jet`` / ``fd_k_jet``) is kept as an independent route and can be
selected per model with ``jet="fd"``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError

__all__ = [
    "InitialDataModel", "MetricJet", "KJet",
    "Euclidean", "SchwarzschildIsotropic", "PerturbedSchwarzschild",
    "HarmonicAsymptotics", "YorkModel",
    "eval_metric_jet", "eval_k_jet", "eval_metric", "eval_k",
    "pi_k_convert", "fd_metric_jet", "fd_k_jet", "model_from_dict",
    "model_to_dict", "VARIANTS",
]

VARIANTS = ("Euclidean", "SchwarzschildIsotropic", "PerturbedSchwarzschild",
            "HarmonicAsymptotics", "YorkModel")

FD_STEP = 1e-3


@dataclass(frozen=True)
class InitialDataModel:
    """Immutable description of one analytic initial data set.

    ``amplitude``/``decay``/``parity`` describe the metric perturbation
    sigma_ij = A s(x/|x|) |x|^-q delta_ij of the perturbed Schwarzschild
    variant, with s = x_3/|x| (odd) or (3 x_3^2/|x|^2 - 1)/2 (even).
    ``k_even_amplitude``/``k_even_decay`` add B |x|^-q' delta_ij to k, an
    even-parity term used to switch the parity hypothesis on and off.
    ``momentum_balance`` fixes the free subleading terms of the momentum
    models so that the momentum density J has no |x|^-4 part: the York k is
    scaled by phi^-2 (divergence free and trace free for g = phi^4 delta) and
    the harmonic vector field X = a(|x|) p + b(|x|) (p.rho) rho solves the
    radial momentum constraint, a = -2/|x| + 5m/(2|x|^2) + ..., b = -m/(2|x|^2) + ....
    With ``False`` both subleading terms are zero (X = -2p/|x|).
    ``dec_padding`` a adds -a/|x|^2 to the conformal factor of the momentum
    models, u = 1 + m/(2|x|) - a/|x|^2, so that Sc = 16 a u^-5 |x|^-4 can pay
    for the negative (tr k)^2 - |k|^2 in the dominant energy condition.
    """

    variant: str
    m: float = 0.0
    c: tuple = (0.0, 0.0, 0.0)
    p: tuple = (0.0, 0.0, 0.0)
    amplitude: float = 0.0
    decay: float = 2.0
    parity: str = "odd"
    k_even_amplitude: float = 0.0
    k_even_decay: float = 3.0
    jet: str = "analytic"
    momentum_balance: bool = True
    dec_padding: float = 0.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.m < 0:
            raise ValueError("mass must be non-negative")
        if self.parity not in ("odd", "even"):
            raise ValueError("parity must be 'odd' or 'even'")
        if self.dec_padding != 0.0 and self.m <= 0.0:
            raise ValueError("dec_padding needs a positive mass")
        if self.jet not in ("analytic", "fd"):
            raise ValueError("jet must be 'analytic' or 'fd'")
        object.__setattr__(self, "c", tuple(float(v) for v in self.c))
        object.__setattr__(self, "p", tuple(float(v) for v in self.p))

    @property
    def has_k(self) -> bool:
        if self.k_even_amplitude != 0.0:
            return True
        return self.variant in ("HarmonicAsymptotics", "YorkModel") and any(self.p)

    @property
    def inner_radius(self) -> float:
        """Radius around c inside which evaluation is refused."""
        return 0.5 * self.m

    @property
    def exclusion_radius(self) -> float:
        """Radius around c that solved surfaces must stay outside of."""
        return max(self.m, 1.0)

    def translated(self, v) -> "InitialDataModel":
        return replace(self, c=tuple(np.asarray(self.c) + np.asarray(v, float)))

    def with_jet(self, jet: str) -> "InitialDataModel":
        return replace(self, jet=jet)


def Euclidean() -> InitialDataModel:
    return InitialDataModel("Euclidean")


def SchwarzschildIsotropic(m: float, c=(0.0, 0.0, 0.0)) -> InitialDataModel:
    return InitialDataModel("SchwarzschildIsotropic", m=m, c=c)


def PerturbedSchwarzschild(m, amplitude, decay=2.0, parity="odd", c=(0.0, 0.0, 0.0)):
    return InitialDataModel("PerturbedSchwarzschild", m=m, c=c, amplitude=amplitude,
                            decay=decay, parity=parity)


def HarmonicAsymptotics(m, p, c=(0.0, 0.0, 0.0), k_even_amplitude=0.0, k_even_decay=3.0,
                        momentum_balance=True, dec_padding=0.0):
    return InitialDataModel("HarmonicAsymptotics", m=m, c=c, p=tuple(p),
                            k_even_amplitude=k_even_amplitude, k_even_decay=k_even_decay,
                            momentum_balance=momentum_balance, dec_padding=dec_padding)


def YorkModel(m, p, c=(0.0, 0.0, 0.0), k_even_amplitude=0.0, k_even_decay=3.0,
              momentum_balance=True, dec_padding=0.0):
    return InitialDataModel("YorkModel", m=m, c=c, p=tuple(p),
                            k_even_amplitude=k_even_amplitude, k_even_decay=k_even_decay,
                            momentum_balance=momentum_balance, dec_padding=dec_padding)


def model_to_dict(model: InitialDataModel) -> dict:
    return {
        "variant": model.variant, "m": model.m, "c": list(model.c), "p": list(model.p),
        "amplitude": model.amplitude, "decay": model.decay, "parity": model.parity,
        "k_even_amplitude": model.k_even_amplitude, "k_even_decay": model.k_even_decay,
        "jet": model.jet, "momentum_balance": model.momentum_balance,
        "dec_padding": model.dec_padding,
    }


def model_from_dict(d: dict) -> InitialDataModel:
    allowed = set(model_to_dict(Euclidean()))
    unknown = set(d) - allowed
    if unknown:
        raise KeyError(f"unknown model keys: {sorted(unknown)}")
    if "variant" not in d:
        raise KeyError("model needs a 'variant'")
    kw = dict(d)
    for key in ("c", "p"):
        if key in kw:
            v = kw[key]
            if len(v) != 3:
                raise ValueError(f"model.{key} must have three components")
            kw[key] = tuple(float(t) for t in v)
    return InitialDataModel(**kw)


@dataclass
class MetricJet:
    x: np.ndarray
    g: np.ndarray
    dg: np.ndarray
    ddg: np.ndarray


@dataclass
class KJet:
    x: np.ndarray
    k: np.ndarray
    dk: np.ndarray


# -- helpers -----------------------------------------------------------------

def _prep(model, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    if x2.shape[-1] != 3:
        raise ValueError("points must have 3 components")
    xt = x2 - np.asarray(model.c)
    rho = np.sqrt(np.einsum("na,na->n", xt, xt))
    if model.variant == "Euclidean":
        bad = np.zeros(rho.shape, bool)
    else:
        bad = rho <= max(model.inner_radius, 0.0)
    if np.any(bad) or not np.all(np.isfinite(rho)):
        raise DomainError(
            f"point at distance {rho[bad].min() if np.any(bad) else np.nan:.6g} from the "
            f"model center is outside the domain (|x-c| > {model.inner_radius:g})")
    return x2, xt, rho, single


def _power_jet(P, dP, ddP, xt, rho, n):
    """Value, gradient and Hessian of P(x) |x|^-n for a polynomial P."""
    rn = rho ** (-n)
    rn2 = rho ** (-n - 2)
    rn4 = rho ** (-n - 4)
    f = P * rn
    df = dP * rn[:, None] - n * (P * rn2)[:, None] * xt
    sym = dP[:, :, None] * xt[:, None, :]
    ddf = (ddP * rn[:, None, None]
           - n * rn2[:, None, None] * (sym + sym.transpose(0, 2, 1))
           - n * (P * rn2)[:, None, None] * np.eye(3)
           + n * (n + 2) * (P * rn4)[:, None, None] * xt[:, :, None] * xt[:, None, :])
    return f, df, ddf


def _padding(model) -> float:
    return model.dec_padding if model.variant in ("HarmonicAsymptotics", "YorkModel") else 0.0


def _u_jet(model, xt, rho):
    """u = 1 + m/(2|x|) - a/|x|^2 with its gradient and Hessian."""
    m, a = model.m, _padding(model)
    I = np.eye(3)
    xx = xt[:, :, None] * xt[:, None, :]
    u = 1.0 + m / (2.0 * rho) - a / rho ** 2
    du = (-0.5 * m / rho ** 3 + 2.0 * a / rho ** 4)[:, None] * xt
    ddu = (-0.5 * m * (I / rho[:, None, None] ** 3 - 3.0 * xx / rho[:, None, None] ** 5)
           + 2.0 * a * (I / rho[:, None, None] ** 4 - 4.0 * xx / rho[:, None, None] ** 6))
    return u, du, ddu


def _conformal_factor_jet(model, xt, rho):
    """Omega, d Omega, dd Omega for g = Omega * delta."""
    N = xt.shape[0]
    if model.variant == "Euclidean" or (model.m == 0.0 and _padding(model) == 0.0):
        om = np.ones(N)
        dom = np.zeros((N, 3))
        ddom = np.zeros((N, 3, 3))
    else:
        phi, dphi, ddphi = _u_jet(model, xt, rho)
        om = phi ** 4
        dom = 4.0 * (phi ** 3)[:, None] * dphi
        ddom = (12.0 * (phi ** 2)[:, None, None] * dphi[:, :, None] * dphi[:, None, :]
                + 4.0 * (phi ** 3)[:, None, None] * ddphi)
    if model.variant == "PerturbedSchwarzschild" and model.amplitude != 0.0:
        A, q = model.amplitude, model.decay
        z = xt[:, 2]
        if model.parity == "odd":
            P = A * z
            dP = np.zeros((N, 3)); dP[:, 2] = A
            ddP = np.zeros((N, 3, 3))
            n = q + 1.0
        else:
            # A (3 z^2 - |x|^2) / 2
            P = 0.5 * A * (3.0 * z ** 2 - rho ** 2)
            dP = -A * xt.copy()
            dP[:, 2] = 2.0 * A * z
            ddP = np.broadcast_to(-A * np.eye(3), (N, 3, 3)).copy()
            ddP[:, 2, 2] = 2.0 * A
            n = q + 2.0
        f, df, ddf = _power_jet(P, dP, ddP, xt, rho, n)
        om = om + f
        dom = dom + df
        ddom = ddom + ddf
    return om, dom, ddom


def _analytic_metric_jet(model, x2, xt, rho):
    om, dom, ddom = _conformal_factor_jet(model, xt, rho)
    if np.any(om <= 0):
        raise DomainError("metric is not positive definite at some point")
    I = np.eye(3)
    g = om[:, None, None] * I
    dg = dom[:, :, None, None] * I
    ddg = ddom[:, :, :, None, None] * I
    return MetricJet(x2, g, dg, ddg)


def _radial_rhs(t, y, kappa=0.0):
    """a'', b'' of the radial momentum-constraint ODE at unit mass (R = t).

    The conformal factor is U = 1 + 1/(2t) - kappa/t^2 and w = U'/U.
    """
    a, da, b, db = y
    U = 1.0 + 0.5 / t - kappa / t ** 2
    w = (-0.5 / t ** 2 + 2.0 * kappa / t ** 3) / U
    dda = -4.0 * w * da - 2.0 * da / t - 4.0 * w * b / t - 2.0 * b / t ** 2
    dc = da + db
    ddc = -6.0 * w * dc - 2.0 * dc / t + 4.0 * w * b / t + 4.0 * b / t ** 2
    return dda, ddc - dda


_T_FAR = 1e6


@lru_cache(maxsize=8)
def _radial_solution(kappa=0.0):
    """Dense solution of the unit-mass profile ODE in log t, started from the far-field series."""
    t0 = _T_FAR
    y0 = [-2.0 / t0 + 2.5 / t0 ** 2, 2.0 / t0 ** 2 - 5.0 / t0 ** 3,
          -0.5 / t0 ** 2, 1.0 / t0 ** 3]

    def rhs(tau, y):
        t = np.exp(tau)
        dda, ddb = _radial_rhs(t, y, kappa)
        return [t * y[1], t * dda, t * y[3], t * ddb]

    sol = solve_ivp(rhs, (np.log(t0), np.log(0.45)), y0, method="DOP853", dense_output=True,
                    rtol=1e-13, atol=1e-30)
    if not sol.success:
        raise RuntimeError(sol.message)
    return sol.sol


def harmonic_profiles(R, m, padding=0.0):
    """a, a', a'', b, b', b'' of X = a(R) p + b(R) (p.rho) rho.

    With m > 0 the profiles solve the momentum constraint of g = u^4 delta,
    pi = u^2 LX exactly (u = 1 + m/2R - padding/R^2) and a = -2/R + O(R^-2),
    b = O(R^-2).
    """
    R = np.asarray(R, float)
    if m == 0.0:
        z = np.zeros_like(R)
        return -2.0 / R, 2.0 / R ** 2, -4.0 / R ** 3, z, z, z
    t = R / m
    far = t >= _T_FAR
    tc = np.where(far, 1.0, t)
    kappa = padding / m ** 2
    a, da, b, db = _radial_solution(kappa)(np.log(tc))
    ts = np.where(far, t, 1.0)
    a = np.where(far, -2.0 / ts + 2.5 / ts ** 2, a)
    da = np.where(far, 2.0 / ts ** 2 - 5.0 / ts ** 3, da)
    b = np.where(far, -0.5 / ts ** 2, b)
    db = np.where(far, 1.0 / ts ** 3, db)
    dda, ddb = _radial_rhs(t, (a, da, b, db), kappa)
    return a / m, da / m ** 2, dda / m ** 3, b / m, db / m ** 2, ddb / m ** 3


def _harmonic_k(model, xt, rho, m):
    """k = u^2 (L_X delta - div X delta / 2) for X = a p + b (p.rho) rho."""
    p = np.asarray(model.p)
    I = np.eye(3)
    if model.momentum_balance:
        a, da, dda, b, db, ddb = harmonic_profiles(rho, m, _padding(model))
    else:
        a, da, dda, b, db, ddb = harmonic_profiles(rho, 0.0)
    R = rho
    px = xt @ p
    n = xt / R[:, None]
    # X_j = a p_j + c (p.x) x_j with c = b / R^2
    c = b / R ** 2
    dc = db / R ** 2 - 2.0 * b / R ** 3
    ddc = ddb / R ** 2 - 4.0 * db / R ** 3 + 6.0 * b / R ** 4
    P_ = (I[None] - n[:, :, None] * n[:, None, :]) / R[:, None, None]       # d_k rho_i
    nn = n[:, :, None] * n[:, None, :]
    # D[n, i, j] = d_i X_j
    D = (da[:, None, None] * n[:, :, None] * p[None, None, :]
         + (dc * px)[:, None, None] * n[:, :, None] * xt[:, None, :]
         + c[:, None, None] * p[None, :, None] * xt[:, None, :]
         + (c * px)[:, None, None] * I[None])
    # DD[n, k, i, j] = d_k d_i X_j
    pj = p[None, None, None, :]
    DD = ((dda[:, None, None] * nn + da[:, None, None] * P_)[:, :, :, None] * pj
          + ((ddc * px)[:, None, None] * nn + (dc * px)[:, None, None] * P_)[:, :, :, None]
          * xt[:, None, None, :]
          + dc[:, None, None, None] * n[:, None, :, None] * p[None, :, None, None] * xt[:, None, None, :]
          + (dc * px)[:, None, None, None] * n[:, None, :, None] * I[None, :, None, :]
          + dc[:, None, None, None] * n[:, :, None, None] * p[None, None, :, None] * xt[:, None, None, :]
          + c[:, None, None, None] * p[None, None, :, None] * I[None, :, None, :]
          + (dc * px)[:, None, None, None] * n[:, :, None, None] * I[None, None]
          + c[:, None, None, None] * p[None, :, None, None] * I[None, None])
    div = np.einsum("nii->n", D)
    ddiv = np.einsum("nkii->nk", DD)
    K0 = D + D.transpose(0, 2, 1) - 0.5 * div[:, None, None] * I
    dK0 = DD + DD.transpose(0, 1, 3, 2) - 0.5 * ddiv[:, :, None, None] * I
    if m == 0.0:
        return K0, dK0
    phi, dphi, _ = _u_jet(model, xt, R)
    k = (phi ** 2)[:, None, None] * K0
    dk = (2.0 * phi[:, None, None, None] * dphi[:, :, None, None] * K0[:, None]
          + (phi ** 2)[:, None, None, None] * dK0)
    return k, dk


def _york_k(model, xt, rho):
    p = np.asarray(model.p)
    N = xt.shape[0]
    I = np.eye(3)
    px = xt @ p
    r3, r5, r7 = rho ** -3, rho ** -5, rho ** -7
    xx = xt[:, :, None] * xt[:, None, :]
    S = p[None, :, None] * xt[:, None, :] + xt[:, :, None] * p[None, None, :]
    k = 1.5 * (S * r3[:, None, None] - (px * r3)[:, None, None] * I + (px * r5)[:, None, None] * xx)
    dS = (I[None, :, :, None] * p[None, None, None, :] + p[None, None, :, None] * I[None, :, None, :])
    dT1 = dS * r3[:, None, None, None] - 3.0 * S[:, None] * (xt * r5[:, None])[:, :, None, None]
    dT2 = (p[None, :, None, None] * I[None, None] * r3[:, None, None, None]
           - 3.0 * (px * r5)[:, None, None, None] * xt[:, :, None, None] * I[None, None])
    dxx = I[None, :, :, None] * xt[:, None, None, :] + xt[:, None, :, None] * I[None, :, None, :]
    dT3 = (p[None, :, None, None] * xx[:, None] * r5[:, None, None, None]
           + (px * r5)[:, None, None, None] * dxx
           - 5.0 * (px * r7)[:, None, None, None] * xt[:, :, None, None] * xx[:, None])
    dk = 1.5 * (dT1 - dT2 + dT3)
    m = model.m
    if model.momentum_balance and m > 0.0:
        # u^-2 keeps k trace free and divergence free for g = u^4 delta
        phi, dphi, _ = _u_jet(model, xt, rho)
        dk = (-2.0 * (phi ** -3)[:, None, None, None] * dphi[:, :, None, None] * k[:, None]
              + (phi ** -2)[:, None, None, None] * dk)
        k = (phi ** -2)[:, None, None] * k
    return k, np.broadcast_to(dk, (N, 3, 3, 3))


def _analytic_k_jet(model, x2, xt, rho):
    N = x2.shape[0]
    k = np.zeros((N, 3, 3))
    dk = np.zeros((N, 3, 3, 3))
    if model.variant == "HarmonicAsymptotics" and any(model.p):
        kk, dkk = _harmonic_k(model, xt, rho, model.m)
        k, dk = k + kk, dk + dkk
    elif model.variant == "YorkModel" and any(model.p):
        kk, dkk = _york_k(model, xt, rho)
        k, dk = k + kk, dk + dkk
    if model.k_even_amplitude != 0.0:
        B, q = model.k_even_amplitude, model.k_even_decay
        I = np.eye(3)
        k = k + (B * rho ** -q)[:, None, None] * I
        dk = dk + (-q * B * rho ** (-q - 2))[:, None, None, None] * xt[:, :, None, None] * I
    return KJet(x2, k, dk)


def eval_metric(model: InitialDataModel, x) -> np.ndarray:
    """Metric components only."""
    x2, xt, rho, single = _prep(model, x)
    om, _, _ = _conformal_factor_jet(model, xt, rho)
    g = om[:, None, None] * np.eye(3)
    return g[0] if single else g


def eval_k(model: InitialDataModel, x) -> np.ndarray:
    x2, xt, rho, single = _prep(model, x)
    k = _analytic_k_jet(model, x2, xt, rho).k
    return k[0] if single else k


def _squeeze(jet, single):
    if not single:
        return jet
    return type(jet)(*[a[0] for a in vars(jet).values()])


def eval_metric_jet(model: InitialDataModel, x) -> MetricJet:
    """g and its first two coordinate derivatives at x."""
    x2, xt, rho, single = _prep(model, x)
    if model.jet == "fd":
        jet = fd_metric_jet(lambda y: eval_metric(model, y), x2, h_rel=FD_STEP, center=model.c)
    else:
        jet = _analytic_metric_jet(model, x2, xt, rho)
    return _squeeze(jet, single)


def eval_k_jet(model: InitialDataModel, x) -> KJet:
    """k and its first coordinate derivatives at x."""
    x2, xt, rho, single = _prep(model, x)
    if model.jet == "fd":
        jet = fd_k_jet(lambda y: eval_k(model, y), x2, h_rel=FD_STEP, center=model.c)
    else:
        jet = _analytic_k_jet(model, x2, xt, rho)
    return _squeeze(jet, single)


def pi_k_convert(tensor, g, direction: str = "k->pi") -> np.ndarray:
    """Switch between k and pi = k - (tr_g k) g (three dimensions)."""
    t = np.asarray(tensor, float)
    g = np.asarray(g, float)
    ginv = np.linalg.inv(g)
    tr = np.einsum("...ab,...ab->...", ginv, t)
    if direction in ("k->pi", "k2pi"):
        return t - tr[..., None, None] * g
    if direction in ("pi->k", "pi2k"):
        return t - 0.5 * tr[..., None, None] * g
    raise ValueError(f"unknown direction {direction!r}")


# -- finite-difference route -------------------------------------------------

_C1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0          # first derivative
_C2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0      # second derivative
_OFF = np.array([-2, -1, 0, 1, 2])


def _fd_steps(x2, h_rel, center):
    rho = np.linalg.norm(x2 - np.asarray(center), axis=1)
    return h_rel * rho


def fd_metric_jet(gfun: Callable, x, h_rel: float = FD_STEP, center=(0.0, 0.0, 0.0)) -> MetricJet:
    """Fourth-order central differences of a metric function.

    The step is h = h_rel * |x - center| per point.
    """
    x2 = np.atleast_2d(np.asarray(x, float))
    h = _fd_steps(x2, h_rel, center)
    N = x2.shape[0]
    g0 = gfun(x2)
    dg = np.zeros((N, 3, 3, 3))
    ddg = np.zeros((N, 3, 3, 3, 3))
    I = np.eye(3)
    for a in range(3):
        vals = {o: (g0 if o == 0 else gfun(x2 + (o * h)[:, None] * I[a])) for o in _OFF}
        dg[:, a] = sum(_C1[i] * vals[o] for i, o in enumerate(_OFF)) / h[:, None, None]
        ddg[:, a, a] = sum(_C2[i] * vals[o] for i, o in enumerate(_OFF)) / (h ** 2)[:, None, None]
    for a in range(3):
        for b in range(a + 1, 3):
            acc = np.zeros((N, 3, 3))
            for i, oa in enumerate(_OFF):
                if _C1[i] == 0.0:
                    continue
                for j, ob in enumerate(_OFF):
                    if _C1[j] == 0.0:
                        continue
                    y = x2 + (oa * h)[:, None] * I[a] + (ob * h)[:, None] * I[b]
                    acc += _C1[i] * _C1[j] * gfun(y)
            acc /= (h ** 2)[:, None, None]
            ddg[:, a, b] = acc
            ddg[:, b, a] = acc
    return MetricJet(x2, g0, dg, ddg)


def fd_k_jet(kfun: Callable, x, h_rel: float = FD_STEP, center=(0.0, 0.0, 0.0)) -> KJet:
    x2 = np.atleast_2d(np.asarray(x, float))
    h = _fd_steps(x2, h_rel, center)
    k0 = kfun(x2)
    dk = np.zeros((x2.shape[0], 3, 3, 3))
    I = np.eye(3)
    for a in range(3):
        acc = 0.0
        for i, o in enumerate(_OFF):
            if _C1[i] != 0.0:
                acc = acc + _C1[i] * kfun(x2 + (o * h)[:, None] * I[a])
        dk[:, a] = acc / h[:, None, None]
    return KJet(x2, k0, dk)
