"""Hawking energy, the Euler-Lagrange operators and the monotonicity integrands.

Sign conventions (checked against finite differences in the tests):

    d/ds int H^2  = -2 int W1 alpha,     d/ds int P^2 = 2 int W2 alpha,
    d/ds |Sigma|  =    int H alpha,

for the normal flow with speed alpha, so area-constrained critical points of
1/4 int (H^2 - P^2) satisfy lam H + W1 + W2 = 0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveH, StepError, ZeroMeanCurvature, DegenerateSurface, DomainError
from .surface import (SurfaceGeometry, div_sigma, embedding_derivatives, geometry_from_embedding,
                      grad_sigma, laplace_beltrami)

__all__ = ["ELResidual", "MonotonicityPack", "hawking_energy", "hawking_functional",
           "W1_field", "W2_field", "el_residual", "first_variation_P2", "first_variation_fd",
           "second_variation_P2", "monotonicity_pack", "energy_variation", "normal_flow",
           "lagrange_multiplier", "BETA_DEFAULT"]

BETA_DEFAULT = 0.49
_FOUR_PI = 4.0 * np.pi


def hawking_functional(geom: SurfaceGeometry) -> float:
    return 0.25 * float(geom.dmu @ (geom.H ** 2 - geom.P ** 2))


def hawking_energy(geom: SurfaceGeometry) -> float:
    A = geom.area
    return float(np.sqrt(A / (16.0 * np.pi)) * (1.0 - hawking_functional(geom) / _FOUR_PI))


def W1_field(geom: SurfaceGeometry) -> np.ndarray:
    return laplace_beltrami(geom, geom.H) + geom.H * (geom.Bo2 + geom.Ric_nn)


def _k_nu(geom):
    """The covector k(., nu)."""
    return np.einsum("nij,nj->ni", geom.k, geom.nu)


def W2_field(geom: SurfaceGeometry, model=None, form: str = "combined") -> np.ndarray:
    """Momentum part of the Euler-Lagrange operator.

    ``form='combined'`` differentiates P k(., nu) as one field, ``'expanded'``
    uses -2 P div(k(., nu)) - 2 k(grad P, nu) instead.
    """
    if not geom.model.has_k:
        return np.zeros(geom.n)
    P = geom.P
    head = P * (geom.dtrk_nu - geom.dknn_nu) + 0.5 * geom.H * P * P
    kn = _k_nu(geom)
    if form == "combined":
        return head - 2.0 * div_sigma(geom, P[:, None] * kn)
    if form == "expanded":
        gp = grad_sigma(geom, P)
        return head - 2.0 * P * div_sigma(geom, kn) - 2.0 * np.einsum("ni,ni->n", gp, kn)
    raise ValueError(f"unknown form {form!r}")


def lagrange_multiplier(geom: SurfaceGeometry, W) -> float:
    h2 = float(geom.dmu @ geom.H ** 2)
    if not h2 > 1e-14 * max(geom.area, 1e-300) / max(geom.area, 1.0):
        raise ZeroMeanCurvature("int H^2 vanishes; the multiplier is undefined")
    return -float(geom.dmu @ (W * geom.H)) / h2


@dataclass
class ELResidual:
    W1: np.ndarray
    W2: np.ndarray
    H: np.ndarray
    lam: float
    residual: np.ndarray
    coeffs: np.ndarray        # residual coefficients on the parameter sphere
    l: np.ndarray             # band of each coefficient
    norm_L1: float            # Lambda_1 part
    norm_perp: float          # everything else

    @property
    def norm(self) -> float:
        return float(np.hypot(self.norm_L1, self.norm_perp))


def el_residual(geom: SurfaceGeometry, model=None, lam=None) -> ELResidual:
    """Residual lam H + W1 + W2 with lam from L2 projection unless given."""
    W1 = W1_field(geom)
    W2 = W2_field(geom)
    if lam is None:
        lam = lagrange_multiplier(geom, W1 + W2)
    R = lam * geom.H + W1 + W2
    B = geom.dbasis
    a = B.analyze(R)
    on = B.l == 1
    return ELResidual(W1, W2, geom.H, float(lam), R, a, B.l,
                      float(np.linalg.norm(a[on])), float(np.linalg.norm(a[~on])))


# -- flows -------------------------------------------------------------------

def normal_flow(geom: SurfaceGeometry, alpha, s: float, intrinsic: bool = False) -> SurfaceGeometry:
    """Geometry of the surface moved by s * alpha * nu (alpha sampled at nodes)."""
    V = np.asarray(alpha, float)[:, None] * geom.nu
    _, dV = embedding_derivatives(V, geom.grid, third=intrinsic)
    X = geom.X + s * V
    Xd = {key: geom.Xd[key] + s * dV[key] for key in dV}
    try:
        return geometry_from_embedding(geom.model, X, Xd, geom.grid, intrinsic=intrinsic,
                                       check_orientation=False)
    except (DegenerateSurface, DomainError) as exc:
        raise StepError(f"flow step {s:g} produced an invalid surface: {exc}") from exc


def first_variation_P2(geom: SurfaceGeometry, alpha) -> float:
    """d/ds int P^2 along the normal flow with speed alpha, i.e. 2 int W2 alpha."""
    return 2.0 * float(geom.dmu @ (W2_field(geom) * alpha))


def _p2(geom):
    return float(geom.dmu @ geom.P ** 2)


def first_variation_fd(geom: SurfaceGeometry, alpha, functional=_p2, h: float = None) -> float:
    """Central difference of a surface functional along the normal flow."""
    if h is None:
        h = 1e-4 * np.sqrt(geom.area / _FOUR_PI)
    return (functional(normal_flow(geom, alpha, h)) - functional(normal_flow(geom, alpha, -h))) / (2 * h)


def second_variation_P2(geom: SurfaceGeometry, alpha, alpha2, h: float = None) -> float:
    """Mixed second variation of int P^2.

    Central difference in t of the first variation along alpha on the surface
    moved by t * alpha2 * nu; alpha is held fixed on the parameter sphere.
    """
    if h is None:
        h = 1e-3 * np.sqrt(geom.area / _FOUR_PI)
    plus = first_variation_P2(normal_flow(geom, alpha2, h), alpha)
    minus = first_variation_P2(normal_flow(geom, alpha2, -h), alpha)
    return (plus - minus) / (2 * h)


def energy_variation(geom: SurfaceGeometry, lam: float, alpha) -> float:
    """dE/ds along the normal flow with speed alpha on a Hawking surface with multiplier lam."""
    A = geom.area
    hA = float(geom.dmu @ (geom.H * alpha))
    Q = float(geom.dmu @ (geom.H ** 2 - geom.P ** 2))
    return hA / (2.0 * np.sqrt(A)) * (16.0 * np.pi - 4.0 * lam * A - Q) / (16.0 * np.pi) ** 1.5


# -- monotonicity ------------------------------------------------------------

@dataclass
class MonotonicityPack:
    f: np.ndarray
    g: np.ndarray
    f_tilde: np.ndarray
    f_beta: np.ndarray
    beta: float
    lam: float
    mu: np.ndarray
    J_norm: np.ndarray
    int_f: float
    int_f_minus_lam: float
    int_g: float
    int_f_tilde: float
    int_f_beta: float
    balance_residual: float


def monotonicity_pack(geom: SurfaceGeometry, model=None, lam=None, beta: float = BETA_DEFAULT
                      ) -> MonotonicityPack:
    H = geom.H
    if np.any(~(H > 0)):
        raise NonPositiveH("mean curvature is not positive at every node")
    if not 0.0 <= beta < 0.5:
        raise ValueError("beta must lie in [0, 1/2)")
    if lam is None:
        lam = lagrange_multiplier(geom, W1_field(geom) + W2_field(geom))
    gi, k, nk = geom.ginv, geom.k, geom.nk
    k_up = np.einsum("nac,nbd,ncd->nab", gi, gi, k)
    k2 = np.einsum("nab,nab->n", k_up, k)
    trk, P = geom.trk, geom.P
    J = np.einsum("njl,nlij->ni", gi, nk) - np.einsum("nab,niab->ni", gi, nk)
    Jn = np.sqrt(np.maximum(np.einsum("nij,ni,nj->n", gi, J, J), 0.0))
    mu = 0.5 * (geom.Sc + trk ** 2 - k2)
    q = P / H
    dlogH = grad_sigma(geom, np.log(H))
    dlogH2 = np.einsum("nij,ni,nj->n", geom.g, dlogH, dlogH)
    k_grad = np.einsum("nij,ni,nj->n", k, dlogH, geom.nu)
    common = 0.5 * trk ** 2 - 0.75 * P ** 2 - q * (geom.dtrk_nu - geom.dknn_nu)
    tail = -0.5 * k2 - 0.5 * geom.Bo2 - Jn
    f = q * q * k2 + common + tail
    f_tilde = 2.0 * q * k_grad + common + tail
    f_beta = q * q * k2 + common - beta * (k2 + geom.Bo2 + 2.0 * Jn)
    g = -q * q * k2 - dlogH2 + 2.0 * q * k_grad
    w = geom.dmu
    int_f = float(w @ f)
    bal = (lam * geom.area + hawking_functional(geom) - _FOUR_PI
           - float(w @ (f + g - (mu - Jn))))
    return MonotonicityPack(f, g, f_tilde, f_beta, beta, float(lam), mu, Jn, int_f,
                            int_f - lam * geom.area, float(w @ g), float(w @ f_tilde),
                            float(w @ f_beta), float(bal))
