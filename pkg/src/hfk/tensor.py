"""Ambient curvature, covariant derivatives of k and constraint densities."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .models import InitialDataModel, MetricJet, eval_k_jet, eval_metric_jet

__all__ = ["CurvaturePack", "ConstraintPack", "curvature", "cov_derivative_k",
           "constraint_quantities", "ambient_pack"]


@dataclass
class CurvaturePack:
    x: np.ndarray
    ginv: np.ndarray
    Gamma: np.ndarray      # Gamma[n, i, j, k] = Gamma^i_jk
    Ric: np.ndarray
    Sc: np.ndarray


@dataclass
class ConstraintPack:
    mu: np.ndarray
    J: np.ndarray          # covector components
    J_norm: np.ndarray     # |J|_g
    margin: np.ndarray     # mu - |J|_g
    trk: np.ndarray
    k_norm2: np.ndarray    # |k|_g^2
    Sc: np.ndarray


def curvature(jet: MetricJet) -> CurvaturePack:
    single = jet.g.ndim == 2
    g = np.atleast_3d(jet.g) if not single else jet.g[None]
    dg = jet.dg[None] if single else jet.dg
    ddg = jet.ddg[None] if single else jet.ddg
    ginv, Gam, Ric, Sc = _kernels.curvature(g, dg, ddg)
    if single:
        return CurvaturePack(jet.x, ginv[0], Gam[0], Ric[0], Sc[0])
    return CurvaturePack(jet.x, ginv, Gam, Ric, Sc)


def ambient_pack(model: InitialDataModel, x):
    """Metric jet, curvature, k and nabla k at an (N, 3) array of points."""
    x = np.atleast_2d(x)
    mj = eval_metric_jet(model, x)
    cp = curvature(mj)
    if model.has_k:
        kj = eval_k_jet(model, x)
        k = kj.k
        nk = _kernels.cov_k(cp.Gamma, kj.k, kj.dk)
    else:
        k = np.zeros((x.shape[0], 3, 3))
        nk = np.zeros((x.shape[0], 3, 3, 3))
    return mj, cp, k, nk


def cov_derivative_k(model: InitialDataModel, x) -> np.ndarray:
    """nabla_a k_bc at x, shape (..., 3, 3, 3)."""
    single = np.ndim(x) == 1
    _, _, _, nk = ambient_pack(model, x)
    return nk[0] if single else nk


def constraint_quantities(model: InitialDataModel, x) -> ConstraintPack:
    """Energy density, momentum density and the dominant-energy margin.

    2 mu = Sc + (tr k)^2 - |k|^2 and J = div(k - (tr k) g), all traces and
    norms with the curved metric.
    """
    single = np.ndim(x) == 1
    mj, cp, k, nk = ambient_pack(model, x)
    gi = cp.ginv
    trk = np.einsum("nab,nab->n", gi, k)
    k_up = np.einsum("nac,nbd,ncd->nab", gi, gi, k)
    k2 = np.einsum("nab,nab->n", k_up, k)
    mu = 0.5 * (cp.Sc + trk ** 2 - k2)
    # J_i = g^{jl} nabla_l k_ij - d_i tr k, and d_i tr k = g^{ab} nabla_i k_ab
    div_k = np.einsum("njl,nlij->ni", gi, nk)
    dtr = np.einsum("nab,niab->ni", gi, nk)
    J = div_k - dtr
    Jn = np.sqrt(np.maximum(np.einsum("nij,ni,nj->n", gi, J, J), 0.0))
    out = ConstraintPack(mu, J, Jn, mu - Jn, trk, k2, cp.Sc)
    if single:
        out = ConstraintPack(*[a[0] for a in vars(out).values()])
    return out
