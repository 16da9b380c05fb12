"""Per-node tensor kernels with a numba path and a pure numpy path.

The numba versions are used unless the environment variable ``HFK_NO_NUMBA``
is set to a non-empty value other than ``0`` (or numba is not importable).
Both paths take arrays with a leading node axis and return the same results.
"""
import os

import numpy as np

from .errors import SingularMetric

_DET_FLOOR = 1e-300


def _want_numba():
    flag = os.environ.get("HFK_NO_NUMBA", "")
    return flag in ("", "0")


try:
    if not _want_numba():
        raise ImportError
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised with HFK_NO_NUMBA=1
    HAVE_NUMBA = False


# -- numpy reference ---------------------------------------------------------

def curvature_np(g, dg, ddg):
    """Inverse metric, Christoffels, Ricci and scalar curvature per node.

    Gam[n, i, j, k] = Gamma^i_jk.
    """
    det = np.linalg.det(g)
    if np.any(~(det > _DET_FLOOR)):
        raise SingularMetric("metric not invertible at some node")
    ginv = np.linalg.inv(g)
    # Gamma_ljk (first kind) then raise
    G1 = 0.5 * (np.einsum("njlk->nljk", dg) + np.einsum("nklj->nljk", dg) - dg)
    Gam = np.einsum("nil,nljk->nijk", ginv, G1)
    # d_c Gamma^a_jk
    dG1 = 0.5 * (np.einsum("ncjlk->ncljk", ddg) + np.einsum("ncklj->ncljk", ddg) - ddg)
    dGam = (-np.einsum("nap,ncpq,nqjk->ncajk", ginv, dg, Gam)
            + np.einsum("nal,ncljk->ncajk", ginv, dG1))
    # Ric_bd = d_a Gam^a_db - d_d Gam^a_ab + Gam^a_ae Gam^e_db - Gam^a_de Gam^e_ab
    Ric = (np.einsum("naadb->nbd", dGam) - np.einsum("ndaab->nbd", dGam)
           + np.einsum("naae,nedb->nbd", Gam, Gam) - np.einsum("nade,neab->nbd", Gam, Gam))
    Ric = 0.5 * (Ric + Ric.transpose(0, 2, 1))
    Sc = np.einsum("nab,nab->n", ginv, Ric)
    return ginv, Gam, Ric, Sc


def cov_k_np(Gam, k, dk):
    """nabla_a k_bc = d_a k_bc - Gamma^d_ab k_dc - Gamma^d_ac k_bd."""
    return dk - np.einsum("ndab,ndc->nabc", Gam, k) - np.einsum("ndac,nbd->nabc", Gam, k)


def surface_np(g, ginv, dg, Gam, Ric, k, nk, T, Xab):
    """Induced metric, normal, second fundamental form and normal traces per node.

    T[n, a, i] are the tangents, Xab[n, a, b, i] second partials of the embedding.
    Returns (gam, gam_inv, det, nu, nu_low, B, H, B2, trk, k_nn, Ric_nn,
    dtrk_nu, dknn_nu, dgam, Gam_s); gam_inv is nan where det <= 0.
    """
    gam = np.einsum("nij,nai,nbj->nab", g, T, T)
    det = gam[:, 0, 0] * gam[:, 1, 1] - gam[:, 0, 1] * gam[:, 1, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        sdet = np.where(det > 0, det, np.nan)
        gam_inv = np.empty_like(gam)
        gam_inv[:, 0, 0] = gam[:, 1, 1] / sdet
        gam_inv[:, 1, 1] = gam[:, 0, 0] / sdet
        gam_inv[:, 0, 1] = gam_inv[:, 1, 0] = -gam[:, 0, 1] / sdet
    ncov = np.cross(T[:, 0], T[:, 1])
    nup = np.einsum("nij,nj->ni", ginv, ncov)
    norm = np.sqrt(np.einsum("ni,ni->n", nup, ncov))
    nu = nup / norm[:, None]
    nu_low = ncov / norm[:, None]
    acc = Xab + np.einsum("nikl,nak,nbl->nabi", Gam, T, T)
    B = -np.einsum("ni,nabi->nab", nu_low, acc)
    H = np.einsum("nab,nab->n", gam_inv, B)
    Bup = np.einsum("nac,nbd,ncd->nab", gam_inv, gam_inv, B)
    B2 = np.einsum("nab,nab->n", Bup, B)
    trk = np.einsum("nab,nab->n", ginv, k)
    k_nn = np.einsum("nab,na,nb->n", k, nu, nu)
    Ric_nn = np.einsum("nab,na,nb->n", Ric, nu, nu)
    dtrk = np.einsum("na,nbc,nabc->n", nu, ginv, nk)
    dknn = np.einsum("na,nb,nc,nabc->n", nu, nu, nu, nk)
    # d_c gam_ab = d_k g_ij T_c^k T_a^i T_b^j + g_ij (X_ac^i T_b^j + T_a^i X_bc^j)
    tmp = np.einsum("nij,ncai,nbj->ncab", g, Xab, T)
    dgam = np.einsum("nkij,nck,nai,nbj->ncab", dg, T, T, T) + tmp + tmp.transpose(0, 1, 3, 2)
    # Gamma^c_ab = 1/2 gam^cd (d_a gam_db + d_b gam_da - d_d gam_ab)
    first = 0.5 * (np.einsum("nadb->ndab", dgam) + np.einsum("nbda->ndab", dgam) - dgam)
    Gam_s = np.einsum("ncd,ndab->ncab", gam_inv, first)
    return gam, gam_inv, det, nu, nu_low, B, H, B2, trk, k_nn, Ric_nn, dtrk, dknn, dgam, Gam_s


# -- numba -------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _inv3_nb(a, out):
        det = (a[0, 0] * (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
               - a[0, 1] * (a[1, 0] * a[2, 2] - a[1, 2] * a[2, 0])
               + a[0, 2] * (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0]))
        if not det > _DET_FLOOR:
            return det
        inv = 1.0 / det
        out[0, 0] = (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1]) * inv
        out[0, 1] = (a[0, 2] * a[2, 1] - a[0, 1] * a[2, 2]) * inv
        out[0, 2] = (a[0, 1] * a[1, 2] - a[0, 2] * a[1, 1]) * inv
        out[1, 0] = (a[1, 2] * a[2, 0] - a[1, 0] * a[2, 2]) * inv
        out[1, 1] = (a[0, 0] * a[2, 2] - a[0, 2] * a[2, 0]) * inv
        out[1, 2] = (a[0, 2] * a[1, 0] - a[0, 0] * a[1, 2]) * inv
        out[2, 0] = (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0]) * inv
        out[2, 1] = (a[0, 1] * a[2, 0] - a[0, 0] * a[2, 1]) * inv
        out[2, 2] = (a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]) * inv
        return det

    @njit(cache=True)
    def _curvature_nb(g, dg, ddg, ginv, Gam, Ric, Sc):
        N = g.shape[0]
        G1 = np.empty((3, 3, 3))
        dG1 = np.empty((3, 3, 3, 3))
        dGam = np.empty((3, 3, 3, 3))
        for n in range(N):
            det = _inv3_nb(g[n], ginv[n])
            if not det > _DET_FLOOR:
                return n
            for l in range(3):
                for j in range(3):
                    for k in range(3):
                        G1[l, j, k] = 0.5 * (dg[n, j, l, k] + dg[n, k, l, j] - dg[n, l, j, k])
                        for c in range(3):
                            dG1[c, l, j, k] = 0.5 * (ddg[n, c, j, l, k] + ddg[n, c, k, l, j]
                                                     - ddg[n, c, l, j, k])
            for i in range(3):
                for j in range(3):
                    for k in range(3):
                        s = 0.0
                        for l in range(3):
                            s += ginv[n, i, l] * G1[l, j, k]
                        Gam[n, i, j, k] = s
            for c in range(3):
                for a in range(3):
                    for j in range(3):
                        for k in range(3):
                            s = 0.0
                            for l in range(3):
                                s += ginv[n, a, l] * dG1[c, l, j, k]
                                t = 0.0
                                for q in range(3):
                                    t += dg[n, c, l, q] * Gam[n, q, j, k]
                                s -= ginv[n, a, l] * t
                            dGam[c, a, j, k] = s
            sc = 0.0
            for b in range(3):
                for d in range(b, 3):
                    s = 0.0
                    for a in range(3):
                        s += dGam[a, a, d, b] - dGam[d, a, a, b]
                        for e in range(3):
                            s += Gam[n, a, a, e] * Gam[n, e, d, b] - Gam[n, a, d, e] * Gam[n, e, a, b]
                    Ric[n, b, d] = s
                    Ric[n, d, b] = s
            for b in range(3):
                for d in range(3):
                    sc += ginv[n, b, d] * Ric[n, b, d]
            Sc[n] = sc
        return -1

    @njit(cache=True)
    def _cov_k_nb(Gam, k, dk, out):
        N = k.shape[0]
        for n in range(N):
            for a in range(3):
                for b in range(3):
                    for c in range(3):
                        s = dk[n, a, b, c]
                        for d in range(3):
                            s -= Gam[n, d, a, b] * k[n, d, c] + Gam[n, d, a, c] * k[n, b, d]
                        out[n, a, b, c] = s

    def curvature_nb(g, dg, ddg):
        g = np.ascontiguousarray(g, dtype=np.float64)
        dg = np.ascontiguousarray(dg, dtype=np.float64)
        ddg = np.ascontiguousarray(ddg, dtype=np.float64)
        N = g.shape[0]
        ginv = np.empty((N, 3, 3))
        Gam = np.empty((N, 3, 3, 3))
        Ric = np.empty((N, 3, 3))
        Sc = np.empty(N)
        bad = _curvature_nb(g, dg, ddg, ginv, Gam, Ric, Sc)
        if bad >= 0:
            raise SingularMetric(f"metric not invertible at node {bad}")
        return ginv, Gam, Ric, Sc

    def cov_k_nb(Gam, k, dk):
        out = np.empty(np.shape(dk))
        _cov_k_nb(np.ascontiguousarray(Gam), np.ascontiguousarray(k, dtype=np.float64),
                  np.ascontiguousarray(dk, dtype=np.float64), out)
        return out

    @njit(cache=True)
    def _surface_nb(g, ginv, dg, Gam, Ric, k, nk, T, Xab, gam, gam_inv, det, nu, nu_low,
                    B, H, B2, trk, k_nn, Ric_nn, dtrk, dknn, dgam, Gam_s):
        N = g.shape[0]
        nc = np.empty(3)
        nup = np.empty(3)
        first = np.empty((2, 2, 2))
        for n in range(N):
            for a in range(2):
                for b in range(2):
                    s = 0.0
                    for i in range(3):
                        for j in range(3):
                            s += g[n, i, j] * T[n, a, i] * T[n, b, j]
                    gam[n, a, b] = s
            d = gam[n, 0, 0] * gam[n, 1, 1] - gam[n, 0, 1] * gam[n, 1, 0]
            det[n] = d
            if d > 0:
                gam_inv[n, 0, 0] = gam[n, 1, 1] / d
                gam_inv[n, 1, 1] = gam[n, 0, 0] / d
                gam_inv[n, 0, 1] = -gam[n, 0, 1] / d
                gam_inv[n, 1, 0] = -gam[n, 0, 1] / d
            else:
                for a in range(2):
                    for b in range(2):
                        gam_inv[n, a, b] = np.nan
            nc[0] = T[n, 0, 1] * T[n, 1, 2] - T[n, 0, 2] * T[n, 1, 1]
            nc[1] = T[n, 0, 2] * T[n, 1, 0] - T[n, 0, 0] * T[n, 1, 2]
            nc[2] = T[n, 0, 0] * T[n, 1, 1] - T[n, 0, 1] * T[n, 1, 0]
            nn = 0.0
            for i in range(3):
                s = 0.0
                for j in range(3):
                    s += ginv[n, i, j] * nc[j]
                nup[i] = s
                nn += s * nc[i]
            nn = np.sqrt(nn)
            for i in range(3):
                nu[n, i] = nup[i] / nn
                nu_low[n, i] = nc[i] / nn
            for a in range(2):
                for b in range(a, 2):
                    s = 0.0
                    for i in range(3):
                        acc = Xab[n, a, b, i]
                        for kk in range(3):
                            for l in range(3):
                                acc += Gam[n, i, kk, l] * T[n, a, kk] * T[n, b, l]
                        s -= nu_low[n, i] * acc
                    B[n, a, b] = s
                    B[n, b, a] = s
            h = 0.0
            b2 = 0.0
            for a in range(2):
                for b in range(2):
                    h += gam_inv[n, a, b] * B[n, a, b]
                    for c in range(2):
                        for e in range(2):
                            b2 += gam_inv[n, a, c] * gam_inv[n, b, e] * B[n, c, e] * B[n, a, b]
            H[n] = h
            B2[n] = b2
            t = 0.0
            knn = 0.0
            rnn = 0.0
            for i in range(3):
                for j in range(3):
                    t += ginv[n, i, j] * k[n, i, j]
                    knn += k[n, i, j] * nu[n, i] * nu[n, j]
                    rnn += Ric[n, i, j] * nu[n, i] * nu[n, j]
            trk[n] = t
            k_nn[n] = knn
            Ric_nn[n] = rnn
            s1 = 0.0
            s2 = 0.0
            for a in range(3):
                for b in range(3):
                    for c in range(3):
                        s1 += nu[n, a] * ginv[n, b, c] * nk[n, a, b, c]
                        s2 += nu[n, a] * nu[n, b] * nu[n, c] * nk[n, a, b, c]
            dtrk[n] = s1
            dknn[n] = s2
            for c in range(2):
                for a in range(2):
                    for b in range(2):
                        s = 0.0
                        for i in range(3):
                            for j in range(3):
                                s += g[n, i, j] * (Xab[n, c, a, i] * T[n, b, j] + T[n, a, i] * Xab[n, c, b, j])
                                for kk in range(3):
                                    s += dg[n, kk, i, j] * T[n, c, kk] * T[n, a, i] * T[n, b, j]
                        dgam[n, c, a, b] = s
            for dd in range(2):
                for a in range(2):
                    for b in range(2):
                        first[dd, a, b] = 0.5 * (dgam[n, a, dd, b] + dgam[n, b, dd, a] - dgam[n, dd, a, b])
            for c in range(2):
                for a in range(2):
                    for b in range(2):
                        Gam_s[n, c, a, b] = gam_inv[n, c, 0] * first[0, a, b] + gam_inv[n, c, 1] * first[1, a, b]

    def surface_nb(g, ginv, dg, Gam, Ric, k, nk, T, Xab):
        c = np.ascontiguousarray
        N = g.shape[0]
        out = (np.empty((N, 2, 2)), np.empty((N, 2, 2)), np.empty(N), np.empty((N, 3)),
               np.empty((N, 3)), np.empty((N, 2, 2)), np.empty(N), np.empty(N), np.empty(N),
               np.empty(N), np.empty(N), np.empty(N), np.empty(N), np.empty((N, 2, 2, 2)),
               np.empty((N, 2, 2, 2)))
        _surface_nb(c(g), c(ginv), c(dg), c(Gam), c(Ric), c(k, dtype=np.float64),
                    c(nk, dtype=np.float64), c(T), c(Xab), *out)
        return out


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"


def curvature(g, dg, ddg):
    if HAVE_NUMBA:
        return curvature_nb(g, dg, ddg)
    return curvature_np(g, dg, ddg)


def cov_k(Gam, k, dk):
    if HAVE_NUMBA:
        return cov_k_nb(Gam, k, dk)
    return cov_k_np(Gam, k, dk)


def surface(g, ginv, dg, Gam, Ric, k, nk, T, Xab):
    if HAVE_NUMBA:
        return surface_nb(g, ginv, dg, Gam, Ric, k, nk, T, Xab)
    return surface_np(g, ginv, dg, Gam, Ric, k, nk, T, Xab)
