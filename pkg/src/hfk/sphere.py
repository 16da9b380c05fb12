"""Real spherical harmonics on a Gauss-Legendre x uniform grid.

Convention: fully normalised real harmonics without the Condon-Shortley
phase,

    Y_l0 = Pbar_l0(cos t),  Y_lm = sqrt2 Pbar_lm(cos t) cos(m p),
    Y_l,-m = sqrt2 Pbar_lm(cos t) sin(m p),

with int Y^2 dOmega = 1.  Coefficients are stored in lexicographic (l, m)
order, index l^2 + l + m.  Nodes are ordered colatitude-major.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import BandLimitError

__all__ = ["QuadratureGrid", "SHBasis", "get_grid", "get_basis", "lm_index",
           "n_coeffs", "sh_transform", "legendre_normalized"]


def n_coeffs(L: int) -> int:
    return (L + 1) ** 2


def lm_index(l: int, m: int) -> int:
    return l * l + l + m


@dataclass(frozen=True)
class QuadratureGrid:
    n_theta: int
    n_phi: int
    theta: np.ndarray       # per node
    phi: np.ndarray         # per node
    weights: np.ndarray     # round unit-sphere area weights per node
    y: np.ndarray           # (N, 3) unit vectors
    yd: dict                # derivatives of y: keys 't', 'p', 'tt', 'tp', 'pp', 'ttt', ...

    @property
    def size(self) -> int:
        return self.n_theta * self.n_phi

    @property
    def capacity(self) -> int:
        """Largest band whose products are integrated exactly."""
        return min(self.n_theta - 1, self.n_phi // 2 - 1)

    def integrate(self, f) -> float:
        """Integral over the round unit sphere."""
        return float(np.dot(self.weights, f))


@lru_cache(maxsize=16)
def get_grid(n_theta: int = 32, n_phi: int = 32) -> QuadratureGrid:
    x, w = np.polynomial.legendre.leggauss(n_theta)
    order = np.argsort(-x)            # theta ascending
    x, w = x[order], w[order]
    t1 = np.arccos(x)
    p1 = 2.0 * np.pi * np.arange(n_phi) / n_phi
    T, P = np.meshgrid(t1, p1, indexing="ij")
    theta, phi = T.ravel(), P.ravel()
    weights = np.repeat(w, n_phi) * (2.0 * np.pi / n_phi)
    st, ct, sp, cp = np.sin(theta), np.cos(theta), np.sin(phi), np.cos(phi)
    z = np.zeros_like(theta)
    y = np.stack([st * cp, st * sp, ct], axis=1)
    yt = np.stack([ct * cp, ct * sp, -st], axis=1)
    yp = np.stack([-st * sp, st * cp, z], axis=1)
    ytp = np.stack([-ct * sp, ct * cp, z], axis=1)
    ypp = np.stack([-st * cp, -st * sp, z], axis=1)
    yd = {
        "t": yt, "p": yp, "tt": -y, "tp": ytp, "pp": ypp,
        "ttt": -yt, "ttp": -yp, "tpp": np.stack([-ct * cp, -ct * sp, z], axis=1), "ppp": -yp,
    }
    for a in (y, *yd.values()):
        a.setflags(write=False)
    return QuadratureGrid(n_theta, n_phi, theta, phi, weights, y, yd)


def legendre_normalized(L: int, x, s):
    """Pbar_lm(x) for 0 <= m <= l <= L with sin factor s (signed allowed).

    Normalised so that 2 pi int_0^pi Pbar_lm^2 sin t dt = 1.
    Returns array of shape (L+1, L+1, len(x)) indexed [l, m].
    """
    x = np.asarray(x, float)
    s = np.asarray(s, float)
    out = np.zeros((L + 1, L + 1) + x.shape)
    pmm = np.full(x.shape, 1.0 / np.sqrt(4.0 * np.pi))
    for m in range(L + 1):
        if m > 0:
            pmm = np.sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * pmm
        out[m, m] = pmm
        if m + 1 <= L:
            out[m + 1, m] = np.sqrt(2.0 * m + 3.0) * x * pmm
        for l in range(m + 2, L + 1):
            a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            out[l, m] = a * (x * out[l - 1, m] - b * out[l - 2, m])
    return out


def _theta_derivatives(L: int, theta, nder: int = 3):
    """Pbar_lm(cos t) and its first nder t-derivatives at the given t.

    Pbar_lm(cos t) is a trigonometric polynomial of degree l in t, so its
    Fourier series on a fine uniform circle is exact and can be differentiated
    term by term.
    """
    M = 2 * L + 4
    tc = 2.0 * np.pi * np.arange(M) / M
    P = legendre_normalized(L, np.cos(tc), np.sin(tc))          # (L+1, L+1, M)
    C = np.fft.fft(P, axis=-1) / M
    k = np.fft.fftfreq(M, 1.0 / M)
    E = np.exp(1j * np.outer(k, theta))                           # (M, n)
    res = []
    for d in range(nder + 1):
        vals = np.einsum("lmk,kn->lmn", C * (1j * k) ** d, E).real
        res.append(vals)
    return res


class SHBasis:
    """Synthesis/analysis matrices for band L on a grid."""

    def __init__(self, L: int, grid: QuadratureGrid):
        if L > grid.capacity:
            raise BandLimitError(f"band {L} exceeds grid capacity {grid.capacity}")
        self.L = L
        self.grid = grid
        self.n = n_coeffs(L)
        t1 = grid.theta.reshape(grid.n_theta, grid.n_phi)[:, 0]
        p1 = grid.phi[: grid.n_phi]
        Th = _theta_derivatives(L, t1, 3)
        ls, ms = [], []
        for l in range(L + 1):
            for m in range(-l, l + 1):
                ls.append(l)
                ms.append(m)
        self.l = np.array(ls)
        self.m = np.array(ms)
        nt, nph = grid.n_theta, grid.n_phi
        # phi factors and their derivatives, (n_coeffs, n_phi)
        F = np.empty((4, self.n, nph))
        for i, (l, m) in enumerate(zip(ls, ms)):
            am = abs(m)
            if m == 0:
                F[0, i], F[1, i], F[2, i], F[3, i] = 1.0, 0.0, 0.0, 0.0
            elif m > 0:
                c, s = np.cos(am * p1), np.sin(am * p1)
                F[:, i] = np.sqrt(2.0) * np.array([c, -am * s, -am ** 2 * c, am ** 3 * s])
            else:
                c, s = np.cos(am * p1), np.sin(am * p1)
                F[:, i] = np.sqrt(2.0) * np.array([s, am * c, -am ** 2 * s, -am ** 3 * c])
        T = np.empty((4, self.n, nt))
        for i, (l, m) in enumerate(zip(ls, ms)):
            for d in range(4):
                T[d, i] = Th[d][l, abs(m)]
        self._T, self._F = T, F
        self._cache = {}
        self.Y = self.matrix("")
        self.proj = (self.Y * grid.weights[:, None]).T      # analysis operator

    def matrix(self, spec: str) -> np.ndarray:
        """Nodes x coefficients matrix of d^a_t d^b_p Y, spec like 'tp' or 'ttp'."""
        if spec in self._cache:
            return self._cache[spec]
        a, b = spec.count("t"), spec.count("p")
        M = np.einsum("ct,cp->tpc", self._T[a], self._F[b]).reshape(-1, self.n)
        M.setflags(write=False)
        self._cache[spec] = M
        return M

    def synth(self, coeffs, spec: str = "") -> np.ndarray:
        return self.matrix(spec) @ coeffs

    def analyze(self, f, check: bool = False, tol: float = 1e-3) -> np.ndarray:
        a = self.proj @ f
        if check:
            top = self.l == self.L
            tot = np.sqrt(np.sum(a * a, axis=0))
            hi = np.sqrt(np.sum(a[top] * a[top], axis=0))
            if np.any(hi > tol * np.maximum(tot, 1e-300)):
                raise BandLimitError(
                    f"field carries relative energy {np.max(hi / np.maximum(tot, 1e-300)):.3g} "
                    f"in band {self.L}")
        return a

    def derivatives(self, f, specs=("t", "p", "tt", "tp", "pp"), check=False):
        """Analyse f at this band and return its spectral derivatives."""
        a = self.analyze(f, check=check)
        return a, {s: self.matrix(s) @ a for s in specs}


@lru_cache(maxsize=32)
def get_basis(L: int, n_theta: int = 32, n_phi: int = 32) -> SHBasis:
    return SHBasis(L, get_grid(n_theta, n_phi))


def sh_transform(data, direction: str = "analyze", L: int = 12, n_theta: int = 32,
                 n_phi: int = 32, derivatives: bool = False, check: bool = False):
    """Forward analysis (samples -> coefficients) or synthesis (coefficients -> samples).

    With ``derivatives=True`` synthesis also returns the t and p partials.
    """
    B = get_basis(L, n_theta, n_phi)
    if direction == "analyze":
        return B.analyze(np.asarray(data, float), check=check)
    if direction == "synthesize":
        c = np.asarray(data, float)
        if not derivatives:
            return B.synth(c)
        return B.synth(c), B.synth(c, "t"), B.synth(c, "p")
    raise ValueError(f"unknown direction {direction!r}")
