"""Graded Gauss-Legendre mesh on (0, 1].

Panels grow geometrically away from r_min until they reach the maximal width,
after which the interval up to 1 is covered by equal panels.  Each panel
carries p Gauss-Legendre nodes; differentiation and indefinite integration act
panel by panel through the Lagrange interpolant on those nodes.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as leg

from .errors import MeshTooCoarse


@lru_cache(maxsize=None)
def _reference(p):
    x, w = leg.leggauss(p)
    # barycentric weights for Lagrange differentiation
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    bw = 1.0 / np.prod(diff, axis=1)
    D = (bw[None, :] / bw[:, None]) / diff
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    V = leg.legvander(x, p - 1)
    Vint = np.empty((p, p))
    for j in range(p):
        c = np.zeros(p)
        c[j] = 1.0
        Vint[:, j] = leg.legval(x, leg.legint(c, lbnd=-1.0))
    S = Vint @ np.linalg.inv(V)
    return x, w, D, S


class GradedMesh:
    def __init__(self, r_min=1e-12, points_per_panel=16, panel_ratio=2.0, max_panel_width=1.0 / 32.0):
        if points_per_panel < 4:
            raise MeshTooCoarse("need at least 4 points per panel")
        self.r_min = float(r_min)
        self.p = int(points_per_panel)
        edges = [self.r_min]
        e = self.r_min
        while e * panel_ratio - e <= max_panel_width and e * panel_ratio < 1.0:
            e *= panel_ratio
            edges.append(e)
        n_uniform = int(np.ceil((1.0 - e) / max_panel_width - 1e-12))
        edges.extend(np.linspace(e, 1.0, n_uniform + 1)[1:])
        self.edges = np.array(edges)
        x, w, D, S = _reference(self.p)
        a, b = self.edges[:-1], self.edges[1:]
        half = 0.5 * (b - a)
        self.half = half
        self.nodes = (0.5 * (a + b))[:, None] + half[:, None] * x[None, :]
        self.r = self.nodes.ravel()
        self.w = (half[:, None] * w[None, :]).ravel()
        self._D = D
        self._S = S
        self.n_panels = len(a)

    @property
    def size(self):
        return self.r.size

    def _panels(self, values):
        v = np.asarray(values)
        return v.reshape((self.n_panels, self.p) + v.shape[1:])

    def integrate(self, values):
        """Quadrature of values over (r_min, 1] with respect to dr (axis 0)."""
        v = np.asarray(values)
        return np.tensordot(self.w, v, axes=(0, 0))

    def integrate_rdr(self, values):
        v = np.asarray(values)
        return np.tensordot(self.w * self.r, v, axes=(0, 0))

    def inner(self, f, g):
        """Sum over components of int conj(f) g r dr."""
        prod = np.conj(np.asarray(f)) * np.asarray(g)
        total = self.integrate_rdr(prod)
        return np.sum(total)

    def norm(self, f):
        return float(np.sqrt(abs(self.inner(f, f))))

    def diff(self, values):
        """Derivative in r of the per-panel interpolant (axis 0)."""
        v = self._panels(values)
        out = np.einsum("ij,pj...->pi...", self._D, v)
        scale = (1.0 / self.half).reshape((self.n_panels, 1) + (1,) * (v.ndim - 2))
        return (out * scale).reshape(np.shape(values))

    def cumulative(self, values):
        """int_{r_min}^{r} values dr at every node (axis 0)."""
        v = self._panels(values)
        local = np.einsum("ij,pj...->pi...", self._S, v)
        shape = (self.n_panels, 1) + (1,) * (v.ndim - 2)
        local = local * self.half.reshape(shape)
        _, w, _, _ = _reference(self.p)
        totals = np.einsum("j,pj...->p...", w, v) * self.half.reshape((self.n_panels,) + (1,) * (v.ndim - 2))
        offsets = np.concatenate([np.zeros((1,) + totals.shape[1:], dtype=totals.dtype), np.cumsum(totals, axis=0)[:-1]])
        return (local + offsets[:, None]).reshape(np.shape(values))

    def window(self, r_lo, r_hi):
        return (self.r >= r_lo) & (self.r <= r_hi)


@lru_cache(maxsize=16)
def _cached_mesh(r_min, p, ratio, hmax):
    return GradedMesh(r_min, p, ratio, hmax)


def mesh_from_config(cfg):
    q = cfg.quadrature
    return _cached_mesh(q.r_min, q.points_per_panel, q.panel_ratio, q.max_panel_width)
