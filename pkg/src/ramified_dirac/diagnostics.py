"""Numerical checks of the analytic estimates on the model.

Hardy constant on twisted circles, adapted Sobolev norms with spectral weights,
elliptic-estimate ratios over batteries of sections, polynomial expansions after
removing the r^{-1/2} twist, Weyl counting bounds, and uniformity of the
residue/extension maps in mu.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from numpy.polynomial import chebyshev as cheb

from .conditions import ResidueCondition, orth
from .errors import FitFailed, NotInDomain
from .gelfand_robbin import BranchingOperator, check_norm, extend, residue
from .model_config import ModeIndex, ModelConfig, bracket, enumerate_modes
from .radial import (
    RadialSection,
    TruncatedProfile,
    _l2_converges,
    bump_profile,
    default_mesh,
    fundamental_system,
    random_polynomial_profile,
)
from .spectral import SpectrumResult, counting_function, eigenfunction, eigenvalues_in_window

MU_SWEEP = (0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0)


# ---------------------------------------------------------------- Hardy


def hardy_verify(M, periodic=False):
    """Minimise int |ds/dtheta|^2 / int |s|^2 over Fourier polynomials of degree <= M.

    Antiperiodic sections use frequencies m + 1/2; the periodic control uses
    integer frequencies and contains the constants, so its minimum is 0.
    """
    M = int(M)
    freqs = np.arange(-M - 1, M + 1) + (0.0 if periodic else 0.5)
    if periodic:
        freqs = np.arange(-M, M + 1).astype(float)
    n = 4 * freqs.size + 8
    theta = 2.0 * np.pi * np.arange(n) / n
    E = np.exp(1j * np.outer(theta, freqs))
    D = E * (1j * freqs)[None, :]
    w = 2.0 * np.pi / n
    A = w * (D.conj().T @ D)
    B = w * (E.conj().T @ E)
    vals = scipy.linalg.eigh(A, B, eigvals_only=True)
    ratio = float(max(vals[0], 0.0))
    bounded = ratio > 1e-12
    return {
        "ratio": ratio,
        "best_constant_estimate": 1.0 / ratio if bounded else np.inf,
        "bounded": bounded,
    }


# ---------------------------------------------------------------- adapted norms


def _weights(mode):
    wb = bracket(mode.mu)
    return bracket(mode.lam) + wb, bracket(mode.lam + 1.0) + wb


def _conormal(arr, mesh):
    return mesh.r[:, None] * mesh.diff(arr)


def adapted_norm(phi: RadialSection, k: int) -> float:
    """(sum_l sum_{m <= k-l} w^{2(k-l-m)} ||(r d/dr)^m M^l phi||^2)^{1/2}.

    The weight w is <lam> + <mu> on the f component and <lam+1> + <mu> on g.
    """
    mesh = phi.mesh
    wf, wg = _weights(phi.mode)
    total = 0.0
    cur = phi
    for ell in range(k + 1):
        f, g = cur.f, cur.g
        for arr in (f, g):
            if not _l2_converges(arr, mesh):
                raise NotInDomain(f"M^{ell} phi is not square integrable")
        for m in range(k - ell + 1):
            p = 2 * (k - ell - m)
            total += wf**p * mesh.norm(f) ** 2 + wg**p * mesh.norm(g) ** 2
            if m < k - ell:
                f, g = _conormal(f, mesh), _conormal(g, mesh)
        if ell < k:
            cur = cur.image()
    return float(np.sqrt(total))


def elliptic_ratio(phi: RadialSection, k: int) -> float:
    """||phi||_{k+1} / (||M phi||_k + ||phi||_0)."""
    return adapted_norm(phi, k + 1) / (adapted_norm(phi.image(), k) + phi.l2_norm())


# ---------------------------------------------------------------- batteries


@dataclass
class BatteryItem:
    mode: ModeIndex
    section: RadialSection
    source: str


@dataclass
class Battery:
    items: list = field(default_factory=list)

    def by_mu(self):
        out = {}
        for it in self.items:
            out.setdefault(abs(it.mode.mu), []).append(it)
        return out


def _lowest_eigenfunctions(mode, R_mode, outer, count):
    reach = abs(mode.mu) + 4.0 * (abs(mode.lam) + 1.0) + 12.0
    roots = eigenvalues_in_window(mode, R_mode, outer, (-reach, reach), step=0.01)
    roots = sorted(roots, key=lambda t: abs(t[0]))[:count]
    out = []
    for kappa, _ in roots:
        out.extend(eigenfunction(mode, R_mode, outer, kappa))
    return out


def build_battery(cfg: ModelConfig, R: ResidueCondition, n_eigen=5, n_random=5, seed=0, mus=None, modes=None):
    """Eigenfunctions and random smooth sections respecting R, per mode.

    With ``mus`` only the lam = -1/2 modes at those mu are used.
    """
    rng = np.random.default_rng(seed)
    mesh = default_mesh()
    d = cfg.fiber_dim
    outer = cfg.outer_bc
    if modes is None:
        modes = [ModeIndex(-0.5, float(mu), d) for mu in mus] if mus is not None else enumerate_modes(cfg)
    battery = Battery()
    for mode in modes:
        R_mode = R.subspace(mode.mu) if mode.lam == -0.5 else None
        if n_eigen and (R_mode is None or R_mode.shape[1] == d):
            for phi in _lowest_eigenfunctions(mode, R_mode, outer, n_eigen):
                battery.items.append(BatteryItem(mode, phi, "eigen"))
        for j in range(n_random):
            v = None
            if R_mode is not None and R_mode.shape[1]:
                v = R_mode @ (rng.normal(size=R_mode.shape[1]) + 1j * rng.normal(size=R_mode.shape[1]))
                if np.allclose(v.imag, 0.0):
                    v = v.real
            if v is not None and j % 2 == 0:
                sec = extend(v, mode.mu, mesh)
                source = "extension"
            else:
                res = v if v is not None else (np.zeros(2 * d) if mode.lam == -0.5 else None)
                sec = RadialSection.from_profile(random_polynomial_profile(mode, rng, d, res), mesh)
                source = "polynomial"
            battery.items.append(BatteryItem(mode, sec, source))
    return battery


def norm_equivalence_sweep(cfg, R, k, battery: Battery | None = None, **battery_opts):
    """Extremal ratios ||phi||_{k+1} / (||D phi||_k + ||phi||) over a battery."""
    battery = battery or build_battery(cfg, R, **battery_opts)
    rows = []
    for it in battery.items:
        rows.append((it.mode.lam, it.mode.mu, it.source, elliptic_ratio(it.section, k)))
    ratios = np.array([r[3] for r in rows])
    by_mu = {}
    for lam, mu, _, ratio in rows:
        by_mu[abs(mu)] = max(by_mu.get(abs(mu), 0.0), ratio)
    mus = sorted(by_mu)
    return {
        "max_ratio": float(ratios.max()),
        "min_ratio": float(ratios.min()),
        "spread": float(ratios.max() / ratios.min()),
        "finite": bool(np.all(np.isfinite(ratios))),
        "by_mu": by_mu,
        "growth": float(by_mu[mus[-1]] / by_mu[mus[0]]),
        "rows": rows,
    }


# ---------------------------------------------------------------- untwisting


@dataclass
class ExpansionTable:
    """Coefficients of r^{k+l-1/2} e^{i(l-k)theta} terms; ``extra`` holds unassignable powers."""

    coefficients: dict
    residual: float
    extra: dict = field(default_factory=dict)

    r_max: float = 1e-2

    def size(self, key):
        """Largest size of the term on the fit window."""
        return float(np.max(np.abs(self.coefficients[key]))) * self.r_max ** sum(key)

    def leading(self, tol=1e-8):
        """(k, l) keys of the lowest total order whose term is not negligible on the window."""
        scale = max((self.size(key) for key in self.coefficients), default=0.0)
        live = [key for key in self.coefficients if self.size(key) > tol * scale]
        if not live:
            return []
        n0 = min(k + l for k, l in live)
        return sorted(key for key in live if sum(key) == n0)


def _assign(n, lam):
    """(k, l) with k + l = n for a power r^n of an untwisted component."""
    for p in (-(lam + 0.5), lam + 1.5):
        p = int(round(p))
        if abs(p) <= n and (n - p) % 2 == 0:
            return (n - p) // 2, (n + p) // 2
    return None


def untwist_coefficients(phi: RadialSection, r_max=1e-2, order=(6, 6)):
    """Fit r^{1/2} phi by integer powers of r near 0.

    Returns (ExpansionTable, half_power_residual); the residual is the relative
    least-squares misfit, small exactly when no half-integer powers remain.
    """
    mesh = phi.mesh
    K, L = order
    deg = K + L
    win = mesh.window(mesh.r_min, r_max)
    r = mesh.r[win]
    if r.size <= deg + 1:
        raise FitFailed("fit window holds too few nodes")
    data = np.sqrt(r)[:, None] * phi.stacked()[win]
    x = 2.0 * r / r_max - 1.0
    V = cheb.chebvander(x, deg)
    coef, *_ = np.linalg.lstsq(V, data, rcond=None)
    if not np.all(np.isfinite(coef)):
        raise FitFailed("expansion fit produced non-finite coefficients")
    resid = np.linalg.norm(V @ coef - data)
    scale = np.linalg.norm(data)
    rel = float(resid / scale) if scale > 0 else 0.0
    # Chebyshev coefficients -> monomials in r
    d = phi.d
    mono = np.empty_like(coef)
    for j in range(coef.shape[1]):
        pc = cheb.cheb2poly(coef[:, j])
        pc = np.concatenate([pc, np.zeros(deg + 1 - pc.size)])
        # substitute x = 2 r / r_max - 1
        poly = np.polynomial.Polynomial(pc)(np.polynomial.Polynomial([-1.0, 2.0 / r_max]))
        c = poly.coef
        mono[:, j] = np.concatenate([c, np.zeros(deg + 1 - c.size)])[: deg + 1]
    table, extra = {}, {}
    lam = phi.mode.lam
    for n in range(deg + 1):
        kl = _assign(n, lam)
        vec = mono[n]
        if kl is None:
            extra[n] = vec
        else:
            table[kl] = table.get(kl, 0) + vec
    return ExpansionTable(table, rel, extra, r_max), rel


# ---------------------------------------------------------------- Weyl


def weyl_check(spec: SpectrumResult, k: int, lambdas=None):
    lo, hi = spec.window
    top = min(abs(lo), abs(hi))
    if lambdas is None:
        lambdas = np.linspace(0.0, top, 81)
    table = []
    for Lam in lambdas:
        N = counting_function(spec, Lam)
        table.append((float(Lam), N, N / bracket(Lam) ** (2 * k)))
    return {"sup_ratio": max(t[2] for t in table), "table": table}


# ---------------------------------------------------------------- leading terms


def leading_term_identity(lam, phi, dphi, mesh=None):
    """Both sides of int (|phi'|^2 + lam^2 |phi|^2 / r^2) r dr = int |(d/dr - lam/r) phi|^2 r dr."""
    mesh = mesh or default_mesh()
    r = mesh.r
    f, df = np.asarray(phi(r)), np.asarray(dphi(r))
    lhs = mesh.integrate_rdr(np.abs(df) ** 2 + lam * lam * np.abs(f) ** 2 / r**2)
    rhs = mesh.integrate_rdr(np.abs(df - lam * f / r) ** 2)
    return float(lhs), float(rhs)


# ---------------------------------------------------------------- uniformity


def res_ext_uniformity_sweep(cfg: ModelConfig, mus=MU_SWEEP, kappas=(0.5, 1.5)):
    """Ratios ||ext v||_D / ||v||_check and ||res phi||_check / ||phi||_D across mu."""
    d = cfg.fiber_dim
    mesh = default_mesh()
    A = BranchingOperator(d)
    ext_r, res_r, id_err = {}, {}, 0.0
    for mu in mus:
        vecs = [Q[:, j] for _, Q in A.eigendata(mu) for j in range(Q.shape[1])]
        ratios = []
        for v in vecs:
            e = extend(v, mu, mesh)
            ratios.append(e.graph_norm() / check_norm(v, mu))
            id_err = max(id_err, float(np.linalg.norm(residue(e) - v)))
        ext_r[mu] = max(ratios)
        ratios = []
        for kappa in kappas:
            fs = fundamental_system(-0.5, mu, kappa, d, mesh)
            for sec in fs.admissible:
                t = RadialSection.from_profile(TruncatedProfile(sec.profile), mesh)
                ratios.append(check_norm(residue(t), mu) / t.graph_norm())
        for v in vecs:
            e = extend(v, mu, mesh)
            ratios.append(check_norm(residue(e), mu) / e.graph_norm())
        res_r[mu] = max(ratios)
    keys = sorted(mus)

    def octave(series):
        a, b = series[keys[-2]], series[keys[-1]]
        return b / a - 1.0

    return {
        "ext": ext_r,
        "res": res_r,
        "ext_max": max(ext_r.values()),
        "res_max": max(res_r.values()),
        "ext_final_growth": octave(ext_r),
        "res_final_growth": octave(res_r),
        "res_ext_identity_error": id_err,
    }


def extension_l2_constant(mus=tuple(range(65))):
    """max over mu and unit v of ||ext v||_{L^2} (1 + |mu|)^{1/2}."""
    mesh = default_mesh()
    vals = [extend([1.0, 0.0], mu, mesh).l2_norm() * np.sqrt(1.0 + abs(mu)) for mu in mus]
    return float(max(vals)), vals
