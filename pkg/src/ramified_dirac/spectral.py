"""Eigenvalues of the model operator with a residue condition and an outer condition.

Each mode is a two-point problem on (0, 1].  The solutions admissible at 0
(residue in R for lam = -1/2, regular otherwise) are known in closed form; an
eigenvalue is a kappa at which some of them also satisfy the outer condition,
i.e. where the matching matrix W_perp^H Y(kappa) is singular.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import gamma

import numpy as np
import scipy.integrate
import scipy.linalg
from scipy.optimize import brentq

from .bessel import spherical_bessel
from .conditions import ResidueCondition, ChiralityOperator, orth
from .errors import (
    ClusterUnresolved,
    DimensionMismatch,
    NotEpsInvariant,
    SolveFailed,
    TailTooLarge,
    WindowTooSmall,
)
from .mesh import GradedMesh
from .model_config import (
    ModeIndex,
    ModelConfig,
    OuterBoundaryCondition,
    bracket,
    enumerate_modes,
    residual_modes,
)
from .radial import (
    RadialSection,
    RegularEigenProfile,
    ResidualEigenProfile,
    default_mesh,
)

SIGMA_ACCEPT = 1e-8
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


# ---------------------------------------------------------------- Calderon subspace


def transfer_at_one(mu, kappa, d=1):
    """Map from the residue (a, b) to (u(1), v(1)) for lam = -1/2; shape (n, 2d, 2d)."""
    k = np.atleast_1d(np.asarray(kappa, dtype=float))
    z2 = k * k - mu * mu
    c = np.empty_like(k)
    s = np.empty_like(k)
    pos = z2 >= 0
    w = np.sqrt(z2[pos])
    c[pos] = np.cos(w)
    s[pos] = np.sinc(w / np.pi)
    q = np.sqrt(-z2[~pos])
    c[~pos] = np.cosh(q)
    s[~pos] = np.sinh(q) / q
    T = np.empty((k.size, 2, 2))
    T[:, 0, 0] = c
    T[:, 0, 1] = (k + mu) * s
    T[:, 1, 0] = (mu - k) * s
    T[:, 1, 1] = c
    if d == 1:
        return T
    return np.einsum("nij,ab->niajb", T, np.eye(d)).reshape(k.size, 2 * d, 2 * d)


def calderon_subspace(mode, outer: OuterBoundaryCondition):
    """Residues of the solutions of M phi = 0 satisfying the outer condition."""
    mu = mode.mu if isinstance(mode, ModeIndex) else float(mode)
    d = outer.fiber_dim
    T = transfer_at_one(mu, 0.0, d)[0]
    # scale by 1/cosh(mu) to keep large mu finite
    T = T / T[0, 0]
    N = scipy.linalg.null_space(outer.annihilator.conj().T @ T)
    return orth(N)


def calderon_condition(cfg: ModelConfig) -> ResidueCondition:
    outer = cfg.outer_bc
    return ResidueCondition("Calderon", cfg.fiber_dim, lambda mu: calderon_subspace(mu, outer))


def calderon_family(cfg: ModelConfig):
    return {m.mu: calderon_subspace(m, cfg.outer_bc) for m in residual_modes(cfg)}


# ---------------------------------------------------------------- matching matrices


def _reduced_at_one(nu, z2):
    """omega^{-nu} J_nu(omega) for omega^2 = z2 (array), entire in z2."""
    z2 = np.asarray(z2, dtype=float)
    out = np.empty_like(z2)
    small = np.abs(z2) <= 1.0
    if np.any(small):
        zs = z2[small]
        term = np.full_like(zs, 0.5**nu / gamma(nu + 1.0))
        acc = term.copy()
        for k in range(1, 30):
            term = term * (-zs / 4.0) / (k * (k + nu))
            acc += term
        out[small] = acc
    pos = (~small) & (z2 > 0)
    if np.any(pos):
        w = np.sqrt(z2[pos])
        out[pos] = spherical_bessel("J", nu, w) / w**nu
    neg = (~small) & (z2 < 0)
    if np.any(neg):
        q = np.sqrt(-z2[neg])
        out[neg] = spherical_bessel("I", nu, q) / q**nu
    return out


def admissible_boundary_values(mode: ModeIndex, R_mode, kappa, d=1):
    """Columns = values at r = 1 of the admissible solutions; shape (n, 2d, d)."""
    k = np.atleast_1d(np.asarray(kappa, dtype=float))
    if mode.lam == -0.5:
        Q = np.asarray(R_mode)
        if Q.shape[1] != d:
            raise DimensionMismatch(
                f"mode {mode.label()}: residue subspace has dimension {Q.shape[1]}, expected {d}"
            )
        return transfer_at_one(mode.mu, k, d) @ Q
    if mode.lam < -0.5:
        raise DimensionMismatch("use the representative mode with lam >= -1/2")
    z2 = k * k - mode.mu**2
    f1 = _reduced_at_one(mode.lam, z2)
    g1 = (mode.mu - k) * _reduced_at_one(mode.lam + 1.0, z2)
    Y = np.zeros((k.size, 2 * d, d))
    for j in range(d):
        Y[:, j, j] = f1
        Y[:, d + j, j] = g1
    return Y


def matching_matrix(mode, R_mode, outer: OuterBoundaryCondition, kappa):
    """W_perp^H Y(kappa) with the columns of Y normalised; shape (n, d, d)."""
    d = outer.fiber_dim
    Y = admissible_boundary_values(mode, R_mode, kappa, d)
    Y = Y / np.linalg.norm(Y, axis=1, keepdims=True)
    return np.einsum("ij,njk->nik", outer.annihilator.conj().T, Y)


def mode_matching_determinant(mode, R_mode, outer, kappa):
    """Determinant of the normalised matching matrix (real for real data)."""
    Mx = matching_matrix(mode, R_mode, outer, kappa)
    det = np.linalg.det(Mx)
    if np.all(np.abs(np.imag(det)) <= 1e-14):
        det = np.real(det)
    return det if np.ndim(kappa) else det[0]


def _sigma_min(mode, R_mode, outer, kappa):
    Mx = matching_matrix(mode, R_mode, outer, kappa)
    if Mx.shape[1] == 1:
        return np.abs(Mx[:, 0, 0])
    return np.linalg.svd(Mx, compute_uv=False)[:, -1]


def _golden_min(fun, a, b, tol):
    c = b - GOLDEN * (b - a)
    e = a + GOLDEN * (b - a)
    fc, fe = fun(c), fun(e)
    while b - a > tol:
        if fc <= fe:
            b, e, fe = e, c, fc
            c = b - GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, e, fe
            e = a + GOLDEN * (b - a)
            fe = fun(e)
    x = 0.5 * (a + b)
    return x, fun(x)


def eigenvalues_in_window(mode, R_mode, outer, window, tol=1e-12, step=None):
    """Roots of the matching matrix in [lo, hi] as (kappa, multiplicity) pairs."""
    lo, hi = float(window[0]), float(window[1])
    if not (np.isfinite(lo) and np.isfinite(hi)) or hi < lo:
        raise WindowTooSmall("window must be a finite interval")
    d = outer.fiber_dim
    if step is None:
        step = 0.005
    n = max(3, int(np.ceil((hi - lo) / step)) + 1)
    grid = np.linspace(lo, hi, n)
    sig = _sigma_min(mode, R_mode, outer, grid)

    def fun(x):
        return float(_sigma_min(mode, R_mode, outer, np.array([x]))[0])

    candidates = []
    for i in range(n):
        left = sig[i - 1] if i > 0 else np.inf
        right = sig[i + 1] if i < n - 1 else np.inf
        if sig[i] <= left and sig[i] <= right and sig[i] < 0.5:
            a, b = grid[max(i - 1, 0)], grid[min(i + 1, n - 1)]
            x, fx = _golden_min(fun, a, b, tol * max(1.0, abs(grid[i])) * 0.1)
            candidates.append((x, fx))
    if lo <= 0.0 <= hi:
        candidates.append((0.0, fun(0.0)))

    zero_root = lo <= 0.0 <= hi and fun(0.0) <= SIGMA_ACCEPT
    roots = []
    for x, fx in sorted(candidates):
        if fx > SIGMA_ACCEPT:
            continue
        if zero_root and abs(x) <= 10.0 * tol:
            x = 0.0
        if d == 1:
            x = _polish(mode, R_mode, outer, x, tol)
        if roots and abs(x - roots[-1][0]) <= 10.0 * tol * max(1.0, abs(x)):
            if abs(x - roots[-1][0]) <= 2.0 * tol * max(1.0, abs(x)) or x == 0.0 or roots[-1][0] == 0.0:
                continue
            raise ClusterUnresolved(f"mode {mode.label()}: roots near {x} closer than 10x tolerance")
        if not (lo <= x <= hi):
            continue
        s = np.linalg.svd(matching_matrix(mode, R_mode, outer, np.array([x]))[0], compute_uv=False)
        mult = int(np.sum(s <= SIGMA_ACCEPT))
        roots.append((x, max(mult, 1)))
    return roots


def _polish(mode, R_mode, outer, x, tol):
    """brentq on the real determinant when it changes sign around x."""
    if x == 0.0:
        return 0.0
    h = 1e-9 * max(1.0, abs(x))
    f = lambda k: float(np.real(mode_matching_determinant(mode, R_mode, outer, np.array([k]))[0]))
    fa, fb = f(x - h), f(x + h)
    if fa * fb < 0:
        return brentq(f, x - h, x + h, xtol=tol * 1e-2, rtol=4 * np.finfo(float).eps)
    return x


def eigenfunction(mode, R_mode, outer, kappa, mesh: GradedMesh | None = None):
    """Closed-form eigenfunctions at a root: list of RadialSection."""
    d = outer.fiber_dim
    Mx = matching_matrix(mode, R_mode, outer, np.array([kappa]))[0]
    _, s, vh = np.linalg.svd(Mx)
    null = vh.conj().T[:, s <= SIGMA_ACCEPT] if s.size else np.zeros((d, 0))
    if null.shape[1] == 0:
        null = vh.conj().T[:, -1:]
    mesh = mesh or default_mesh()
    out = []
    for j in range(null.shape[1]):
        c = null[:, j]
        if mode.lam == -0.5:
            v = np.asarray(R_mode) @ c
            if np.allclose(v.imag, 0.0):
                v = v.real
            prof = ResidualEigenProfile(mode.mu, kappa, v)
        else:
            prof = RegularEigenProfile(mode.lam, mode.mu, kappa, np.real_if_close(c))
        out.append(RadialSection.from_profile(prof, mesh))
    return out


# ---------------------------------------------------------------- global spectrum


@dataclass
class SpectrumEntry:
    kappa: float
    mode: ModeIndex
    mult: int
    method: str = "determinant"


@dataclass
class SpectrumResult:
    entries: list
    window: tuple
    condition: ResidueCondition | None = None
    outer: OuterBoundaryCondition | None = None
    skipped: list = field(default_factory=list)

    def kappas(self, with_multiplicity=True):
        out = []
        for e in self.entries:
            out.extend([e.kappa] * (e.mult if with_multiplicity else 1))
        return np.array(out)

    def to_rows(self):
        return [(e.kappa, e.mode.lam, e.mode.mu, e.mult, e.method) for e in self.entries]


def assemble_spectrum(cfg: ModelConfig, R: ResidueCondition, window, modes=None):
    """Union of the mode spectra in the window, one representative per conjugate pair.

    Residual modes whose condition has dimension below d (e.g. APS on ker A)
    are skipped and listed in ``skipped``; dimension above d is an error.
    """
    outer = cfg.outer_bc
    d = cfg.fiber_dim
    entries, skipped = [], []
    for mode in modes if modes is not None else enumerate_modes(cfg):
        R_mode = None
        if mode.lam == -0.5:
            R_mode = R.subspace(mode.mu)
            if R_mode.shape[1] < d:
                skipped.append(mode)
                continue
            if R_mode.shape[1] > d:
                raise DimensionMismatch(
                    f"mode {mode.label()}: condition {R.kind} has dimension {R_mode.shape[1]} > {d}"
                )
        for kappa, mult in eigenvalues_in_window(mode, R_mode, outer, window, cfg.tol.root):
            entries.append(SpectrumEntry(kappa, mode, mult))
    entries.sort(key=lambda e: (e.kappa, e.mode.lam, e.mode.mu))
    return SpectrumResult(entries, (float(window[0]), float(window[1])), R, outer, skipped)


def counting_function(spec: SpectrumResult, Lam):
    lo, hi = spec.window
    if Lam < 0 or -Lam < lo - 1e-12 or Lam > hi + 1e-12:
        raise WindowTooSmall(f"window {spec.window} does not cover [-{Lam}, {Lam}]")
    return int(sum(e.mult for e in spec.entries if abs(e.kappa) <= Lam))


# ---------------------------------------------------------------- heat supertrace


def weyl_tail(spec: SpectrumResult, t, power=3.0):
    """Bound for sum_{|kappa| > kmax} e^{-t kappa^2} from N(L) <= C <L>^power."""
    kmax = min(abs(spec.window[0]), abs(spec.window[1]))
    grid = np.linspace(1.0, kmax, 64)
    C = 2.0 * max(counting_function(spec, L) / bracket(L) ** power for L in grid)
    # integrate e^{-t L^2} dN with dN <= C power <L>^{power-1} dL
    integrand = lambda L: np.exp(-t * L * L) * C * power * bracket(L) ** (power - 1.0)
    val, _ = scipy.integrate.quad(integrand, kmax, np.inf)
    return float(val)


def heat_supertrace(spec_plus: SpectrumResult, spec_minus: SpectrumResult, t, tail_bound=1e-8):
    """(sum e^{-t k^2} over plus - same over minus, tail estimate)."""
    if t <= 0:
        raise ValueError("t must be positive")
    tail = weyl_tail(spec_plus, t) + weyl_tail(spec_minus, t)
    if tail > tail_bound:
        raise TailTooLarge(f"tail estimate {tail:.3e} exceeds {tail_bound:.3e}")
    total = sum(e.mult * np.exp(-t * e.kappa**2) for e in spec_plus.entries)
    total -= sum(e.mult * np.exp(-t * e.kappa**2) for e in spec_minus.entries)
    return float(total), tail


def _orbit(mode):
    """Modes exchanged by the grading: (lam, mu) and (lam, -mu); residual modes have mu >= 0 already."""
    return (mode.lam, abs(mode.mu))


def _paired(kappas, tol):
    k = np.sort(np.asarray([x for x in kappas if x != 0.0]))
    return k.size == 0 or (k.size % 2 == 0 and np.allclose(k, -k[::-1], rtol=0.0, atol=tol))


def graded_spectra(spec: SpectrumResult, eps: ChiralityOperator | None = None, pair_tol=1e-8):
    """Split a spectrum into the chirality sectors of D^2.

    On residue data eps acts as the given fiber involution; on the lam >= 1/2
    modes it acts as (f, g) -> (f, -g) while exchanging mu and -mu.  Where eps
    anticommutes with the operator the nonzero eigenvalues come in pairs
    (kappa, -kappa) within each orbit of modes: one member goes to each sector.
    Kernel vectors are sorted by their eps-sign.  NotEpsInvariant is raised
    when some orbit has unpaired nonzero eigenvalues, i.e. the residue or
    outer condition does not commute with the grading.
    """
    d = spec.outer.fiber_dim
    eps = eps or ChiralityOperator.default(d)
    orbits = {}
    for e in spec.entries:
        orbits.setdefault(_orbit(e.mode), []).extend([e.kappa] * e.mult)
    lo, hi = spec.window
    edge = min(abs(lo), abs(hi))
    for key, ks in orbits.items():
        inner = [x for x in ks if abs(x) < edge - 1e-6]
        if not _paired(inner, pair_tol * max(1.0, edge)):
            raise NotEpsInvariant(f"eigenvalues of modes {key} are not paired by the grading")
    plus, minus = [], []
    for e in spec.entries:
        if e.kappa > 0:
            plus.append(e)
        elif e.kappa < 0:
            minus.append(e)
        elif e.mode.lam == -0.5:
            R_mode = spec.condition.subspace(e.mode.mu)
            for phi in eigenfunction(e.mode, R_mode, spec.outer, 0.0):
                v = phi.profile.residue()
                sgn = np.real(np.vdot(v, eps.eps @ v)) / max(np.vdot(v, v).real, 1e-300)
                target = plus if sgn > 0.5 else minus if sgn < -0.5 else None
                if target is None:
                    raise NotEpsInvariant("zero mode is not an eps eigenvector")
                target.append(SpectrumEntry(0.0, e.mode, 1, e.method))
        elif e.mode.mu != 0:
            # phi and eps phi live in the modes mu and -mu: one vector per sector
            (plus if e.mode.mu > 0 else minus).append(SpectrumEntry(0.0, e.mode, e.mult, e.method))
        else:
            for phi in eigenfunction(e.mode, None, spec.outer, 0.0):
                nf, ng = phi.mesh.norm(phi.f), phi.mesh.norm(phi.g)
                if min(nf, ng) > 1e-8 * max(nf, ng):
                    raise NotEpsInvariant("zero mode is not an eps eigenvector")
                (plus if nf > ng else minus).append(SpectrumEntry(0.0, e.mode, 1, e.method))
    mk = lambda ents: SpectrumResult(ents, spec.window, spec.condition, spec.outer)
    return mk(plus), mk(minus)


# ---------------------------------------------------------------- second order solve


def _green_component(nu, q, psi, mesh: GradedMesh):
    """Solution of -(y'' + y'/r - nu^2 y/r^2) + q^2 y = psi, regular at 0, y(1) = 0.

    Returns (y, y'(1)).
    """
    r = mesh.r
    Iq = spherical_bessel("I", nu, q)
    Kq = spherical_bessel("K", nu, q)
    y1 = spherical_bessel("I", nu, q * r)
    y2 = spherical_bessel("K", nu, q * r) * Iq - y1 * Kq
    rr = r.reshape((-1,) + (1,) * (psi.ndim - 1))
    a = y1.reshape(rr.shape) * psi * rr
    b = y2.reshape(rr.shape) * psi * rr
    ca = mesh.cumulative(a)
    cb = mesh.cumulative(b)
    total_b = mesh.integrate(b)
    y = (y2.reshape(rr.shape) * ca + y1.reshape(rr.shape) * (total_b - cb)) / Iq
    dy1 = -mesh.integrate(a) / Iq
    return y, dy1


def bessel_operator(nu, y, mesh: GradedMesh):
    """(d^2 + d/r - nu^2/r^2) y through r^{-nu-1} (r^{2nu+1} (r^{-nu} y)')'."""
    r = mesh.r.reshape((-1,) + (1,) * (np.ndim(y) - 1))
    w = r ** (-nu) * y
    return r ** (-nu - 1.0) * mesh.diff(r ** (2.0 * nu + 1.0) * mesh.diff(w))


def squared_plus_one(mode, phi: RadialSection):
    """(M^2 + 1) phi using the decoupled second-order operators."""
    mesh = phi.mesh
    lam, mu = mode.lam, mode.mu
    f = -bessel_operator(abs(lam), phi.f, mesh) + (mu * mu + 1.0) * phi.f
    g = -bessel_operator(abs(lam + 1.0), phi.g, mesh) + (mu * mu + 1.0) * phi.g
    return RadialSection(mode, mesh, f, g)


def second_order_solve(mode, R_mode, outer: OuterBoundaryCondition, psi: RadialSection, tol=1e-6):
    """Solve (M^2 + 1) phi = psi with zero residue at 0, phi(1) and (M phi)(1) in W.

    ``R_mode`` is accepted for interface symmetry; the inner factor is the
    minimal operator, so the residue of phi is zero whatever R is.
    """
    mesh = psi.mesh
    d = outer.fiber_dim
    lam, mu = mode.lam, mode.mu
    q = math.sqrt(mu * mu + 1.0)
    nf, ng = abs(lam), abs(lam + 1.0)
    yf, dyf = _green_component(nf, q, psi.f, mesh)
    yg, dyg = _green_component(ng, q, psi.g, mesh)
    # homogeneous regular parts alpha I_nf(q r), beta I_ng(q r)
    If, Ig = spherical_bessel("I", nf, q), spherical_bessel("I", ng, q)
    # derivative of I_nu(q r) at r = 1
    dIf = q * 0.5 * (spherical_bessel("I", nf - 1.0, q) + spherical_bessel("I", nf + 1.0, q)) if nf > 0.5 else None
    dIg = q * 0.5 * (spherical_bessel("I", ng - 1.0, q) + spherical_bessel("I", ng + 1.0, q)) if ng > 0.5 else None
    if nf == 0.5:
        dIf = q * spherical_bessel("I", -0.5, q) - 0.5 * If
    if ng == 0.5:
        dIg = q * spherical_bessel("I", -0.5, q) - 0.5 * Ig
    eye = np.eye(d)
    Wp = outer.annihilator.conj().T
    # phi(1) = (alpha If, beta Ig); (M phi)(1) = (mu f - g' - (lam+1) g, f' - lam f - mu g) at 1
    val = np.block([[If * eye, 0 * eye], [0 * eye, Ig * eye]])
    dval = np.block(
        [
            [mu * If * eye, -(dIg + (lam + 1.0) * Ig) * eye],
            [(dIf - lam * If) * eye, -mu * Ig * eye],
        ]
    )
    part_M = np.concatenate([-dyg, dyf])
    A = np.vstack([Wp @ val, Wp @ dval])
    rhs = np.concatenate([np.zeros(d), -(Wp @ part_M)])
    coef = np.linalg.solve(A, rhs)
    alpha, beta = coef[:d], coef[d:]
    r = mesh.r
    f = yf + np.outer(spherical_bessel("I", nf, q * r), alpha)
    g = yg + np.outer(spherical_bessel("I", ng, q * r), beta)
    if np.isrealobj(psi.f) and np.allclose(np.imag(f), 0) and np.allclose(np.imag(g), 0):
        f, g = np.real(f), np.real(g)
    phi = RadialSection(mode, mesh, f, g)
    # sampled second derivatives lose about eps/h relative accuracy on the
    # innermost panels, so the residual is measured on r >= 1e-6
    res = squared_plus_one(mode, phi)
    keep = (mesh.r >= 1e-6)[:, None]
    err = mesh.norm(np.where(keep, res.stacked() - psi.stacked(), 0.0))
    scale = mesh.norm(np.where(keep, psi.stacked(), 0.0))
    if err > tol * max(scale, 1e-300):
        raise SolveFailed(f"mode {mode.label()}: residual {err / max(scale, 1e-300):.2e} exceeds {tol:g}")
    return phi


def manufactured_pair(mode, coef_f, coef_g, mesh: GradedMesh | None = None):
    """phi0 = (r^a P(r)(1-r)^2, r^b Q(r)(1-r)^2) and psi = (M^2 + 1) phi0 exactly.

    a = |lam| and b = |lam + 1| make phi0 regular with zero residue; the factor
    (1-r)^2 puts phi0(1) and (M phi0)(1) at zero.
    """
    mesh = mesh or default_mesh()
    r = mesh.r
    P = np.polynomial.polynomial
    out_phi, out_psi = [], []
    q2 = mode.mu**2 + 1.0
    for nu, coef in ((abs(mode.lam), coef_f), (abs(mode.lam + 1.0), coef_g)):
        cols_phi, cols_psi = [], []
        for c in np.atleast_2d(np.asarray(coef, dtype=float)).T:
            p = P.polymul(c, [1.0, -2.0, 1.0])
            # y = r^nu p(r): y'' + y'/r - nu^2 y/r^2 = r^nu (p'' + (2 nu + 1) p'/r)
            dp, ddp = P.polyder(p), P.polyder(p, 2)
            lap = P.polyval(r, ddp) + (2 * nu + 1.0) * P.polyval(r, dp) / r
            y = r**nu * P.polyval(r, p)
            cols_phi.append(y)
            cols_psi.append(-(r**nu) * lap + q2 * y)
        out_phi.append(np.column_stack(cols_phi))
        out_psi.append(np.column_stack(cols_psi))
    phi0 = RadialSection(mode, mesh, out_phi[0], out_phi[1])
    psi = RadialSection(mode, mesh, out_psi[0], out_psi[1])
    return phi0, psi
