"""Per-mode radial model operator on (0, 1].

A section of the mode (lam, mu) is a pair (f, g) of C^d-valued radial
functions.  The mode operator is

    M(f, g) = ( mu f - (d/dr + (lam+1)/r) g ,  (d/dr - lam/r) f - mu g ),

symmetric for the pairing int <., .> r dr, with J(f, g) = (-g, f).

Closed-form sections ("profiles") know their values, their exact image under
M, their residue (coefficient of r^{-1/2}) and their value at r = 1.  Sampled
sections live on the graded mesh.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gamma

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .bessel import spherical_bessel
from .errors import ConvergenceError, DegenerateMode, DomainError, InternalError, MeshTooCoarse, NotInDomain
from .mesh import GradedMesh, mesh_from_config
from .model_config import ModeIndex, ModelConfig, OuterBoundaryCondition, convention_J, slot_basis

OMEGA_THRESHOLD = 1e-10


class ScalarConvention:
    """J(f, g) = (-g, f); the mode operator is symmetric for r dr."""

    @staticmethod
    def J(d=1):
        return convention_J(d)

    @staticmethod
    def apply_J(f, g):
        return -g, f

    @staticmethod
    def apply_J_inverse(f, g):
        return g, -f


CONVENTION = ScalarConvention()


def default_mesh():
    return mesh_from_config(ModelConfig())


# ---------------------------------------------------------------- cutoff


def smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1; returns (s, ds/dt)."""
    t = np.asarray(t, dtype=float)
    s = np.where(t >= 1.0, 1.0, 0.0)
    ds = np.zeros_like(t)
    inside = (t > 0.0) & (t < 1.0)
    ti = t[inside]
    z = 1.0 / ti - 1.0 / (1.0 - ti)
    si = np.where(z > 700, 0.0, 1.0 / (1.0 + np.exp(np.minimum(z, 700))))
    s = s.astype(float)
    s[inside] = si
    ds[inside] = si * (1.0 - si) * (1.0 / ti**2 + 1.0 / (1.0 - ti) ** 2)
    return s, ds


def cutoff(r):
    """chi = 1 on [0, 1/4], chi = 0 on [1/2, 1]; returns (chi, chi')."""
    s, ds = smooth_step((0.5 - np.asarray(r, dtype=float)) / 0.25)
    return s, -4.0 * ds


def smooth_step_jet(t, order):
    """Derivatives s, s', ..., s^(order) of the smooth step at t.

    Taylor coefficients follow from s' = -s (1 - s) z' with z = 1/t - 1/(1-t).
    """
    t = np.asarray(t, dtype=float)
    out = np.zeros((order + 1,) + t.shape)
    s0, _ = smooth_step(t)
    out[0] = s0
    inside = (t > 0.0) & (t < 1.0)
    if order == 0 or not np.any(inside):
        return out
    ti = t[inside]
    # Taylor coefficients of z'(t + h): z' = -1/t^2 - 1/(1-t)^2
    zd = np.array([-(j + 1) * (-1.0) ** j / ti ** (j + 2) - (j + 1) / (1.0 - ti) ** (j + 2) for j in range(order)])
    S = np.zeros((order + 1, ti.size))
    S[0] = s0[inside]
    for n in range(order):
        # P = S (1 - S) up to degree n
        Pn = np.array([S[k] - sum(S[i] * S[k - i] for i in range(k + 1)) for k in range(n + 1)])
        S[n + 1] = -sum(Pn[n - j] * zd[j] for j in range(n + 1)) / (n + 1)
    fact = 1.0
    for n in range(order + 1):
        if n:
            fact *= n
        out[n][inside] = fact * S[n]
    return out


def cutoff_derivatives(r, count):
    """chi, chi', ..., chi^(count-1) on r."""
    jets = smooth_step_jet((0.5 - np.asarray(r, dtype=float)) / 0.25, max(count - 1, 0))
    return [(-4.0) ** n * jets[n] for n in range(count)]


def bump(r, lo, hi, ramp):
    """Smooth bump equal to 1 on [lo+ramp, hi-ramp] and supported in [lo, hi]."""
    a, da = smooth_step((np.asarray(r) - lo) / ramp)
    b, db = smooth_step((hi - np.asarray(r)) / ramp)
    return a * b, (da * b - a * db) / ramp


# ---------------------------------------------------------------- entire Bessel profiles


def reduced_bessel(nu, z2, r):
    """omega^{-nu} J_nu(omega r) with omega^2 = z2, entire in z2 (nu > -1)."""
    r = np.asarray(r, dtype=float)
    x2 = z2 * r * r
    out = np.empty_like(r)
    small = np.abs(x2) <= 1.0
    if np.any(small):
        rs = r[small]
        term = (rs / 2.0) ** nu / gamma(nu + 1.0)
        acc = term.copy()
        q = -z2 * rs * rs / 4.0
        for k in range(1, 40):
            term = term * q / (k * (k + nu))
            acc = acc + term
        out[small] = acc
    big = ~small
    if np.any(big):
        rb = r[big]
        if z2 > 0:
            w = np.sqrt(z2)
            out[big] = spherical_bessel("J", nu, w * rb) / w**nu
        else:
            q = np.sqrt(-z2)
            out[big] = spherical_bessel("I", nu, q * rb) / q**nu
    return out


def reduced_bessel_singular(nu, z2, r):
    """omega^{nu} J_{-nu}(omega r), entire in z2, behaving like r^{-nu}."""
    r = np.asarray(r, dtype=float)
    x2 = z2 * r * r
    out = np.empty_like(r)
    small = np.abs(x2) <= 1.0
    if np.any(small):
        rs = r[small]
        term = (rs / 2.0) ** (-nu) / gamma(1.0 - nu)
        acc = term.copy()
        q = -z2 * rs * rs / 4.0
        for k in range(1, 40):
            term = term * q / (k * (k - nu))
            acc = acc + term
        out[small] = acc
    big = ~small
    if np.any(big):
        rb = r[big]
        if z2 > 0:
            w = np.sqrt(z2)
            out[big] = spherical_bessel("J", -nu, w * rb) * w**nu
        else:
            q = np.sqrt(-z2)
            out[big] = spherical_bessel("I", -nu, q * rb) * q**nu
    return out


def trig_pair(z2, r):
    """(cos(omega r), sin(omega r)/omega) for omega^2 = z2, hyperbolic when z2 < 0."""
    r = np.asarray(r, dtype=float)
    if z2 >= 0:
        w = np.sqrt(z2)
        return np.cos(w * r), r * np.sinc(w * r / np.pi)
    q = np.sqrt(-z2)
    x = q * r
    with np.errstate(over="ignore", invalid="ignore"):
        shc = np.where(x > 1e-8, np.sinh(x) / np.where(x > 0, x, 1.0), 1.0 + x * x / 6.0)
    return np.cosh(x), r * shc


# ---------------------------------------------------------------- profiles


class Profile:
    """Closed-form section of a mode: values, exact image under M, residue."""

    tag = "profile"

    def __init__(self, mode: ModeIndex, d: int):
        self.mode = mode
        self.d = d

    def values(self, r):
        raise NotImplementedError

    def image(self, r):
        raise NotImplementedError

    def residue(self):
        return np.zeros(2 * self.d, dtype=complex)

    def image_profile(self):
        """M applied as a closed-form profile, or None when not available."""
        return None

    def boundary(self):
        f, g = self.values(np.array([1.0]))
        return np.concatenate([f[0], g[0]])

    def __add__(self, other):
        return CombinedProfile([(1.0, self), (1.0, other)])

    def __rmul__(self, c):
        return CombinedProfile([(c, self)])


class CombinedProfile(Profile):
    tag = "combination"

    def __init__(self, terms):
        flat = []
        for c, p in terms:
            if isinstance(p, CombinedProfile):
                flat.extend((c * c2, p2) for c2, p2 in p.terms)
            else:
                flat.append((c, p))
        super().__init__(flat[0][1].mode, flat[0][1].d)
        self.terms = flat

    def _sum(self, method, r):
        f = g = 0
        for c, p in self.terms:
            fp, gp = getattr(p, method)(r)
            f = f + c * fp
            g = g + c * gp
        return f, g

    def values(self, r):
        return self._sum("values", r)

    def image(self, r):
        return self._sum("image", r)

    def residue(self):
        return sum(c * p.residue() for c, p in self.terms)

    def image_profile(self):
        imgs = [p.image_profile() for _, p in self.terms]
        if any(q is None for q in imgs):
            return None
        return CombinedProfile([(c, q) for (c, _), q in zip(self.terms, imgs)])


class ResidualEigenProfile(Profile):
    """Solution of M phi = kappa phi for lam = -1/2 with residue vector (a, b).

    With u = r^{1/2} f, v = r^{1/2} g the system is u' = (kappa+mu) v,
    v' = (mu-kappa) u, solved by cos/sin of omega r with omega^2 = kappa^2 - mu^2.
    """

    tag = "residual-eigen"

    def __init__(self, mu, kappa, residue_vector):
        v = np.asarray(residue_vector)
        d = v.size // 2
        super().__init__(ModeIndex(-0.5, mu, d), d)
        self.kappa = float(kappa)
        self.a = v[:d]
        self.b = v[d:]
        self.z2 = kappa * kappa - mu * mu
        self.degenerate = abs(self.z2) < OMEGA_THRESHOLD

    def untwisted(self, r):
        mu, k = self.mode.mu, self.kappa
        z2 = 0.0 if self.degenerate else self.z2
        c, s = trig_pair(z2, r)
        u = np.outer(c, self.a) + np.outer((k + mu) * s, self.b)
        v = np.outer(c, self.b) + np.outer((mu - k) * s, self.a)
        return u, v

    def values(self, r):
        u, v = self.untwisted(r)
        h = np.asarray(r, dtype=float)[:, None] ** -0.5
        return h * u, h * v

    def image(self, r):
        f, g = self.values(r)
        return self.kappa * f, self.kappa * g

    def image_profile(self):
        return CombinedProfile([(self.kappa, self)])

    def residue(self):
        return np.concatenate([self.a, self.b]).astype(complex)


class RegularEigenProfile(Profile):
    """Regular solution for lam >= 1/2: f = R_lam c, g = (mu - kappa) R_{lam+1} c."""

    tag = "regular-eigen"

    def __init__(self, lam, mu, kappa, coef):
        c = np.atleast_1d(np.asarray(coef))
        super().__init__(ModeIndex(lam, mu, c.size), c.size)
        self.kappa = float(kappa)
        self.c = c
        self.z2 = kappa * kappa - mu * mu

    def values(self, r):
        lam, mu = self.mode.lam, self.mode.mu
        f = reduced_bessel(lam, self.z2, r)
        g = (mu - self.kappa) * reduced_bessel(lam + 1.0, self.z2, r)
        return np.outer(f, self.c), np.outer(g, self.c)

    def image(self, r):
        f, g = self.values(r)
        return self.kappa * f, self.kappa * g

    def image_profile(self):
        return CombinedProfile([(self.kappa, self)])


class SingularEigenProfile(Profile):
    """Complementary solution for lam >= 1/2, behaving like r^{-lam} or r^{-lam-1}."""

    tag = "singular-eigen"

    def __init__(self, lam, mu, kappa, coef):
        c = np.atleast_1d(np.asarray(coef))
        super().__init__(ModeIndex(lam, mu, c.size), c.size)
        self.kappa = float(kappa)
        self.c = c
        self.z2 = kappa * kappa - mu * mu

    def values(self, r):
        lam, mu = self.mode.lam, self.mode.mu
        f = (self.kappa + mu) * reduced_bessel_singular(lam, self.z2, r)
        g = reduced_bessel_singular(lam + 1.0, self.z2, r)
        return np.outer(f, self.c), np.outer(g, self.c)

    def image(self, r):
        f, g = self.values(r)
        return self.kappa * f, self.kappa * g

    def image_profile(self):
        return CombinedProfile([(self.kappa, self)])


class ConjugatedProfile(Profile):
    """J^{-1} phi, carrying a solution of the conjugate mode to this mode."""

    tag = "conjugated"

    def __init__(self, mode, inner: Profile):
        super().__init__(mode, inner.d)
        self.inner = inner

    def values(self, r):
        return CONVENTION.apply_J_inverse(*self.inner.values(r))

    def image(self, r):
        return CONVENTION.apply_J_inverse(*self.inner.image(r))

    def image_profile(self):
        q = self.inner.image_profile()
        return None if q is None else ConjugatedProfile(self.mode, q)

    def residue(self):
        v = self.inner.residue()
        d = self.d
        return np.concatenate([v[d:], -v[:d]])


class ExtensionProfile(Profile):
    """sum_n chi^(n)(r) r^{-1/2} e^{-|mu| r} w_n; with the single vector v this is chi r^{-1/2} e^{-|mu| r} v.

    On the lam = -1/2 mode M acts on r^{-1/2} h(r) w as r^{-1/2}(h' J w + h mu sigma_z w),
    so the family is closed under M and every power of M is exact.
    """

    tag = "extension"

    def __init__(self, mu, v, jets=None):
        v = np.asarray(v)
        d = v.size // 2
        super().__init__(ModeIndex(-0.5, mu, d), d)
        self.v = v
        self.jets = [v] if jets is None else [np.asarray(w) for w in jets]

    def _derivs(self, r):
        r = np.asarray(r, dtype=float)
        chis = cutoff_derivatives(r, len(self.jets))
        e = r**-0.5 * np.exp(-abs(self.mode.mu) * r)
        return [c * e for c in chis]

    def values(self, r):
        h = self._derivs(r)
        d = self.d
        out = sum(np.outer(h[n], w) for n, w in enumerate(self.jets))
        return out[:, :d], out[:, d:]

    def image_profile(self):
        d, mu = self.d, self.mode.mu
        J = convention_J(d)
        S = np.kron(np.diag([mu, -mu]), np.eye(d))
        new = [np.zeros(2 * d, dtype=np.result_type(*self.jets, float)) for _ in range(len(self.jets) + 1)]
        for n, w in enumerate(self.jets):
            # (chi^(n) e)' = chi^(n+1) e - |mu| chi^(n) e
            new[n + 1] = new[n + 1] + J @ w
            new[n] = new[n] + S @ w - abs(mu) * (J @ w)
        return ExtensionProfile(mu, self.v, new)

    def image(self, r):
        return self.image_profile().values(r)

    def residue(self):
        # chi = 1 near 0, so only the n = 0 term survives
        return self.jets[0].astype(complex)


class PolynomialProfile(Profile):
    """Sections with polynomial data, closed under M.

    lam = -1/2: f = r^{-1/2} U(r), g = r^{-1/2} V(r), any polynomials.
    lam >= 1/2: f = r^lam F(r), g = r^{lam+1} G(r) with F, G even polynomials.
    Coefficient arrays have shape (degree+1, d), lowest power first.
    """

    tag = "polynomial"

    def __init__(self, mode, F, G):
        self.F = np.atleast_2d(np.asarray(F))
        self.G = np.atleast_2d(np.asarray(G))
        super().__init__(mode, self.F.shape[1])
        if mode.lam != -0.5 and (np.any(self.F[1::2]) or np.any(self.G[1::2])):
            raise DomainError("regular polynomial sections need even F and G")

    def _pad(self, c, n):
        out = np.zeros((n, c.shape[1]), dtype=c.dtype)
        out[: c.shape[0]] = c
        return out

    def values(self, r):
        r = np.asarray(r, dtype=float)
        P = np.polynomial.polynomial
        lam = self.mode.lam
        f = P.polyval(r, self.F).T
        g = P.polyval(r, self.G).T
        f, g = f.reshape(r.size, self.d), g.reshape(r.size, self.d)
        pf, pg = (r**-0.5, r**-0.5) if lam == -0.5 else (r**lam, r ** (lam + 1.0))
        return pf[:, None] * f, pg[:, None] * g

    def image_profile(self):
        P = np.polynomial.polynomial
        lam, mu = self.mode.lam, self.mode.mu
        n = max(self.F.shape[0], self.G.shape[0]) + 1
        F, G = self._pad(self.F, n), self._pad(self.G, n)
        dF, dG = self._pad(P.polyder(F), n), self._pad(P.polyder(G), n)
        if lam == -0.5:
            return PolynomialProfile(self.mode, mu * F - dG, dF - mu * G)
        rdG = np.arange(n)[:, None] * G
        # F'/r: F even, so F' is odd and the shift is exact
        dF_over_r = np.zeros_like(F)
        dF_over_r[: n - 2] = dF[1 : n - 1]
        return PolynomialProfile(self.mode, mu * F - (2 * lam + 2) * G - rdG, dF_over_r - mu * G)

    def image(self, r):
        return self.image_profile().values(r)

    def residue(self):
        if self.mode.lam != -0.5:
            return np.zeros(2 * self.d, dtype=complex)
        return np.concatenate([self.F[0], self.G[0]]).astype(complex)


def random_polynomial_profile(mode, rng, d=1, residue=None, degree=4, vanish=6):
    """Random PolynomialProfile with the given residue, vanishing to order ``vanish`` at r = 1."""
    P = np.polynomial.polynomial
    if mode.lam == -0.5:
        base = P.polypow([1.0, -1.0], vanish)
        F = rng.normal(size=(degree + 1, d))
        G = rng.normal(size=(degree + 1, d))
        if residue is not None:
            residue = np.asarray(residue)
            F, G = F.astype(residue.dtype), G.astype(residue.dtype)
            F[0], G[0] = residue[:d], residue[d:]
        mult = lambda C: np.column_stack([P.polymul(base, C[:, j]) for j in range(d)])
        return PolynomialProfile(mode, mult(F), mult(G))
    base = P.polypow([1.0, 0.0, -1.0], vanish)
    cols_f, cols_g = [], []
    for _ in range(d):
        pf = np.zeros(2 * degree + 1)
        pg = np.zeros(2 * degree + 1)
        pf[::2] = rng.normal(size=degree + 1)
        pg[::2] = rng.normal(size=degree + 1)
        cols_f.append(P.polymul(base, pf))
        cols_g.append(P.polymul(base, pg))
    return PolynomialProfile(mode, np.column_stack(cols_f), np.column_stack(cols_g))


class TruncatedProfile(Profile):
    """chi(r) phi: unchanged near 0, vanishing on [1/2, 1]; M(chi phi) = chi M phi + chi' J phi."""

    def __init__(self, inner: Profile):
        super().__init__(inner.mode, inner.d)
        self.inner = inner
        self.tag = inner.tag + "-truncated"

    def values(self, r):
        chi, _ = cutoff(r)
        f, g = self.inner.values(r)
        return chi[:, None] * f, chi[:, None] * g

    def image(self, r):
        chi, dchi = cutoff(r)
        f, g = self.inner.values(r)
        mf, mg = self.inner.image(r)
        c, dc = chi[:, None], dchi[:, None]
        return c * mf - dc * g, c * mg + dc * f

    def residue(self):
        return self.inner.residue()


class SmoothProfile(Profile):
    """Section given by callables returning (f, g, f', g'); must have no r^{-1/2} part."""

    tag = "smooth"

    def __init__(self, mode, d, func):
        super().__init__(mode, d)
        self.func = func

    def values(self, r):
        f, g, _, _ = self.func(np.asarray(r, dtype=float))
        return f, g

    def image(self, r):
        r = np.asarray(r, dtype=float)
        f, g, df, dg = self.func(r)
        lam, mu = self.mode.lam, self.mode.mu
        rr = r[:, None]
        return mu * f - dg - (lam + 1.0) * g / rr, df - lam * f / rr - mu * g


def bump_profile(mode, coef_f, coef_g, lo=0.3, hi=0.8, ramp=0.1):
    """Compactly supported smooth section: bump times polynomials (numpy order)."""
    coef_f = np.atleast_2d(np.asarray(coef_f))
    coef_g = np.atleast_2d(np.asarray(coef_g))
    d = coef_f.shape[1]

    def func(r):
        b, db = bump(r, lo, hi, ramp)
        pf = np.polynomial.polynomial.polyval(r, coef_f).T if coef_f.shape[0] else 0
        pg = np.polynomial.polynomial.polyval(r, coef_g).T
        dpf = np.polynomial.polynomial.polyval(r, np.polynomial.polynomial.polyder(coef_f)).T
        dpg = np.polynomial.polynomial.polyval(r, np.polynomial.polynomial.polyder(coef_g)).T
        pf = np.reshape(pf, (r.size, d))
        pg = np.reshape(pg, (r.size, d))
        dpf = np.reshape(dpf, (r.size, d))
        dpg = np.reshape(dpg, (r.size, d))
        bb, dbb = b[:, None], db[:, None]
        return bb * pf, bb * pg, dbb * pf + bb * dpf, dbb * pg + bb * dpg

    return SmoothProfile(mode, d, func)


# ---------------------------------------------------------------- sections


@dataclass
class RadialSection:
    """Two-component section of a mode, sampled on a graded mesh.

    ``profile`` is set for closed-form sections and carries the exact image
    under M and the exact residue.
    """

    mode: ModeIndex
    mesh: GradedMesh
    f: np.ndarray
    g: np.ndarray
    profile: Profile | None = field(default=None, repr=False)

    @classmethod
    def from_profile(cls, profile: Profile, mesh: GradedMesh | None = None):
        mesh = mesh or default_mesh()
        f, g = profile.values(mesh.r)
        return cls(profile.mode, mesh, np.asarray(f), np.asarray(g), profile)

    @property
    def representation(self):
        return self.profile.tag if self.profile is not None else "sampled"

    @property
    def d(self):
        return self.f.shape[1]

    def stacked(self):
        return np.concatenate([self.f, self.g], axis=1)

    def image(self):
        """M applied: exact for profiles, numerical otherwise."""
        if self.profile is not None:
            q = self.profile.image_profile()
            if q is not None:
                return RadialSection.from_profile(q, self.mesh)
            f, g = self.profile.image(self.mesh.r)
            return RadialSection(self.mode, self.mesh, np.asarray(f), np.asarray(g))
        return apply_mode_operator(self.mode, self)

    def l2_norm(self):
        return self.mesh.norm(self.stacked())

    def graph_norm(self):
        """(||phi||^2 + ||M phi||^2)^{1/2}."""
        return float(np.hypot(self.l2_norm(), self.image().l2_norm()))

    def __add__(self, other):
        prof = None
        if self.profile is not None and other.profile is not None:
            prof = self.profile + other.profile
        return RadialSection(self.mode, self.mesh, self.f + other.f, self.g + other.g, prof)

    def truncated(self):
        """Multiply by the cutoff chi; requires a closed-form section."""
        if self.profile is None:
            raise NotImplementedError("truncation needs a closed-form section")
        return RadialSection.from_profile(TruncatedProfile(self.profile), self.mesh)

    def scale(self, c):
        prof = c * self.profile if self.profile is not None else None
        return RadialSection(self.mode, self.mesh, c * self.f, c * self.g, prof)


def sample(profile: Profile, mesh: GradedMesh | None = None) -> RadialSection:
    return RadialSection.from_profile(profile, mesh)


# ---------------------------------------------------------------- operations


@dataclass
class FundamentalSystem:
    admissible: list
    singular: list
    degenerate: bool = False


def _symplectic_pairing(p1: Profile, p2: Profile, r):
    """r (f1 g2 - g1 f2) and the magnitude r (|f1 g2| + |g1 f2|) of its terms."""
    f1, g1 = p1.values(r)
    f2, g2 = p2.values(r)
    return r * np.sum(f1 * g2 - g1 * f2, axis=1), r * np.sum(np.abs(f1 * g2) + np.abs(g1 * f2), axis=1)


def fundamental_system(lam, mu, kappa, fiber_dim=1, mesh=None, check=True) -> FundamentalSystem:
    """Fundamental solutions of M phi = kappa phi on (0, 1], per fiber index."""
    d = int(fiber_dim)
    mode = ModeIndex(lam, mu, d)
    eye = np.eye(d)
    if lam < -0.5:
        conj = fundamental_system(-(lam + 1.0), -mu, kappa, d, mesh, check)
        wrap = lambda s: RadialSection.from_profile(ConjugatedProfile(mode, s.profile), s.mesh)
        return FundamentalSystem([wrap(s) for s in conj.admissible], [wrap(s) for s in conj.singular], conj.degenerate)
    if lam == -0.5:
        basis = np.eye(2 * d)
        profiles = [ResidualEigenProfile(mu, kappa, basis[:, j]) for j in range(2 * d)]
        singular = []
    else:
        profiles = [RegularEigenProfile(lam, mu, kappa, eye[:, j]) for j in range(d)]
        singular = [SingularEigenProfile(lam, mu, kappa, eye[:, j]) for j in range(d)]
    degenerate = abs(kappa * kappa - mu * mu) < OMEGA_THRESHOLD
    if check:
        # the symplectic pairing of two solutions is independent of r
        pair = (profiles[0], profiles[d]) if lam == -0.5 else (profiles[0], singular[0])
        rs = np.array([1e-3, 0.1, 0.5, 1.0])
        w, size = _symplectic_pairing(*pair, rs)
        if np.max(np.abs(w - w[-1])) > 1e-10 * max(1.0, np.max(size)):
            raise InternalError(f"Wronskian check failed for mode {mode.label()} at kappa={kappa}")
    mesh = mesh or default_mesh()
    return FundamentalSystem(
        [RadialSection.from_profile(p, mesh) for p in profiles],
        [RadialSection.from_profile(p, mesh) for p in singular],
        degenerate and lam == -0.5,
    )


def apply_mode_operator(mode: ModeIndex, phi: RadialSection) -> RadialSection:
    """M applied to sampled data by per-panel spectral differentiation.

    Uses (d/dr - lam/r) f = r^lam d/dr (r^{-lam} f) and the analogous form for g,
    which avoids cancellation against the r^{-1/2} leading terms.
    """
    mesh = phi.mesh
    if mesh.p < 4:
        raise MeshTooCoarse("need at least 4 points per panel")
    r = mesh.r[:, None]
    lam, mu = mode.lam, mode.mu
    Ff = r**lam * mesh.diff(r ** (-lam) * phi.f)
    Gg = r ** (-(lam + 1.0)) * mesh.diff(r ** (lam + 1.0) * phi.g)
    return RadialSection(mode, mesh, mu * phi.f - Gg, Ff - mu * phi.g)


@dataclass(frozen=True)
class LeadingTerm:
    case: str
    a: float


def _as_samples(phi, mesh):
    if callable(phi):
        return np.asarray(phi(mesh.r), dtype=float)
    return np.asarray(phi)


def _l2_converges(vals, mesh, floor=0.0):
    """Quadrature of |vals|^2 r dr is finite and not dominated by the smallest decade.

    Contributions below ``floor`` count as rounding noise.
    """
    dens = np.abs(vals) ** 2
    if dens.ndim > 1:
        dens = dens.reshape(dens.shape[0], -1).sum(axis=1)
    dens = dens * mesh.r * mesh.w
    total = np.sum(dens)
    if not np.isfinite(total):
        return False
    head = np.sum(dens[mesh.r <= 10.0 * mesh.r_min])
    return head <= 1e-2 * max(total, 1e-300) + floor


def leading_coefficient(lam, phi, mesh=None) -> LeadingTerm:
    """Classify the r -> 0 behaviour of a scalar phi with phi, (d/dr - lam/r) phi in L^2(r dr)."""
    mesh = mesh or default_mesh()
    vals = _as_samples(phi, mesh)
    r = mesh.r
    dphi = r**lam * mesh.diff(r ** (-lam) * vals)
    size = float(np.sum(np.abs(vals) ** 2 * r * mesh.w))
    if not (_l2_converges(vals, mesh) and _l2_converges(dphi, mesh, 1e-12 * size)):
        raise NotInDomain("phi or (d/dr - lam/r) phi is not square integrable near 0")
    win = mesh.window(mesh.r_min, 10.0 * mesh.r_min)
    rw, vw = r[win], vals[win]
    if -1.0 < lam < 0.0:
        # weighted least squares for phi r^{-lam} = a + b r
        A = np.column_stack([np.ones_like(rw), rw])
        coef, *_ = np.linalg.lstsq(A, vw * rw ** (-lam), rcond=None)
        return LeadingTerm("power", float(coef[0]))
    if lam == 0.0:
        c = np.max(np.abs(vw) / np.sqrt(np.abs(np.log(rw))))
        return LeadingTerm("log-bounded", float(c))
    return LeadingTerm("vanishing", 0.0)


def inhomogeneous_solve(lam, psi, branch=None, mesh=None):
    """Particular solution of (d/dr - lam/r) phi = psi on the mesh nodes.

    branch "from-zero": phi = r^lam int_0^r s^{-lam} psi ds (default for lam < 0);
    branch "from-one":  phi = -r^lam int_r^1 s^{-lam} psi ds (default for lam >= 0).
    """
    mesh = mesh or default_mesh()
    if branch is None:
        branch = "from-zero" if lam < 0 else "from-one"
    r = mesh.r
    vals = _as_samples(psi, mesh)
    integrand = r ** (-lam) * vals
    cum = mesh.cumulative(integrand)
    if branch == "from-zero":
        if callable(psi):
            x, w = np.polynomial.legendre.leggauss(32)
            s = 0.5 * mesh.r_min * (x + 1.0)
            head = 0.5 * mesh.r_min * np.sum(w * s ** (-lam) * np.asarray(psi(s), dtype=float))
        else:
            head = 0.0
        return r**lam * (cum + head)
    if branch == "from-one":
        total = mesh.integrate(integrand)
        return -(r**lam) * (total - cum)
    raise ValueError(f"unknown branch {branch!r}")


# ---------------------------------------------------------------- finite-difference oracle


def _j_eigenbases(d):
    eye = np.eye(d)
    Ep = np.vstack([eye, -1j * eye]) / np.sqrt(2.0)
    Em = np.vstack([eye, 1j * eye]) / np.sqrt(2.0)
    return Ep, Em


def lagrangian_unitary(Q):
    """U with span(Q) = {e_+ p + e_- U p}, e_+- the +-i eigenvectors of J."""
    Q = np.asarray(Q, dtype=complex)
    d = Q.shape[0] // 2
    if Q.shape[1] != d:
        raise ConvergenceError("boundary subspace must have dimension d (ill-posed request)")
    Ep, Em = _j_eigenbases(d)
    P = Ep.conj().T @ Q
    N = Em.conj().T @ Q
    if np.linalg.norm(Q.conj().T @ convention_J(d) @ Q) > 1e-8:
        raise ConvergenceError("boundary subspace is not Lagrangian (ill-posed request)")
    return N @ np.linalg.inv(P)


def _gauge(U):
    d = U.shape[0]
    Ep, Em = _j_eigenbases(d)
    return Ep @ Ep.conj().T + Em @ U @ Em.conj().T


def _staggered_matrix(mode, inner, outer_basis, N):
    d = outer_basis.shape[0] // 2
    lam, mu = mode.lam, mode.mu
    nu = lam + 0.5
    h = 1.0 / N
    sz = np.diag([1.0, -1.0])
    sx = np.array([[0.0, 1.0], [1.0, 0.0]])
    U1 = lagrangian_unitary(outer_basis)
    if lam != -0.5:
        # v = 0 at the origin removes the singular branch v ~ x^{-nu}
        inner = slot_basis(d, "f")
    U0 = lagrangian_unitary(inner)
    G0 = _gauge(U0)
    _, Em = _j_eigenbases(d)
    L = scipy.linalg.logm(U0.conj().T @ U1)
    H = Em @ L @ Em.conj().T
    J = convention_J(d)
    JH = J @ H

    # H is skew-Hermitian, so exp(x H) = V diag(exp(x theta)) V^H
    theta, V = np.linalg.eigh(-1j * H)

    def coeff(x):
        x = np.atleast_1d(x)
        phases = np.exp(1j * np.outer(x, theta))
        G = np.einsum("ij,xj,kj->xik", V, phases, V.conj())
        G = np.einsum("ij,xjk->xik", G0, G)
        B = np.kron(mu * sz, np.eye(d))[None] - (nu / x)[:, None, None] * np.kron(sx, np.eye(d))[None]
        C = JH[None] + np.einsum("xji,xjk,xkl->xil", G.conj(), B, G)
        return 0.5 * (C + np.conj(np.transpose(C, (0, 2, 1))))

    xh = (np.arange(N) + 0.5) * h
    xi = np.arange(1, N) * h
    Ch = coeff(xh)
    Ci = coeff(xi)
    nu_, nv = N * d, (N - 1) * d
    rows, cols, vals = [], [], []

    def add(rr, cc, vv):
        rows.append(rr)
        cols.append(cc)
        vals.append(vv)

    # diagonal blocks
    for j in range(N):
        blk = Ch[j][:d, :d]
        ii, jj = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
        add((j * d + ii).ravel(), (j * d + jj).ravel(), blk.ravel())
    for j in range(N - 1):
        blk = Ci[j][d:, d:]
        ii, jj = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
        add((nu_ + j * d + ii).ravel(), (nu_ + j * d + jj).ravel(), blk.ravel())
    # u row at half node j couples v at integer nodes j and j+1 (interior only)
    ii, jj = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    for j in range(N):
        cuv = Ch[j][:d, d:]
        for node, sgn in ((j, 1.0), (j + 1, -1.0)):
            if 1 <= node <= N - 1:
                blk = 0.5 * cuv + (sgn / h) * np.eye(d)
                r_idx = (j * d + ii).ravel()
                c_idx = (nu_ + (node - 1) * d + jj).ravel()
                add(r_idx, c_idx, blk.ravel())
                add(c_idx, r_idx, blk.conj().ravel())
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    A = scipy.sparse.csc_matrix((vals, (rows, cols)), shape=(nu_ + nv, nu_ + nv))
    return A


def _smallest(A, count):
    k = min(count + 6, A.shape[0] - 2)
    sigma = 1.37e-3
    w = scipy.sparse.linalg.eigsh(A, k=k, sigma=sigma, which="LM", return_eigenvectors=False)
    w = np.real(w)
    w = w[np.argsort(np.abs(w))][:count]
    return np.sort(w)


def fd_eigen_oracle(mode: ModeIndex, inner, outer: OuterBoundaryCondition, n_points=4096, count=10, tol=1e-6):
    """Eigenvalues of smallest magnitude of an independent staggered-grid discretisation.

    The section is written as r^{-1/2}(u, v); a J-commuting unitary gauge maps the
    inner and outer Lagrangian conditions to v = 0, and u, v live on staggered
    nodes.  The result is Richardson-extrapolated from n_points and 2 n_points
    cells; ConvergenceError if the two runs differ by more than 100 tol.
    """
    if n_points < 256:
        raise ValueError("n_points must be at least 256")
    if outer is None:
        raise ConvergenceError("no outer condition: the eigenvalue problem is not discrete")
    Wb = np.asarray(outer.basis)
    if mode.lam == -0.5:
        if inner is None:
            raise ConvergenceError("an inner condition is required for lam = -1/2")
        inner = np.asarray(inner)
    elif mode.lam < -0.5:
        raise ValueError("use the representative mode with lam >= -1/2")
    coarse = _smallest(_staggered_matrix(mode, inner, Wb, n_points), count)
    fine = _smallest(_staggered_matrix(mode, inner, Wb, 2 * n_points), count)
    scale = np.maximum(1.0, np.abs(fine))
    if np.max(np.abs(fine - coarse) / scale) > 100.0 * tol:
        raise ConvergenceError(
            f"oracle not converged for mode {mode.label()}: max change {np.max(np.abs(fine - coarse)):.3e}"
        )
    return list((4.0 * fine - coarse) / 3.0)
