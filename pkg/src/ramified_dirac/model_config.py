"""Flat model geometry: branching circle times unit disk, modes and base spectrum.

Modes are pairs (lam, mu) with lam a half-integer (angular eigenvalue) and mu an
eigenvalue of the twisted circle Dirac operator.  The pair (lam, mu) and its
conjugate (-(lam+1), -mu) describe the same two-component radial problem, so
only one representative of each pair is enumerated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidConfig

TWO_PI = 2.0 * math.pi


def bracket(x):
    """Japanese bracket (1 + x^2)^(1/2)."""
    return np.sqrt(1.0 + np.square(x))


def is_half_integer(x, tol=1e-12):
    y = 2.0 * float(x)
    return abs(y - round(y)) <= tol and int(round(y)) % 2 != 0


def convention_J(d):
    """Matrix of J(f, g) = (-g, f) on the (f-slot, g-slot) coordinates."""
    eye = np.eye(d)
    zero = np.zeros((d, d))
    return np.block([[zero, -eye], [eye, zero]])


def slot_basis(d, slot):
    """Orthonormal basis of the f-slot or g-slot block of C^{2d}."""
    Q = np.zeros((2 * d, d))
    offset = 0 if slot == "f" else d
    Q[offset:offset + d, :] = np.eye(d)
    return Q


@dataclass(frozen=True)
class OuterBoundaryCondition:
    """Lagrangian subspace W of boundary values at r = 1; phi(1) must lie in W."""

    kind: str
    basis: np.ndarray = field(repr=False)

    @property
    def fiber_dim(self):
        return self.basis.shape[0] // 2

    @property
    def annihilator(self):
        """Orthonormal basis of the orthogonal complement of W."""
        d = self.fiber_dim
        P = np.eye(2 * d) - self.basis @ self.basis.conj().T
        u, s, _ = np.linalg.svd(P)
        return u[:, :d]

    def check(self, tol=1e-12):
        Q = np.asarray(self.basis)
        n, k = Q.shape
        if n % 2 or k != n // 2:
            raise InvalidConfig(f"outer subspace must be {n // 2}-dimensional in C^{n}")
        if np.linalg.norm(Q.conj().T @ Q - np.eye(k)) > tol:
            raise InvalidConfig("outer subspace basis is not orthonormal")
        if np.linalg.norm(Q.conj().T @ convention_J(k) @ Q) > tol:
            raise InvalidConfig("outer subspace is not Lagrangian for <Jw, w'>")
        return self


def outer_type1(d=1):
    """f(1) = 0: boundary values lie in the g-slot."""
    return OuterBoundaryCondition("TypeI", slot_basis(d, "g"))


def outer_type2(d=1):
    """g(1) = 0: boundary values lie in the f-slot."""
    return OuterBoundaryCondition("TypeII", slot_basis(d, "f"))


def outer_custom(vectors):
    Q = np.atleast_2d(np.asarray(vectors))
    if Q.shape[0] < Q.shape[1]:
        Q = Q.T
    q, _ = np.linalg.qr(Q)
    if np.isrealobj(q):
        q = q.astype(float)
    return OuterBoundaryCondition("Custom", q).check(1e-10)


@dataclass(frozen=True)
class Quadrature:
    r_min: float = 1e-12
    points_per_panel: int = 16
    panel_ratio: float = 2.0
    max_panel_width: float = 1.0 / 32.0


@dataclass(frozen=True)
class Tolerances:
    root: float = 1e-12
    quad: float = 1e-10
    fit: float = 1e-4
    oracle: float = 1e-6


@dataclass(frozen=True)
class ModelConfig:
    base_length: float = TWO_PI
    holonomy_h0: float = 0.0
    holonomy_h1: float = 0.0
    fiber_dim: int = 1
    lambda_cut: float = 4.5
    mu_cut: float = 8.0
    outer_bc: OuterBoundaryCondition | None = None
    quadrature: Quadrature = Quadrature()
    tol: Tolerances = Tolerances()

    def __post_init__(self):
        if self.outer_bc is None:
            d = self.fiber_dim if isinstance(self.fiber_dim, int) and self.fiber_dim > 0 else 1
            object.__setattr__(self, "outer_bc", outer_type1(d))

    @property
    def outer(self):
        return self.outer_bc

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True, order=True)
class ModeIndex:
    lam: float
    mu: float
    mult: int = 1
    self_conjugate: bool = False

    def __post_init__(self):
        if not is_half_integer(self.lam):
            raise InvalidConfig(f"lambda = {self.lam} is not a half-integer")

    @property
    def is_residual(self):
        """True for the lam = -1/2 modes, the only ones carrying residues."""
        return self.lam == -0.5

    def label(self):
        return f"({self.lam:g},{self.mu:g})"


def validate_config(cfg: ModelConfig) -> ModelConfig:
    checks = [
        (cfg.base_length > 0 and math.isfinite(cfg.base_length), "base_length > 0"),
        (0.0 <= cfg.holonomy_h0 < 1.0, "holonomy_h0 in [0,1)"),
        (0.0 <= cfg.holonomy_h1 < 1.0, "holonomy_h1 in [0,1)"),
        (isinstance(cfg.fiber_dim, (int, np.integer)) and cfg.fiber_dim >= 1, "fiber_dim >= 1"),
        (is_half_integer(cfg.lambda_cut) and cfg.lambda_cut > 0, "lambda_cut is a positive half-integer"),
        (cfg.mu_cut >= 0 and math.isfinite(cfg.mu_cut), "mu_cut >= 0"),
        (0.0 < cfg.quadrature.r_min <= 1e-6, "r_min in (0, 1e-6]"),
        (cfg.quadrature.points_per_panel >= 4, "points_per_panel >= 4"),
        (cfg.quadrature.panel_ratio > 1.0, "panel_ratio > 1"),
        (0.0 < cfg.quadrature.max_panel_width <= 1.0, "max_panel_width in (0, 1]"),
        (min(cfg.tol.root, cfg.tol.quad, cfg.tol.fit, cfg.tol.oracle) > 0, "tolerances > 0"),
    ]
    for ok, name in checks:
        if not ok:
            raise InvalidConfig(f"invariant violated: {name}")
    # conjugation (lam, mu) -> (-(lam+1), -mu) must preserve the spectrum,
    # which for the linear family below means 2*h0 - h1 is an integer
    shift = 2.0 * cfg.holonomy_h0 - cfg.holonomy_h1
    if abs(shift - round(shift)) > 1e-12:
        raise InvalidConfig("invariant violated: 2*holonomy_h0 - holonomy_h1 must be an integer")
    if cfg.outer_bc.fiber_dim != cfg.fiber_dim:
        raise InvalidConfig("invariant violated: outer condition dimension matches fiber_dim")
    try:
        cfg.outer_bc.check()
    except InvalidConfig as exc:
        raise InvalidConfig(f"invariant violated: {exc}") from None
    return cfg


def base_spectrum(cfg: ModelConfig, lam: float):
    """Eigenvalues mu = (2 pi / L)(m + h0 + lam*h1) with |mu| <= mu_cut, sorted."""
    if not is_half_integer(lam):
        raise InvalidConfig(f"lambda = {lam} is not a half-integer")
    if abs(lam) > cfg.lambda_cut + 1.0:
        raise InvalidConfig(f"|lambda| = {abs(lam)} exceeds the cutoff")
    c = TWO_PI / cfg.base_length
    s = cfg.holonomy_h0 + lam * cfg.holonomy_h1
    s -= math.floor(s)
    eps = 1e-12 * max(1.0, cfg.mu_cut)
    lo = math.ceil((-cfg.mu_cut - eps) / c - s)
    hi = math.floor((cfg.mu_cut + eps) / c - s)
    out = []
    for m in range(lo, hi + 1):
        mu = c * (m + s)
        if abs(mu) < 1e-14:
            mu = 0.0
        if abs(mu) <= cfg.mu_cut + eps:
            out.append((mu, cfg.fiber_dim))
    return out


def conjugate_mode(m: ModeIndex) -> ModeIndex:
    mu = -m.mu if m.mu != 0 else 0.0
    return ModeIndex(-(m.lam + 1.0), mu, m.mult, m.self_conjugate)


def lambda_values(cfg: ModelConfig):
    n = int(round(cfg.lambda_cut + 0.5))
    return [k - 0.5 for k in range(0, n + 1) if k - 0.5 <= cfg.lambda_cut]


def enumerate_modes(cfg: ModelConfig):
    """One representative per conjugate pair, lam >= -1/2 and mu >= 0 at lam = -1/2."""
    validate_config(cfg)
    modes = []
    for lam in lambda_values(cfg):
        for mu, mult in base_spectrum(cfg, lam):
            if lam == -0.5 and mu < 0:
                continue
            modes.append(ModeIndex(lam, mu, mult, lam == -0.5 and mu == 0.0))
    return modes


def residual_modes(cfg: ModelConfig):
    return [m for m in enumerate_modes(cfg) if m.is_residual]
