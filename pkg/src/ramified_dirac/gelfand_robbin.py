"""Residues, extensions and the boundary symplectic form of the model operator.

Only the lam = -1/2 modes have sections whose leading term r^{-1/2} survives in
the quotient dom(M_max)/dom(M_min).  The coefficient of r^{-1/2} is the residue;
``extend`` is the closed-form right inverse.  A residue on the whole branching
circle is a ``ResidueVector``: a vector of C^{2d} for each mu >= 0.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NotInDomain
from .mesh import GradedMesh
from .model_config import ModeIndex, bracket, convention_J
from .radial import ExtensionProfile, RadialSection, _l2_converges, default_mesh

TWO_PI = 2.0 * np.pi
FIT_TOL = 1e-4


# ---------------------------------------------------------------- residue vectors


@dataclass
class ResidueVector:
    """Residue data keyed by mu; each entry has f-slot block then g-slot block."""

    d: int = 1
    entries: dict = field(default_factory=dict)

    @classmethod
    def single(cls, mu, v):
        v = np.asarray(v, dtype=complex)
        return cls(v.size // 2, {float(mu): v})

    def __getitem__(self, mu):
        return self.entries.get(float(mu), np.zeros(2 * self.d, dtype=complex))

    def __setitem__(self, mu, v):
        v = np.asarray(v, dtype=complex)
        if v.size != 2 * self.d:
            raise DomainError(f"residue at mu={mu} must have length {2 * self.d}")
        self.entries[float(mu)] = v

    def modes(self):
        return sorted(self.entries)

    def _combine(self, other, a, b):
        out = ResidueVector(self.d)
        for mu in set(self.entries) | set(other.entries):
            out[mu] = a * self[mu] + b * other[mu]
        return out

    def __add__(self, other):
        return self._combine(other, 1.0, 1.0)

    def __sub__(self, other):
        return self._combine(other, 1.0, -1.0)

    def __rmul__(self, c):
        return ResidueVector(self.d, {mu: c * v for mu, v in self.entries.items()})

    def apply_J(self):
        J = convention_J(self.d)
        return ResidueVector(self.d, {mu: J @ v for mu, v in self.entries.items()})

    def to_rows(self):
        rows = []
        for mu in self.modes():
            v = self.entries[mu]
            for slot, block in (("f", v[: self.d]), ("g", v[self.d:])):
                for k, x in enumerate(block):
                    rows.append((mu, slot, k, complex(x)))
        return rows

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["mu", "slot", "fiber_index", "value"])
        for mu, slot, k, x in self.to_rows():
            val = f"{x.real:.17g}" if x.imag == 0 else f"{x.real:.17g}{x.imag:+.17g}j"
            w.writerow([f"{mu:.17g}", slot, k, val])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        rows = list(csv.DictReader(io.StringIO(text)))
        d = 1 + max(int(r["fiber_index"]) for r in rows) if rows else 1
        out = cls(d)
        for r in rows:
            mu = float(r["mu"])
            v = out.entries.setdefault(mu, np.zeros(2 * d, dtype=complex))
            k = int(r["fiber_index"]) + (0 if r["slot"] == "f" else d)
            v[k] = complex(r["value"])
        return out

    def allclose(self, other, tol=1e-12):
        keys = set(self.entries) | set(other.entries)
        return all(np.linalg.norm(self[mu] - other[mu]) <= tol for mu in keys)


# ---------------------------------------------------------------- residue / extension


def _fit_residue(values, mesh: GradedMesh):
    """Least-squares fit of a r^{-1/2} + b r^{1/2} on the smallest mesh decade."""
    win = mesh.window(mesh.r_min, 10.0 * mesh.r_min)
    r = mesh.r[win]
    sw = np.sqrt(mesh.w[win] * r)
    A = np.column_stack([r**-0.5, r**0.5]) * sw[:, None]
    y = values[win] * sw[:, None]
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = np.linalg.norm(A @ coef - y)
    local = np.linalg.norm(y)
    if local > 0 and resid > FIT_TOL * local:
        raise NotInDomain(f"leading-term fit residual {resid / local:.2e} exceeds {FIT_TOL:g}")
    return coef[0]


def residue(phi: RadialSection, mode: ModeIndex | None = None):
    """Coefficient pair of the r^{-1/2} leading terms of (f, g).

    Exact for closed-form sections; otherwise a two-term fit on the smallest
    decade of the mesh.  Modes other than lam = -1/2 have zero residue.
    """
    mode = mode or phi.mode
    d = phi.d
    if mode.lam != -0.5:
        return np.zeros(2 * d, dtype=complex)
    if phi.profile is not None:
        return np.asarray(phi.profile.residue(), dtype=complex)
    mesh = phi.mesh
    stacked = phi.stacked()
    img = phi.image().stacked()
    if not (_l2_converges(stacked, mesh) and _l2_converges(img, mesh)):
        raise NotInDomain("phi or M phi is not square integrable near 0")
    return np.asarray(_fit_residue(stacked, mesh), dtype=complex)


def extend(v, mu, mesh: GradedMesh | None = None) -> RadialSection:
    """chi(r) r^{-1/2} e^{-|mu| r} v as a closed-form section of the mode (-1/2, mu)."""
    return RadialSection.from_profile(ExtensionProfile(float(mu), np.asarray(v)), mesh or default_mesh())


def residue_vector(sections) -> ResidueVector:
    """Assemble a ResidueVector from a mapping mu -> section."""
    out = None
    for mu, phi in sections.items():
        if out is None:
            out = ResidueVector(phi.d)
        out[mu] = residue(phi)
    return out if out is not None else ResidueVector()


# ---------------------------------------------------------------- Green's form


def greens_form_quadrature(phi: RadialSection, psi: RadialSection):
    """<M phi, psi> - <phi, M psi> by graded-mesh quadrature."""
    if phi.mode.lam != psi.mode.lam or phi.mode.mu != psi.mode.mu:
        raise DomainError("Green's form needs two sections of the same mode")
    mesh = phi.mesh
    a, b = phi.stacked(), psi.stacked()
    ma, mb = phi.image().stacked(), psi.image().stacked()
    for arr in (a, b, ma, mb):
        if not _l2_converges(arr, mesh):
            raise NotInDomain("section or its image is not square integrable")
    val = mesh.inner(ma, b) - mesh.inner(a, mb)
    return float(val.real) if abs(val.imag) <= 1e-14 * max(1.0, abs(val)) else complex(val)


def greens_form_residue(v, w):
    """-<J v, w> for a single mode; -2 pi sum_mu <J v_mu, w_mu> for ResidueVectors."""
    if isinstance(v, ResidueVector):
        total = sum(greens_form_residue(v[mu], w[mu]) for mu in set(v.entries) | set(w.entries))
        return TWO_PI * total
    v = np.asarray(v)
    w = np.asarray(w)
    J = convention_J(v.size // 2)
    val = -np.vdot(J @ v, w)
    return float(val.real) if abs(val.imag) <= 1e-15 * max(1.0, abs(val)) else complex(val)


# ---------------------------------------------------------------- branching operator


class BranchingOperator:
    """A_mu = [[0, -mu], [-mu, 0]] per fiber block, with exact spectral projectors."""

    def __init__(self, d=1):
        self.d = d

    def matrix(self, mu):
        return np.kron(np.array([[0.0, -mu], [-mu, 0.0]]), np.eye(self.d))

    def eigendata(self, mu):
        """[(eigenvalue, orthonormal eigenbasis)] with eigenvalues -|mu|, +|mu| (or 0)."""
        if mu == 0:
            return [(0.0, np.eye(2 * self.d))]
        s = np.sign(mu)
        neg = np.kron(np.array([[1.0], [s]]) / np.sqrt(2.0), np.eye(self.d))
        pos = np.kron(np.array([[1.0], [-s]]) / np.sqrt(2.0), np.eye(self.d))
        return [(-abs(mu), neg), (abs(mu), pos)]

    def negative_projector(self, mu):
        if mu == 0:
            return np.zeros((2 * self.d, 2 * self.d))
        _, Q = self.eigendata(mu)[0]
        return Q @ Q.T

    def nonnegative_projector(self, mu):
        return np.eye(2 * self.d) - self.negative_projector(mu)

    def positive_projector(self, mu):
        if mu == 0:
            return np.zeros((2 * self.d, 2 * self.d))
        _, Q = self.eigendata(mu)[1]
        return Q @ Q.T


def branching_apply(v: ResidueVector) -> ResidueVector:
    A = BranchingOperator(v.d)
    return ResidueVector(v.d, {mu: A.matrix(mu) @ x for mu, x in v.entries.items()})


def _as_residue_vector(v, mu):
    if isinstance(v, ResidueVector):
        return v
    return ResidueVector.single(mu, v)


def check_norm(v, mu=None):
    """(sum_mu (1+|mu|)|P_- v_mu|^2 + (1+|mu|)^{-1}|P_{>=0} v_mu|^2)^{1/2}."""
    v = _as_residue_vector(v, mu)
    A = BranchingOperator(v.d)
    total = 0.0
    for m, x in v.entries.items():
        neg = A.negative_projector(m) @ x
        rest = x - neg
        wgt = 1.0 + abs(m)
        total += wgt * np.vdot(neg, neg).real + np.vdot(rest, rest).real / wgt
    return float(np.sqrt(total))


def sobolev_norm(v, s, mu=None):
    """(sum_mu <mu>^{2s} |v_mu|^2)^{1/2}."""
    v = _as_residue_vector(v, mu)
    total = sum(bracket(m) ** (2.0 * s) * np.vdot(x, x).real for m, x in v.entries.items())
    return float(np.sqrt(total))
