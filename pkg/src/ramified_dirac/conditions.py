"""Residue conditions: per-mode subspaces of the residue space C^{2d}.

A condition assigns to every residual mode mu >= 0 a subspace of C^{2d}
(f-slot block then g-slot block), stored as an orthonormal basis matrix.
The symplectic form on residues is -<J v, w>; the symplectic complement of a
subspace R is (J R)^perp = J (R^perp).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NotEpsInvariant, TailNotTransverse
from .gelfand_robbin import BranchingOperator
from .model_config import ModelConfig, convention_J, residual_modes

SUBSPACE_TOL = 1e-10
RANK_TOL = 1e-8


# ---------------------------------------------------------------- subspace helpers


def orth(Q, tol=RANK_TOL):
    """Orthonormal basis of the column span of Q (possibly empty)."""
    Q = np.asarray(Q)
    if Q.size == 0 or Q.shape[1] == 0:
        return np.zeros((Q.shape[0], 0), dtype=Q.dtype if Q.size else float)
    u, s, _ = np.linalg.svd(Q, full_matrices=False)
    rank = int(np.sum(s > tol * max(1.0, s[0])))
    return u[:, :rank]


def perp(Q):
    """Orthonormal basis of the orthogonal complement of span(Q)."""
    n = Q.shape[0]
    if Q.shape[1] == 0:
        return np.eye(n)
    return scipy.linalg.null_space(Q.conj().T, rcond=RANK_TOL)


def projector(Q):
    return Q @ Q.conj().T


def same_subspace(Q1, Q2, tol=SUBSPACE_TOL):
    return Q1.shape[1] == Q2.shape[1] and np.linalg.norm(projector(Q1) - projector(Q2), 2) <= tol


def intersect(Q1, Q2):
    """Orthonormal basis of span(Q1) cap span(Q2)."""
    if Q1.shape[1] == 0 or Q2.shape[1] == 0:
        return np.zeros((Q1.shape[0], 0))
    N = scipy.linalg.null_space(np.hstack([Q1, -Q2]), rcond=RANK_TOL)
    return orth(Q1 @ N[: Q1.shape[1]])


def span_sum(Q1, Q2):
    return orth(np.hstack([Q1, Q2]))


def symplectic_complement_matrix(Q):
    d = Q.shape[0] // 2
    return orth(convention_J(d) @ perp(Q))


def _normalize(V, d):
    V = np.asarray(V)
    if V.ndim == 1:
        V = V[:, None]
    if V.shape[0] != 2 * d and V.shape[1] == 2 * d:
        V = V.T
    if V.shape[0] != 2 * d:
        raise DimensionMismatch(f"subspace vectors must have length {2 * d}")
    return orth(V)


# ---------------------------------------------------------------- conditions


@dataclass
class ResidueCondition:
    """Subspace rule mu -> orthonormal basis, with optional per-mode overrides."""

    kind: str
    d: int
    rule: Callable = field(repr=False)
    overrides: dict = field(default_factory=dict, repr=False)
    regularity: float | None = None

    def subspace(self, mu):
        mu = float(mu)
        if mu in self.overrides:
            return self.overrides[mu]
        return self.rule(mu)

    def per_mode(self, mus):
        return {float(mu): self.subspace(mu) for mu in mus}

    def with_override(self, mu, Q, kind=None):
        over = dict(self.overrides)
        over[float(mu)] = _normalize(Q, self.d) if np.asarray(Q).size else np.zeros((2 * self.d, 0))
        return ResidueCondition(kind or self.kind, self.d, self.rule, over, self.regularity)

    def to_csv(self, mus):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["mu", "column", "component", "value"])
        for mu in mus:
            Q = self.subspace(mu)
            for j in range(Q.shape[1]):
                for i in range(Q.shape[0]):
                    x = complex(Q[i, j])
                    val = f"{x.real:.17g}" if x.imag == 0 else f"{x.real:.17g}{x.imag:+.17g}j"
                    w.writerow([f"{float(mu):.17g}", j, i, val])
        return buf.getvalue()


def _fiber_dim(cfg_or_d):
    return cfg_or_d.fiber_dim if isinstance(cfg_or_d, ModelConfig) else int(cfg_or_d)


def make_minimal(d=1):
    d = _fiber_dim(d)
    return ResidueCondition("Minimal", d, lambda mu: np.zeros((2 * d, 0)))


def make_maximal(d=1):
    d = _fiber_dim(d)
    return ResidueCondition("Maximal", d, lambda mu: np.eye(2 * d))


def make_aps(cfg=1, kernel=None):
    """Negative eigenspace of A_mu; on ker A (mu = 0) optionally a chosen subspace."""
    d = _fiber_dim(cfg)
    A = BranchingOperator(d)
    L = _normalize(kernel, d) if kernel is not None else np.zeros((2 * d, 0))

    def rule(mu):
        if mu == 0:
            return L
        return A.eigendata(mu)[0][1]

    kind = "APS" if kernel is None else "APS+L"
    return ResidueCondition(kind, d, rule, regularity=np.inf)


def bag_fiber(sign, d=1):
    """ker(1 -/+ i J): for sign +1 the vectors (a, i a)."""
    s = 1.0 if sign in (1, "+", "plus") else -1.0
    return np.kron(np.array([[1.0], [s * 1j]]) / np.sqrt(2.0), np.eye(d))


def make_bag(sign, d=1):
    d = _fiber_dim(d)
    Q = bag_fiber(sign, d)
    s = 1 if sign in (1, "+", "plus") else -1
    return ResidueCondition("BagPlus" if s > 0 else "BagMinus", d, lambda mu: Q)


def make_local(V, d=1, kind="LocalSubspace"):
    d = _fiber_dim(d)
    Q = _normalize(V, d) if np.asarray(V).size else np.zeros((2 * d, 0))
    reg = np.inf if symbol_regularity_check(Q) else None
    return ResidueCondition(kind, d, lambda mu: Q, regularity=reg)


def make_custom(per_mode, d=1, default=None):
    d = _fiber_dim(d)
    base = make_maximal(d).rule if default is None else (lambda mu: _normalize(default, d))
    over = {float(mu): _normalize(Q, d) for mu, Q in per_mode.items()}
    return ResidueCondition("Custom", d, base, over)


def symplectic_complement(R: ResidueCondition) -> ResidueCondition:
    over = {mu: symplectic_complement_matrix(Q) for mu, Q in R.overrides.items()}
    kind = {"Minimal": "Maximal", "Maximal": "Minimal", "BagPlus": "BagMinus", "BagMinus": "BagPlus"}.get(
        R.kind, R.kind + "^G"
    )
    return ResidueCondition(kind, R.d, lambda mu: symplectic_complement_matrix(R.rule(mu)), over, R.regularity)


def mode_keys(cfg_or_mus):
    if isinstance(cfg_or_mus, ModelConfig):
        return [m.mu for m in residual_modes(cfg_or_mus)]
    return [float(m) for m in cfg_or_mus]


def is_lagrangian(R: ResidueCondition, mus=(0.0, 1.0)) -> bool:
    for mu in mode_keys(mus):
        Q = R.subspace(mu)
        if Q.shape[1] != R.d:
            return False
        if not same_subspace(Q, symplectic_complement_matrix(Q)):
            return False
    return True


def equal_conditions(R1, R2, mus=(0.0, 1.0)) -> bool:
    return all(same_subspace(R1.subspace(mu), R2.subspace(mu)) for mu in mode_keys(mus))


def clifford_base(d=1):
    """Clifford action of the unit base covector on residues: K = I J = i sigma_z."""
    return np.kron(np.diag([1j, -1j]), np.eye(d))


def symbol_regularity_check(V, xi=1.0, tol=1e-10) -> bool:
    """True iff gamma(xi) V is orthogonal to J V."""
    V = np.asarray(V)
    if V.ndim == 1:
        V = V[:, None]
    if V.shape[1] == 0:
        return True
    d = V.shape[0] // 2
    V = orth(V)
    K = np.sign(xi) * clifford_base(d)
    J = convention_J(d)
    return bool(np.linalg.norm((J @ V).conj().T @ (K @ V)) <= tol)


# ---------------------------------------------------------------- chirality


@dataclass(frozen=True)
class ChiralityOperator:
    eps: np.ndarray

    @classmethod
    def default(cls, d=1):
        """sigma_x per fiber block: anticommutes with J, commutes with A and with I."""
        return cls(np.kron(np.array([[0.0, 1.0], [1.0, 0.0]]), np.eye(d)))

    @property
    def d(self):
        return self.eps.shape[0] // 2

    def check(self, tol=1e-12):
        e = self.eps
        J = convention_J(self.d)
        ok = (
            np.linalg.norm(e @ e - np.eye(e.shape[0])) <= tol
            and np.linalg.norm(e - e.T) <= tol
            and np.linalg.norm(e @ J + J @ e) <= tol
        )
        if not ok:
            raise NotEpsInvariant("chirality operator must be a symmetric involution anticommuting with J")
        return self

    def eigenspace(self, sign):
        w, V = np.linalg.eigh(self.eps)
        return orth(V[:, (w > 0) if sign > 0 else (w < 0)])


def chirality_split(R: ResidueCondition, eps: ChiralityOperator, mus):
    """(R cap H^+, R cap H^-) for an eps-invariant condition."""
    Hp, Hm = eps.eigenspace(+1), eps.eigenspace(-1)
    plus, minus = {}, {}
    for mu in mode_keys(mus):
        Q = R.subspace(mu)
        if Q.shape[1] and np.linalg.norm(eps.eps @ Q - projector(Q) @ eps.eps @ Q) > SUBSPACE_TOL:
            raise NotEpsInvariant(f"condition {R.kind} is not eps-invariant at mu={mu}")
        plus[mu] = intersect(Q, Hp)
        minus[mu] = intersect(Q, Hm)
    Rp = ResidueCondition(R.kind + "+", R.d, lambda mu: intersect(R.rule(mu), Hp), plus)
    Rm = ResidueCondition(R.kind + "-", R.d, lambda mu: intersect(R.rule(mu), Hm), minus)
    return Rp, Rm


def complete_plus(R_plus: ResidueCondition, eps: ChiralityOperator) -> ResidueCondition:
    """R^+ plus ((R^+)^G cap H^-), a Lagrangian condition."""
    Hp, Hm = eps.eigenspace(+1), eps.eigenspace(-1)

    def complete(Q):
        if Q.shape[1] and np.linalg.norm(projector(Hp) @ Q - Q) > SUBSPACE_TOL:
            raise NotEpsInvariant("R_plus must lie in the eps-positive subspace")
        return span_sum(Q, intersect(symplectic_complement_matrix(Q), Hm))

    over = {mu: complete(Q) for mu, Q in R_plus.overrides.items()}
    return ResidueCondition("Completed", R_plus.d, lambda mu: complete(R_plus.rule(mu)), over)


def chiral_branching_index(cfg, eps: ChiralityOperator | None = None):
    """Sum over residual modes of dim ker A^+ - dim coker A^+, A^+ : H^+ -> H^+."""
    d = cfg.fiber_dim
    eps = eps or ChiralityOperator.default(d)
    eps.check()
    A = BranchingOperator(d)
    Hp = eps.eigenspace(+1)
    if np.linalg.norm(eps.eps @ A.matrix(1.0) - A.matrix(1.0) @ eps.eps) > 1e-12:
        raise NotEpsInvariant("A does not preserve the chirality splitting")
    total = 0
    for mu in mode_keys(cfg):
        B = Hp.conj().T @ A.matrix(mu) @ Hp
        s = np.linalg.svd(B, compute_uv=False)
        rank = int(np.sum(s > RANK_TOL * max(1.0, abs(mu))))
        total += (B.shape[1] - rank) - (B.shape[0] - rank)
    return total


# ---------------------------------------------------------------- index


def pair_defect(L, R):
    """(dim(L cap R), codim(L + R)) in C^{2d}."""
    n = L.shape[0]
    inter = intersect(L, R).shape[1]
    codim = n - span_sum(L, R).shape[1]
    return inter, codim


def fredholm_delta_index(R: ResidueCondition, Lambda, cfg=None, edge=8) -> int:
    """Sum over modes of dim(Lambda cap R) - codim(Lambda + R).

    ``Lambda`` maps mu to a basis of the Calderon subspace.  The modes beyond
    the truncation are taken to be transverse; this is checked on the ``edge``
    largest retained mu.
    """
    mus = sorted(Lambda) if cfg is None else mode_keys(cfg)
    total = 0
    for mu in mus:
        inter, codim = pair_defect(Lambda[float(mu)], R.subspace(mu))
        total += inter - codim
    for mu in sorted(mus, key=abs)[-edge:]:
        if pair_defect(Lambda[float(mu)], R.subspace(mu)) != (0, 0):
            raise TailNotTransverse(f"condition {R.kind} is not transverse to Lambda at mu={mu}")
    return int(total)
