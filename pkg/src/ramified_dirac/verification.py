"""Verification suites: one per checked property of the model.

Every suite returns a ``SuiteResult`` holding named checks (value, tolerance,
pass flag) and a table of per-test rows for CSV output.  Seeds are fixed, so
repeated runs give identical tables.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .conditions import (
    ChiralityOperator,
    chiral_branching_index,
    equal_conditions,
    fredholm_delta_index,
    is_lagrangian,
    make_aps,
    make_bag,
    make_local,
    same_subspace,
    symbol_regularity_check,
    symplectic_complement,
)
from .diagnostics import (
    MU_SWEEP,
    build_battery,
    extension_l2_constant,
    hardy_verify,
    leading_term_identity,
    norm_equivalence_sweep,
    untwist_coefficients,
    weyl_check,
)
from .gelfand_robbin import extend, greens_form_quadrature, greens_form_residue, residue
from .model_config import ModeIndex, ModelConfig, enumerate_modes, outer_type1
from .radial import (
    RadialSection,
    default_mesh,
    fd_eigen_oracle,
    fundamental_system,
    leading_coefficient,
    random_polynomial_profile,
)
from .spectral import (
    _sigma_min,
    assemble_spectrum,
    calderon_condition,
    calderon_family,
    eigenfunction,
    eigenvalues_in_window,
    manufactured_pair,
    second_order_solve,
)


@dataclass
class Check:
    name: str
    value: float
    tol: float
    ok: bool

    def line(self):
        return f"{'PASS' if self.ok else 'FAIL'}  {self.name}: {self.value:.3e} (tol {self.tol:.1e})"


@dataclass
class SuiteResult:
    name: str
    claim: str
    header: tuple
    rows: list = field(default_factory=list)
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.ok for c in self.checks)

    def check(self, name, value, tol, ok=None):
        value = float(value)
        self.checks.append(Check(name, value, float(tol), bool(value <= tol if ok is None else ok)))


def _unit(rng, n):
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


# ---------------------------------------------------------------- symplectic structure


def suite_green(seed=0, n_pairs=120, mus=range(9)):
    """Green's form by quadrature against the residue formula on random sections."""
    out = SuiteResult("green", "Green's form equals -<J res, res>", ("mu", "lam", "quadrature", "residue", "bound"))
    rng = np.random.default_rng(seed)
    mesh = default_mesh()
    mus = list(mus)
    worst = 0.0
    for i in range(n_pairs):
        mu = float(mus[i % len(mus)])
        lam = -0.5 if i % 6 else 0.5
        mode = ModeIndex(lam, mu)
        secs = []
        for _ in range(2):
            v = _unit(rng, 2) * rng.uniform(0.2, 2.0)
            if lam == -0.5:
                # extension plus a polynomial section with residue in the minimal domain
                poly = random_polynomial_profile(mode, rng, 1, np.zeros(2))
                sec = extend(v, mu, mesh) + RadialSection.from_profile(poly, mesh)
            else:
                sec = RadialSection.from_profile(random_polynomial_profile(mode, rng, 1), mesh)
            secs.append(sec)
        phi, psi = secs
        gq = greens_form_quadrature(phi, psi)
        gr = greens_form_residue(residue(phi), residue(psi))
        bound = 1e-6 * (1.0 + phi.graph_norm()) * (1.0 + psi.graph_norm())
        worst = max(worst, abs(gq - gr) / bound)
        out.rows.append((mu, lam, complex(gq), complex(gr), bound))
    out.check("max |G_quad - G_res| / bound", worst, 1.0)
    out.check("pairs tested (at least 100)", len(out.rows), 100, ok=len(out.rows) >= 100)
    return out


def suite_resext(seed=0, n_vectors=120):
    """res(ext v) = v exactly, and the L^2 bound of ext with one constant over mu."""
    out = SuiteResult("resext", "res o ext = id and uniform extension bound", ("mu", "identity_error", "l2_ratio"))
    rng = np.random.default_rng(seed)
    mesh = default_mesh()
    err = 0.0
    for i in range(n_vectors):
        mu = float(rng.integers(0, 65))
        v = _unit(rng, 2) * rng.uniform(0.1, 10.0)
        e = extend(v, mu, mesh)
        diff = float(np.max(np.abs(residue(e) - v)))
        err = max(err, diff)
        out.rows.append((mu, diff, e.l2_norm() * np.sqrt(1.0 + mu) / np.linalg.norm(v)))
    out.check("max |res(ext v) - v|", err, 0.0)
    C, vals = extension_l2_constant(range(65))
    vals = np.asarray(vals)
    # one constant: the scaled norm must not grow in the upper half of the sweep
    drift = float(vals[33:].max() / vals[:33].max())
    out.check("sup ||ext v|| (1+mu)^(1/2) / |v|", C, 10.0, ok=np.isfinite(C))
    out.check("upper-half / lower-half constant", drift, 1.0)
    return out


# ---------------------------------------------------------------- spectra


def suite_spectra(window=(-30.0, 30.0), n_oracle=4096):
    """Roots of the matching determinant and the finite-difference oracle against closed forms."""
    out = SuiteResult("spectra", "closed-form spectra of the (-1/2, 0) mode", ("inner", "kappa", "exact", "source"))
    mode = ModeIndex(-0.5, 0.0, 1, True)
    outer = outer_type1(1)
    cases = {
        "f-slot": (np.array([[1.0], [0.0]]), lambda k: (2 * k + 1) * np.pi / 2, 8),
        "g-slot": (np.array([[0.0], [1.0]]), lambda k: k * np.pi, 9),
    }
    # oracle counts cover whole +-kappa pairs
    for name, (inner, exact_fn, count) in cases.items():
        ks = np.arange(-40, 41)
        exact = np.array(sorted(x for x in exact_fn(ks) if window[0] <= x <= window[1]))
        roots = np.array([x for x, _ in eigenvalues_in_window(mode, inner, outer, window)])
        if roots.size != exact.size:
            out.check(f"{name}: root count matches", abs(roots.size - exact.size), 0.0)
            continue
        out.check(f"{name}: max determinant root error", np.max(np.abs(roots - exact)), 1e-10)
        for x, e in zip(roots, exact):
            out.rows.append((name, x, e, "determinant"))
        fd = np.array(sorted(fd_eigen_oracle(mode, inner, outer, n_points=n_oracle, count=count)))
        ref = exact[np.argsort(np.abs(exact))][:count]
        ref = np.sort(ref)
        rel = np.abs(fd - ref) / np.maximum(np.abs(ref), 1.0)
        out.check(f"{name}: max oracle relative error", np.max(rel), 1e-4)
        for x, e in zip(fd, ref):
            out.rows.append((name, x, e, "oracle"))
    zero = [r for r in out.rows if r[0] == "g-slot" and r[3] == "determinant" and r[1] == 0.0]
    out.check("g-slot zero mode present", 0.0 if zero else 1.0, 0.0)
    return out


def _lagrangian_catalog(cfg):
    d = cfg.fiber_dim
    return {
        "APS+L": make_aps(cfg, kernel=np.array([[1.0], [0.0]])),
        "f-slot": make_local([1.0, 0.0], d),
        "g-slot": make_local([0.0, 1.0], d),
        "diagonal": make_local([1.0, 1.0], d),
        "Calderon": calderon_condition(cfg),
    }


def suite_selfadjoint(n_eigen=4, mus=(0.0, 1.0, 2.0, 3.0)):
    """Lagrangian conditions give eigenfunctions with vanishing Green's pairing; Bag+ and Bag- are adjoint."""
    out = SuiteResult("selfadjoint", "Lagrangian conditions are self-adjoint", ("condition", "mu", "k1", "k2", "pairing"))
    cfg = ModelConfig(mu_cut=4.0)
    outer = cfg.outer_bc
    worst = 0.0
    for name, R in _lagrangian_catalog(cfg).items():
        out.check(f"{name}: Lagrangian", 0.0 if is_lagrangian(R, mus) else 1.0, 0.0)
        for mu in mus:
            mode = ModeIndex(-0.5, mu)
            roots = eigenvalues_in_window(mode, R.subspace(mu), outer, (-12.0, 12.0))
            roots = sorted(roots, key=lambda t: abs(t[0]))[:n_eigen]
            secs = [(k, s) for k, _ in roots for s in eigenfunction(mode, R.subspace(mu), outer, k)]
            for i, (k1, a) in enumerate(secs):
                for k2, b in secs[i:]:
                    g = greens_form_quadrature(a, b)
                    scale = a.l2_norm() * b.l2_norm()
                    worst = max(worst, abs(g) / scale)
                    out.rows.append((name, mu, k1, k2, abs(g) / scale))
    out.check("max normalised Green's pairing", worst, 1e-8)
    adj = symplectic_complement(make_bag(+1))
    ok = equal_conditions(adj, make_bag(-1), mus) and all(
        same_subspace(adj.subspace(mu), make_bag(-1).subspace(mu), tol=1e-14) for mu in mus
    )
    out.check("(Bag+)^G = Bag-", 0.0 if ok else 1.0, 0.0)
    return out


# ---------------------------------------------------------------- indices


def suite_index():
    """APS index: -d with a kernel of A, 0 without."""
    out = SuiteResult("index", "APS index is -dim ker A / 2 per circle", ("d", "h0", "index", "expected"))
    for d in (1, 2):
        for h0, expected in ((0.0, -d), (0.5, 0)):
            cfg = ModelConfig(fiber_dim=d, holonomy_h0=h0, outer_bc=outer_type1(d))
            ind = fredholm_delta_index(make_aps(cfg), calderon_family(cfg), cfg)
            out.rows.append((d, h0, ind, expected))
            out.check(f"d={d}, h0={h0}: index - expected", abs(ind - expected), 0.0)
    return out


def suite_bordism(cuts=(2.0, 4.0, 8.0)):
    """Index of the chiral part of the branching operator vanishes."""
    out = SuiteResult("bordism", "chiral branching index vanishes", ("h0", "h1", "mu_cut", "index"))
    # 2 h0 - h1 must be an integer for the conjugation symmetry
    for h0, h1 in ((0.0, 0.0), (0.25, 0.5), (0.5, 0.0)):
        for cut in cuts:
            cfg = ModelConfig(holonomy_h0=h0, holonomy_h1=h1, mu_cut=cut)
            ind = chiral_branching_index(cfg, ChiralityOperator.default(1))
            out.rows.append((h0, h1, cut, ind))
            out.check(f"h0={h0}, mu_cut={cut}: index", abs(ind), 0.0)
    return out


def suite_bag():
    """kappa = 0 is not a root for the bag conditions in any mode of the default truncation."""
    out = SuiteResult("bag", "bag conditions have the minimal kernel", ("condition", "lam", "mu", "sigma_min"))
    cfg = ModelConfig()
    lowest = np.inf
    for sign in (+1, -1):
        R = make_bag(sign)
        for mode in enumerate_modes(cfg):
            R_mode = R.subspace(mode.mu) if mode.lam == -0.5 else None
            s = float(_sigma_min(mode, R_mode, cfg.outer_bc, np.array([0.0]))[0])
            lowest = min(lowest, s)
            out.rows.append((R.kind, mode.lam, mode.mu, s))
    out.check("min sigma at kappa = 0 (must exceed 1e-8)", lowest, 1e-8, ok=lowest > 1e-8)
    return out


# ---------------------------------------------------------------- estimates


def suite_hardy(cutoffs=(1, 4, 16, 64)):
    """Best constant of the Hardy inequality on antiperiodic sections."""
    out = SuiteResult("hardy", "Hardy constant on antiperiodic sections is 4", ("M", "periodic", "ratio", "constant"))
    for M in cutoffs:
        h = hardy_verify(M)
        out.rows.append((M, False, h["ratio"], h["best_constant_estimate"]))
        out.check(f"M={M}: |constant - 4|", abs(h["best_constant_estimate"] - 4.0), 1e-10)
    h = hardy_verify(cutoffs[-1], periodic=True)
    out.rows.append((cutoffs[-1], True, h["ratio"], h["best_constant_estimate"]))
    out.check("periodic control reports failure", 0.0 if not h["bounded"] else 1.0, 0.0)
    return out


def _leading_battery(rng, n):
    """Manufactured scalar functions with known leading behaviour, per case."""
    P = np.polynomial.polynomial
    cases = []
    for _ in range(n):
        lam = rng.uniform(-0.95, -0.05)
        a, b, c = rng.normal(size=3)
        # phi = r^lam (a + b r + c r^2), with (d/dr - lam/r) phi = r^lam (b + 2 c r)
        cases.append(("power", lam, a, lambda r, lam=lam, a=a, b=b, c=c: r**lam * (a + b * r + c * r * r)))
    for _ in range(n):
        a, b, s = rng.normal(), rng.normal(), rng.uniform(0.05, 0.35)
        # a |log r|^s (1 - r)^2 + b r; s < 1/2 keeps the derivative in L^2 and
        # s <= 0.35 keeps the mass below r_min small enough to resolve on the mesh
        cases.append(("log-bounded", 0.0, None, lambda r, a=a, b=b, s=s: a * np.abs(np.log(r)) ** s * (1 - r) ** 2 + b * r))
    for _ in range(n):
        lam = rng.uniform(0.05, 3.0)
        coef = rng.normal(size=4)
        cases.append(("vanishing", lam, 0.0, lambda r, lam=lam, coef=coef: r**lam * P.polyval(r, coef)))
    return cases


def suite_leading(seed=0, n=50):
    """Classification of the r -> 0 behaviour and the integral identity."""
    out = SuiteResult("leading", "leading-order term classification", ("case", "lam", "found", "a_true", "a_fit"))
    rng = np.random.default_rng(seed)
    mesh = default_mesh()
    mismatch, a_err = 0, 0.0
    for case, lam, a, fn in _leading_battery(rng, n):
        lt = leading_coefficient(lam, fn, mesh)
        mismatch += lt.case != case
        if a is not None:
            a_err = max(a_err, abs(lt.a - a) / max(1.0, abs(a)))
        out.rows.append((case, lam, lt.case, a if a is not None else float("nan"), lt.a))
    out.check("misclassified", mismatch, 0.0)
    out.check("max relative error of a", a_err, 1e-8)
    # identity for phi vanishing at both ends
    P = np.polynomial.polynomial
    ident = 0.0
    for _ in range(n):
        lam = rng.uniform(-0.9, 3.0)
        e = max(lam, 0.0) + rng.uniform(0.6, 1.5)
        coef = P.polymul(rng.normal(size=3), [1.0, -1.0])
        dcoef = P.polyder(coef)
        fn = lambda r, e=e, coef=coef: r**e * P.polyval(r, coef)
        dfn = lambda r, e=e, coef=coef, dcoef=dcoef: e * r ** (e - 1) * P.polyval(r, coef) + r**e * P.polyval(r, dcoef)
        lhs, rhs = leading_term_identity(lam, fn, dfn, mesh)
        ident = max(ident, abs(lhs - rhs) / max(abs(lhs), 1e-300))
    out.check("integral identity relative error", ident, 1e-8)
    return out


def regular_local_conditions():
    """Lagrangian local conditions passing the symbol criterion."""
    cands = {"f-slot": [1.0, 0.0], "g-slot": [0.0, 1.0], "diagonal": [1.0, 1.0], "antidiagonal": [1.0, -1.0]}
    out = {}
    for name, v in cands.items():
        R = make_local(v)
        if is_lagrangian(R) and symbol_regularity_check(R.subspace(0.0)):
            out[name] = R
    return out


def suite_elliptic(ks=(0, 1, 2), seed=0, n_eigen=5, n_random=5, control=(1.0, -1.0)):
    """Spread of the elliptic-estimate ratios over batteries, and a non-regular control."""
    out = SuiteResult("elliptic", "elliptic estimates for regular conditions", ("condition", "k", "min", "max", "spread"))
    cfg = ModelConfig()
    conds = {"APS": make_aps(cfg), **regular_local_conditions()}
    for name, R in conds.items():
        battery = build_battery(cfg, R, n_eigen=n_eigen, n_random=n_random, seed=seed)
        for k in ks:
            res = norm_equivalence_sweep(cfg, R, k, battery=battery)
            out.rows.append((name, k, res["min_ratio"], res["max_ratio"], res["spread"]))
            out.check(f"{name}, k={k}: spread", res["spread"], 50.0, ok=res["finite"] and res["spread"] <= 50.0)
    R = make_local(control)
    reg = symbol_regularity_check(R.subspace(0.0))
    out.check("control fails the symbol criterion", 0.0 if not reg else 1.0, 0.0)
    battery = build_battery(cfg, R, n_eigen=0, n_random=n_random, seed=seed, mus=MU_SWEEP)
    res = norm_equivalence_sweep(cfg, R, 1, battery=battery)
    out.rows.append(("control", 1, res["min_ratio"], res["max_ratio"], res["spread"]))
    out.check("control growth over the mu sweep (must reach 10)", res["growth"], 10.0, ok=res["growth"] >= 10.0)
    return out


def suite_weyl(window=(-40.0, 40.0), k=2):
    """Counting function against <Lambda>^{2k} on the full default spectrum."""
    out = SuiteResult("weyl", "Weyl-type counting bound", ("Lambda", "N", "ratio"))
    cfg = ModelConfig()
    spec = assemble_spectrum(cfg, make_local([1.0, 0.0]), window)
    res = weyl_check(spec, k)
    out.rows.extend(res["table"])
    ratios = np.array([t[2] for t in res["table"]])
    counts = np.array([t[1] for t in res["table"]])
    out.check("sup N / <Lambda>^(2k)", res["sup_ratio"], 1.0)
    out.check("N non-decreasing", float(np.sum(np.diff(counts) < 0)), 0.0)
    # bounded: the ratio in the upper half of the table does not exceed the lower half
    half = ratios.size // 2
    out.check("upper-half / lower-half sup ratio", ratios[half:].max() / ratios[:half].max(), 1.0)
    return out


def suite_second_order(seed=0, n_rhs=20, mus=range(5)):
    """Manufactured-solution recovery for M^2 + 1."""
    out = SuiteResult("second_order", "M^2 + 1 is invertible", ("lam", "mu", "relative_error"))
    rng = np.random.default_rng(seed)
    cfg = ModelConfig()
    mesh = default_mesh()
    R = make_aps(cfg)
    worst = 0.0
    for mu in mus:
        for lam in (-0.5, 0.5, 1.5):
            for s in ((1.0, -1.0) if lam > 0 and mu else (1.0,)):
                mode = ModeIndex(lam, s * float(mu))
                R_mode = R.subspace(mode.mu) if lam == -0.5 else None
                for _ in range(n_rhs):
                    phi0, psi = manufactured_pair(mode, rng.normal(size=(4, 1)), rng.normal(size=(4, 1)), mesh)
                    phi = second_order_solve(mode, R_mode, cfg.outer_bc, psi)
                    err = mesh.norm(phi.stacked() - phi0.stacked()) / mesh.norm(phi0.stacked())
                    worst = max(worst, err)
                    out.rows.append((lam, mode.mu, err))
    out.check("max relative recovery error", worst, 1e-6)
    return out


def suite_untwist(mu_max=4.0, n_eigen=3):
    """No half-integer powers after untwisting; harmonic solutions start at l = 0."""
    out = SuiteResult("untwist", "untwisted sections are polyhomogeneous", ("lam", "mu", "kappa", "residual", "leading"))
    cfg = ModelConfig(mu_cut=mu_max)
    R = make_local([1.0, 0.0])
    worst = 0.0
    for mode in enumerate_modes(cfg):
        R_mode = R.subspace(mode.mu) if mode.lam == -0.5 else None
        roots = eigenvalues_in_window(mode, R_mode, cfg.outer_bc, (-15.0, 15.0))
        roots = sorted(roots, key=lambda t: abs(t[0]))[:n_eigen]
        for kappa, _ in roots:
            for phi in eigenfunction(mode, R_mode, cfg.outer_bc, kappa):
                table, rel = untwist_coefficients(phi)
                worst = max(worst, rel)
                out.rows.append((mode.lam, mode.mu, kappa, rel, str(table.leading())))
    out.check("max half-power residual", worst, 1e-8)
    bad = 0
    for mu in range(int(mu_max) + 1):
        fs = fundamental_system(-0.5, float(mu), 0.0)
        for sec in fs.admissible:
            table, rel = untwist_coefficients(sec)
            lead = table.leading()
            bad += not lead or any(l != 0 for _, l in lead)
            out.rows.append((-0.5, float(mu), 0.0, rel, str(lead)))
    out.check("harmonic solutions without l = 0 leading block", bad, 0.0)
    return out


def suite_deformation(steps=9):
    """Index constant along the path of local conditions span(cos t, sin t)."""
    out = SuiteResult("deformation", "index is invariant along continuous paths", ("t", "index"))
    cfg = ModelConfig()
    Lam = calderon_family(cfg)
    idx = []
    for t in np.linspace(0.0, np.pi / 2, steps):
        ind = fredholm_delta_index(make_local([np.cos(t), np.sin(t)]), Lam, cfg)
        idx.append(ind)
        out.rows.append((float(t), ind))
    out.check("index variation along the path", max(idx) - min(idx), 0.0)
    return out


SUITES = {
    "green": suite_green,
    "resext": suite_resext,
    "spectra": suite_spectra,
    "selfadjoint": suite_selfadjoint,
    "index": suite_index,
    "bordism": suite_bordism,
    "bag": suite_bag,
    "hardy": suite_hardy,
    "leading": suite_leading,
    "elliptic": suite_elliptic,
    "weyl": suite_weyl,
    "second_order": suite_second_order,
    "untwist": suite_untwist,
    "deformation": suite_deformation,
}


def run_suite(name, **kwargs) -> SuiteResult:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    return SUITES[name](**kwargs)
