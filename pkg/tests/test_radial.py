import numpy as np
import pytest
import scipy.special as sp

from ramified_dirac.bessel import spherical_bessel
from ramified_dirac.errors import ConvergenceError, DomainError, MeshTooCoarse, NotInDomain
from ramified_dirac.mesh import GradedMesh
from ramified_dirac.model_config import ModeIndex, outer_type1
from ramified_dirac.radial import (
    ExtensionProfile,
    PolynomialProfile,
    RadialSection,
    apply_mode_operator,
    bump_profile,
    cutoff_derivatives,
    fd_eigen_oracle,
    fundamental_system,
    inhomogeneous_solve,
    leading_coefficient,
    random_polynomial_profile,
    smooth_step,
    smooth_step_jet,
)

ORDERS = [n + 0.5 for n in range(-21, 21)]


# ---------------------------------------------------------------- Bessel


def test_bessel_examples():
    assert spherical_bessel("J", 0.5, np.pi) == pytest.approx(0.0, abs=1e-15)
    assert spherical_bessel("J", -0.5, np.pi / 2) == pytest.approx(0.0, abs=1e-15)
    assert spherical_bessel("K", 0.5, 1.0) == pytest.approx(np.sqrt(np.pi / 2) * np.exp(-1.0), rel=1e-14)
    assert spherical_bessel("K", 0.5, 1.0) == pytest.approx(0.461068504447894, rel=1e-12)


@pytest.mark.parametrize("kind,ref", [("J", sp.jv), ("Y", sp.yv)])
def test_bessel_oscillatory_against_scipy(kind, ref):
    x = np.geomspace(1e-8, 1e3, 400)
    for nu in ORDERS:
        ours = spherical_bessel(kind, nu, x)
        theirs = ref(nu, x)
        ok = np.isfinite(theirs) & (np.abs(theirs) < 1e250)
        # near zeros use the modulus sqrt(J^2 + Y^2) as the scale
        scale = np.maximum(np.abs(theirs), np.hypot(sp.jv(nu, x), sp.yv(nu, x)))[ok]
        err = np.abs(ours[ok] - theirs[ok]) / scale
        assert np.max(err) <= 1e-12, (kind, nu, np.max(err))


@pytest.mark.parametrize("kind,ref", [("I", sp.ive), ("K", sp.kve)])
def test_bessel_modified_against_scipy(kind, ref):
    x = np.geomspace(1e-8, 1e3, 400)
    for nu in ORDERS:
        ours = spherical_bessel(kind, nu, x, scaled=True)
        theirs = ref(nu, x)
        ok = np.isfinite(theirs) & (np.abs(theirs) < 1e250) & (np.abs(theirs) > 1e-250)
        if kind == "I" and nu < 0:
            scale = np.maximum(np.abs(theirs), sp.ive(abs(nu), x))[ok]
        else:
            scale = np.abs(theirs[ok])
        err = np.abs(ours[ok] - theirs[ok]) / scale
        assert np.max(err) <= 1e-12, (kind, nu, np.max(err))


def test_bessel_domain():
    with pytest.raises(DomainError):
        spherical_bessel("J", 0.5, 0.0)
    with pytest.raises(DomainError):
        spherical_bessel("J", 1.0, 1.0)


# ---------------------------------------------------------------- fundamental systems


def test_residual_fundamental_system_closed_form(mesh):
    kappa = 1.7
    fs = fundamental_system(-0.5, 0.0, kappa, 1, mesh)
    assert len(fs.admissible) == 2
    r = mesh.r
    ref = np.stack(
        [
            np.concatenate([np.sin(kappa * r)[:, None], np.cos(kappa * r)[:, None]], axis=1),
            np.concatenate([np.cos(kappa * r)[:, None], -np.sin(kappa * r)[:, None]], axis=1),
        ],
        axis=2,
    ) * r[:, None, None] ** -0.5
    A = np.stack([s.stacked() for s in fs.admissible], axis=2)
    # same span: projecting the reference onto the computed pair loses nothing
    X = A.reshape(-1, 2)
    Y = ref.reshape(-1, 2)
    coef, *_ = np.linalg.lstsq(X, Y, rcond=None)
    assert np.linalg.norm(X @ coef - Y) <= 1e-10 * np.linalg.norm(Y)


def test_residual_zero_energy_constants(mesh):
    fs = fundamental_system(-0.5, 0.0, 0.0, 1, mesh)
    X = np.stack([(np.sqrt(mesh.r)[:, None] * s.stacked()) for s in fs.admissible], axis=2).reshape(-1, 2)
    const = np.stack([np.tile([1.0, 0.0], (mesh.r.size, 1)), np.tile([0.0, 1.0], (mesh.r.size, 1))], axis=2).reshape(-1, 2)
    coef, *_ = np.linalg.lstsq(X, const, rcond=None)
    assert np.linalg.norm(X @ coef - const) <= 1e-12 * np.linalg.norm(const)


@pytest.mark.parametrize("lam,mu,kappa", [(-0.5, 0.0, 1.3), (-0.5, 2.0, 0.7), (-0.5, 3.0, 5.0), (0.5, 0.0, 2.0), (1.5, -2.0, 4.0), (2.5, 1.0, 0.3), (0.5, 1.0, -1.0)])
def test_fundamental_solutions_solve_the_equation(mesh, lam, mu, kappa):
    fs = fundamental_system(lam, mu, kappa, 1, mesh)
    assert len(fs.admissible) == (2 if lam == -0.5 else 1)
    mode = ModeIndex(lam, mu)
    keep = mesh.r > 1e-6
    for sec in fs.admissible:
        img = apply_mode_operator(mode, sec).stacked()
        err = np.max(np.abs(img - kappa * sec.stacked())[keep])
        assert err <= 1e-6 * max(1.0, abs(kappa)) * np.max(np.abs(sec.stacked()[keep]))
        # the closed-form image is exact
        np.testing.assert_allclose(sec.image().stacked(), kappa * sec.stacked(), atol=1e-12 * np.max(np.abs(sec.stacked())))


def test_regular_solution_excludes_singular_branch(mesh):
    fs = fundamental_system(0.5, 0.0, 2.0, 1, mesh)
    f = fs.admissible[0].f[:, 0]
    # regular: f ~ r^{1/2} -> 0 at the origin
    assert abs(f[0]) <= 1e-5
    assert fs.singular


@pytest.mark.parametrize("lam,mu,kappa", [(-0.5, 1.0, 2.0), (1.5, 2.0, 3.0), (0.5, 16.0, 1.0)])
def test_wronskian_constant(mesh, lam, mu, kappa):
    fs = fundamental_system(lam, mu, kappa, 1, mesh)
    pair = fs.admissible[:2] if lam == -0.5 else [fs.admissible[0], fs.singular[0]]
    a, b = pair
    r = mesh.r
    w = r * (a.f[:, 0] * b.g[:, 0] - b.f[:, 0] * a.g[:, 0])
    size = r * (np.abs(a.f[:, 0] * b.g[:, 0]) + np.abs(b.f[:, 0] * a.g[:, 0]))
    assert np.max(np.abs(w - w[-1])) <= 1e-10 * max(1.0, np.max(size))


# ---------------------------------------------------------------- mode operator


def test_apply_to_eigen_solution(mesh):
    fs = fundamental_system(-0.5, 0.0, np.pi / 2, 1, mesh)
    sec = fs.admissible[0]
    numeric = apply_mode_operator(sec.mode, RadialSection(sec.mode, mesh, sec.f, sec.g))
    keep = mesh.r > 1e-6
    exact = np.pi / 2 * sec.stacked()
    assert np.max(np.abs(numeric.stacked() - exact)[keep]) <= 1e-6 * np.max(np.abs(exact[keep]))


def test_apply_to_zero(mesh):
    mode = ModeIndex(1.5, 2.0)
    z = np.zeros((mesh.r.size, 1))
    out = apply_mode_operator(mode, RadialSection(mode, mesh, z, z))
    assert not np.any(out.stacked())


def test_mesh_needs_enough_points():
    with pytest.raises(MeshTooCoarse):
        GradedMesh(points_per_panel=3)


@pytest.mark.parametrize("mu", [0.0, 1.0, 4.0])
def test_extension_image_closed_form(mesh, mu):
    v = np.array([0.7, -0.2])
    prof = ExtensionProfile(mu, v)
    sec = RadialSection.from_profile(prof, mesh)
    numeric = apply_mode_operator(sec.mode, RadialSection(sec.mode, mesh, sec.f, sec.g)).stacked()
    exact = sec.image().stacked()
    keep = mesh.r > 1e-6
    scale = np.abs(exact[keep]).max()
    assert np.max(np.abs(numeric - exact)[keep]) <= 1e-4 * scale
    # explicit derivative identity on r < 1/4 where the cutoff is 1:
    # M(r^{-1/2} e^{-|mu| r} v) = r^{-1/2} e^{-|mu| r} (mu v_f + |mu| v_g, -|mu| v_f - mu v_g)
    r = mesh.r[mesh.r < 0.25]
    e = r**-0.5 * np.exp(-abs(mu) * r)
    mf, mg = prof.image(r)
    np.testing.assert_allclose(mf[:, 0], e * (mu * v[0] + abs(mu) * v[1]), rtol=1e-12, atol=1e-300)
    np.testing.assert_allclose(mg[:, 0], e * (-abs(mu) * v[0] - mu * v[1]), rtol=1e-12, atol=1e-300)


def test_closed_profiles_stay_exact_under_powers(rng):
    """Repeated images of extension and polynomial profiles agree with numerical differentiation."""
    mesh = GradedMesh(points_per_panel=24, max_panel_width=1.0 / 128.0)
    keep = (mesh.r > 1e-6)
    for prof in (
        ExtensionProfile(3.0, np.array([1.0, 0.4])),
        random_polynomial_profile(ModeIndex(-0.5, 2.0), rng, 1, np.array([1.0, -1.0])),
        random_polynomial_profile(ModeIndex(1.5, -1.0), rng, 1),
    ):
        sec = RadialSection.from_profile(prof, mesh)
        for _ in range(3):
            num = apply_mode_operator(sec.mode, RadialSection(sec.mode, mesh, sec.f, sec.g)).stacked()
            sec = sec.image()
            exact = sec.stacked()
            assert np.max(np.abs(num - exact)[keep]) <= 1e-4 * np.max(np.abs(exact[keep]))


def test_polynomial_profile_residue():
    mode = ModeIndex(-0.5, 1.0)
    p = PolynomialProfile(mode, [[2.0], [1.0]], [[-3.0], [0.5]])
    np.testing.assert_array_equal(p.residue(), [2.0, -3.0])
    assert not np.any(PolynomialProfile(ModeIndex(0.5, 1.0), [[1.0], [0.0], [2.0]], [[1.0]]).residue())


def test_smooth_step_jets_against_differences():
    t = np.linspace(0.05, 0.95, 37)
    jets = smooth_step_jet(t, 4)
    np.testing.assert_allclose(jets[0], smooth_step(t)[0], rtol=1e-12, atol=1e-13)
    np.testing.assert_allclose(jets[1], smooth_step(t)[1], rtol=1e-12, atol=1e-13)
    h = 1e-5
    for n in range(1, 4):
        fd = (smooth_step_jet(t + h, n)[n] - smooth_step_jet(t - h, n)[n]) / (2 * h)
        np.testing.assert_allclose(fd, jets[n + 1], rtol=1e-5, atol=1e-5 * np.max(np.abs(jets[n + 1])))


def test_cutoff_support():
    r = np.array([0.01, 0.2, 0.25, 0.5, 0.6, 0.9])
    chi, dchi = cutoff_derivatives(r, 2)
    np.testing.assert_array_equal(chi, [1, 1, 1, 0, 0, 0])
    np.testing.assert_array_equal(dchi[[0, 1, 3, 4, 5]], 0)


def test_formal_symmetry(rng):
    """<M phi, psi> = <phi, M psi> for sections vanishing near both ends."""
    mesh = GradedMesh(points_per_panel=24, max_panel_width=1.0 / 128.0)
    for lam, mu in ((-0.5, 0.0), (-0.5, 3.0), (1.5, -2.0)):
        mode = ModeIndex(lam, mu)
        a = RadialSection.from_profile(bump_profile(mode, rng.normal(size=(3, 1)), rng.normal(size=(3, 1))), mesh)
        b = RadialSection.from_profile(bump_profile(mode, rng.normal(size=(3, 1)), rng.normal(size=(3, 1))), mesh)
        lhs = mesh.inner(a.image().stacked(), b.stacked())
        rhs = mesh.inner(a.stacked(), b.image().stacked())
        assert abs(lhs - rhs) <= 1e-8 * a.l2_norm() * b.l2_norm()


def test_squared_operator_decouples(mesh, rng):
    """M^2 acts on f and g as the Bessel-type operators of orders |lam| and |lam + 1|."""
    from ramified_dirac.spectral import squared_plus_one

    mode = ModeIndex(1.5, 2.0)
    sec = RadialSection.from_profile(random_polynomial_profile(mode, rng, 1), mesh)
    twice = sec.image().image().stacked() + sec.stacked()
    decoupled = squared_plus_one(mode, sec).stacked()
    keep = mesh.r > 1e-4
    assert np.max(np.abs(twice - decoupled)[keep]) <= 1e-6 * np.max(np.abs(twice[keep]))


# ---------------------------------------------------------------- leading terms


def test_leading_coefficient_examples(mesh):
    lt = leading_coefficient(-0.5, lambda r: r**-0.5, mesh)
    assert lt.case == "power" and lt.a == pytest.approx(1.0, abs=1e-10)
    lt = leading_coefficient(0.5, lambda r: r**0.5, mesh)
    assert lt.case == "vanishing" and lt.a == 0.0
    lt = leading_coefficient(-0.5, lambda r: 2.0 * r / 3.0, mesh)
    assert lt.case == "power" and lt.a == pytest.approx(0.0, abs=1e-10)


def test_leading_coefficient_exact_on_power_plus_smooth(mesh, rng):
    for _ in range(10):
        lam = rng.uniform(-0.9, -0.1)
        a, b = rng.normal(size=2)
        lt = leading_coefficient(lam, lambda r: a * r**lam + b * r ** (lam + 1) * np.cos(r), mesh)
        assert lt.a == pytest.approx(a, abs=1e-10)


def test_leading_coefficient_rejects_outside_domain(mesh):
    with pytest.raises(NotInDomain):
        leading_coefficient(-0.5, lambda r: r**-1.2, mesh)


def test_inhomogeneous_examples(mesh):
    r = mesh.r
    np.testing.assert_allclose(inhomogeneous_solve(-0.5, lambda s: np.ones_like(s), mesh=mesh), 2 * r / 3, rtol=1e-12, atol=1e-15)
    assert not np.any(inhomogeneous_solve(0.5, np.zeros_like(r), mesh=mesh))
    np.testing.assert_allclose(inhomogeneous_solve(0.5, lambda s: s**0.5, mesh=mesh), r**0.5 * (r - 1), atol=1e-12)


# ---------------------------------------------------------------- oracle


def test_oracle_examples():
    mode = ModeIndex(-0.5, 0.0, 1, True)
    vals = sorted(fd_eigen_oracle(mode, np.array([[1.0], [0.0]]), outer_type1(1), count=4))
    np.testing.assert_allclose(vals, [-3 * np.pi / 2, -np.pi / 2, np.pi / 2, 3 * np.pi / 2], rtol=1e-4)
    vals = fd_eigen_oracle(mode, np.array([[0.0], [1.0]]), outer_type1(1), count=3)
    assert min(abs(v) for v in vals) <= 1e-8


def test_oracle_rejects_ill_posed():
    mode = ModeIndex(-0.5, 0.0, 1, True)
    with pytest.raises(ConvergenceError):
        fd_eigen_oracle(mode, np.eye(2), None)
    with pytest.raises(ValueError):
        fd_eigen_oracle(mode, np.array([[1.0], [0.0]]), outer_type1(1), n_points=100)
