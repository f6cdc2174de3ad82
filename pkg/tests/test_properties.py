"""Property tests for the structural invariants."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ramified_dirac.bessel import spherical_bessel
from ramified_dirac.conditions import (
    equal_conditions,
    is_lagrangian,
    make_local,
    symbol_regularity_check,
    symplectic_complement,
)
from ramified_dirac.diagnostics import adapted_norm, untwist_coefficients, weyl_check
from ramified_dirac.gelfand_robbin import (
    ResidueVector,
    branching_apply,
    check_norm,
    extend,
    greens_form_residue,
    residue,
)
from ramified_dirac.model_config import ModeIndex, ModelConfig, base_spectrum, conjugate_mode
from ramified_dirac.radial import RadialSection, default_mesh, fundamental_system, random_polynomial_profile
from ramified_dirac.spectral import SpectrumEntry, SpectrumResult, counting_function

MESH = default_mesh()
finite = st.floats(-10.0, 10.0, allow_nan=False, allow_infinity=False)
half_integers = st.integers(-10, 10).map(lambda n: n + 0.5)
mus = st.integers(0, 32).map(float)
vec2 = arrays(np.float64, 2, elements=finite)
vec4 = arrays(np.float64, 4, elements=finite)


@given(half_integers, st.floats(0.1, 50.0))
def test_bessel_recurrence(nu, x):
    lhs = spherical_bessel("J", nu - 1, x) + spherical_bessel("J", nu + 1, x)
    rhs = 2 * nu / x * spherical_bessel("J", nu, x)
    scale = abs(spherical_bessel("J", nu - 1, x)) + abs(spherical_bessel("J", nu + 1, x)) + abs(rhs)
    assert abs(lhs - rhs) <= 1e-12 * max(scale, 1e-300)


@given(half_integers.filter(lambda x: x >= -0.5), st.floats(-20, 20))
def test_conjugation_is_involution(lam, mu):
    m = ModeIndex(lam, mu)
    assert conjugate_mode(conjugate_mode(m)) == m


@given(st.sampled_from([0.0, 0.5]), st.integers(1, 3), st.floats(1.0, 12.0))
def test_base_spectrum_symmetric_under_conjugation(h0, d, mu_cut):
    cfg = ModelConfig(holonomy_h0=h0, holonomy_h1=(2 * h0) % 1.0, fiber_dim=d, mu_cut=mu_cut)
    for lam in (-0.5, 0.5, 1.5):
        a = sorted(mu for mu, _ in base_spectrum(cfg, lam))
        b = sorted(-mu for mu, _ in base_spectrum(cfg, -(lam + 1)))
        np.testing.assert_allclose(a, b, atol=1e-12)


@given(st.floats(0.0, np.pi))
def test_local_complement_involutive(t):
    R = make_local([np.cos(t), np.sin(t)])
    assert is_lagrangian(R, (0.0, 2.0))
    assert equal_conditions(symplectic_complement(symplectic_complement(R)), R, (0.0, 2.0))


@given(arrays(np.float64, (4, 2), elements=finite).filter(lambda V: np.linalg.matrix_rank(V) == 2))
def test_symbol_check_sign_independent(V):
    assert symbol_regularity_check(V, 1.0) == symbol_regularity_check(V, -1.0)


@given(vec4, mus)
def test_residue_inverts_extension(v, mu):
    np.testing.assert_array_equal(residue(extend(v, mu, MESH)), v)


@given(vec2, vec2, mus)
def test_residue_form_antisymmetric(v, w, mu):
    a = greens_form_residue(v, w)
    b = greens_form_residue(w, v)
    assert abs(a + b) <= 1e-12 * (1 + np.linalg.norm(v) * np.linalg.norm(w))
    assert abs(greens_form_residue(v, v)) <= 1e-14 * (1 + np.dot(v, v))


@given(vec2, mus)
def test_branching_anticommutes_with_J(v, mu):
    x = ResidueVector.single(mu, v)
    assert branching_apply(x.apply_J()).allclose(-1.0 * branching_apply(x).apply_J(), 1e-12)


@given(vec2, mus, st.floats(0.1, 10.0))
def test_check_norm_homogeneous(v, mu, c):
    assert abs(check_norm(c * v, mu) - c * check_norm(v, mu)) <= 1e-12 * (1 + c * check_norm(v, mu))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([(-0.5, 0.0), (-0.5, 3.0), (1.5, -2.0)]), st.integers(0, 2), st.floats(-5, 5))
def test_adapted_norm_is_a_norm(seed, lm, k, c):
    rng = np.random.default_rng(seed)
    mode = ModeIndex(*lm)
    res = rng.normal(size=2) if mode.lam == -0.5 else None
    a = RadialSection.from_profile(random_polynomial_profile(mode, rng, 1, res), MESH)
    b = RadialSection.from_profile(random_polynomial_profile(mode, rng, 1, res), MESH)
    na, nb, nab = adapted_norm(a, k), adapted_norm(b, k), adapted_norm(a + b, k)
    assert nab <= (na + nb) * (1 + 1e-10)
    assert abs(adapted_norm(a.scale(c), k) - abs(c) * na) <= 1e-10 * (1 + abs(c) * na)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 6.0), st.sampled_from([0.0, 1.0, 2.0]), st.floats(-1.0, 1.0), st.floats(-1.0, 1.0))
def test_untwist_residual_invariant_under_smooth_multiplier(kappa, mu, a, b):
    sec = fundamental_system(-0.5, mu, kappa, 1, MESH).admissible[0]
    h = (2.0 + a * np.cos(MESH.r) + b * MESH.r**2)[:, None]
    _, base = untwist_coefficients(sec)
    _, scaled = untwist_coefficients(RadialSection(sec.mode, MESH, h * sec.f, h * sec.g))
    assert base <= 1e-8 and scaled <= 1e-8


spectra = st.lists(st.floats(-30.0, 30.0, allow_nan=False), max_size=60)


def _spectrum(ks):
    m = ModeIndex(-0.5, 0.0)
    return SpectrumResult([SpectrumEntry(k, m, 1) for k in sorted(ks)], (-30.0, 30.0))


@given(spectra, st.floats(0, 30), st.floats(0, 30))
def test_counting_monotone(ks, a, b):
    spec = _spectrum(ks)
    lo, hi = sorted((a, b))
    assert counting_function(spec, lo) <= counting_function(spec, hi)


@given(spectra, st.integers(0, 3))
def test_weyl_ratio_monotone_in_k(ks, k):
    spec = _spectrum(ks)
    assert weyl_check(spec, k + 1)["sup_ratio"] <= weyl_check(spec, k)["sup_ratio"] + 1e-15
