import math

import numpy as np
import pytest

from ramified_dirac.errors import InvalidConfig
from ramified_dirac.model_config import (
    ModeIndex,
    ModelConfig,
    base_spectrum,
    conjugate_mode,
    enumerate_modes,
    outer_custom,
    outer_type1,
    outer_type2,
    validate_config,
)


def periodic_dirac_eigenvalues(L, shift, n=256):
    """Eigenvalues of -i d/dtheta on a circle of length L twisted by e^{2 pi i shift}.

    Forward differences on a periodic grid: the eigenvalue for e^{i mu theta} is
    (e^{i mu h} - 1)/(i h), from which mu is recovered without aliasing.
    """
    h = L / n
    D = -np.eye(n, dtype=complex)
    for k in range(n):
        D[k, (k + 1) % n] += np.exp(2j * np.pi * shift) if k == n - 1 else 1.0
    w = np.linalg.eigvals(-1j * D / h)
    return np.sort(np.angle(1.0 + 1j * h * w) / h)


def test_default_config_is_valid():
    cfg = ModelConfig()
    assert validate_config(cfg) is cfg
    assert cfg.base_length == pytest.approx(2 * math.pi)
    assert cfg.outer_bc.kind == "TypeI"


@pytest.mark.parametrize(
    "changes",
    [dict(base_length=0.0), dict(lambda_cut=1.0), dict(fiber_dim=0), dict(holonomy_h0=1.0), dict(mu_cut=-1.0)],
)
def test_invalid_configs(changes):
    with pytest.raises(InvalidConfig):
        validate_config(ModelConfig(**changes))


def test_base_spectrum_trivial_holonomy():
    cfg = ModelConfig(mu_cut=2.5)
    spec = base_spectrum(cfg, -0.5)
    assert [mu for mu, _ in spec] == [-2.0, -1.0, 0.0, 1.0, 2.0]
    assert all(m == cfg.fiber_dim for _, m in spec)


def test_base_spectrum_antiperiodic():
    cfg = ModelConfig(mu_cut=2.0, holonomy_h0=0.5)
    assert [mu for mu, _ in base_spectrum(cfg, -0.5)] == [-1.5, -0.5, 0.5, 1.5]


@pytest.mark.parametrize("h0", [0.0, 0.5])
def test_base_spectrum_against_difference_oracle(h0):
    cfg = ModelConfig(mu_cut=3.0, holonomy_h0=h0)
    exact = np.array([mu for mu, _ in base_spectrum(cfg, -0.5)])
    oracle = periodic_dirac_eigenvalues(cfg.base_length, h0)
    oracle = oracle[np.abs(oracle) <= 3.0 + 1e-6]
    np.testing.assert_allclose(np.sort(oracle), exact, atol=1e-8)


def test_base_spectrum_zero_cut():
    assert [mu for mu, _ in base_spectrum(ModelConfig(mu_cut=0.0), -0.5)] == [0.0]


def test_enumerate_modes_small_window():
    cfg = ModelConfig(lambda_cut=1.5, mu_cut=1.0)
    modes = {(m.lam, m.mu) for m in enumerate_modes(cfg)}
    expected = {(-0.5, 0.0), (-0.5, 1.0)} | {(lam, mu) for lam in (0.5, 1.5) for mu in (-1.0, 0.0, 1.0)}
    assert modes == expected
    flagged = [m for m in enumerate_modes(cfg) if m.self_conjugate]
    assert [(m.lam, m.mu) for m in flagged] == [(-0.5, 0.0)]


def test_enumerate_modes_brute_force():
    """Quotient of the full mode set by the conjugation involution."""
    cfg = ModelConfig(lambda_cut=2.5, mu_cut=3.0)
    full = set()
    lam = -cfg.lambda_cut - 1.0
    while lam <= cfg.lambda_cut:
        if abs(lam) <= cfg.lambda_cut or abs(lam + 1) <= cfg.lambda_cut:
            for mu, _ in base_spectrum(cfg, lam):
                full.add((lam, mu))
        lam += 1.0
    classes = {frozenset({(l, m), (-(l + 1), -m)}) for l, m in full}
    reps = {(m.lam, m.mu) for m in enumerate_modes(cfg)}
    assert len(reps) == len(classes)
    for c in classes:
        assert len(c & reps) == 1


def test_enumerate_modes_empty():
    cfg = ModelConfig(lambda_cut=0.5, mu_cut=0.2, holonomy_h0=0.5)
    assert [m for m in enumerate_modes(cfg) if m.lam == -0.5] == []


def test_conjugate_mode_examples():
    assert conjugate_mode(ModeIndex(-0.5, 0.0)) == ModeIndex(-0.5, 0.0)
    c = conjugate_mode(ModeIndex(-0.5, 3.0))
    assert (c.lam, c.mu) == (-0.5, -3.0)
    c = conjugate_mode(ModeIndex(1.5, -1.0))
    assert (c.lam, c.mu) == (-2.5, 1.0)


def test_mode_rejects_integer_lambda():
    with pytest.raises(InvalidConfig):
        ModeIndex(1.0, 0.0)


def test_outer_conditions_lagrangian():
    for W in (outer_type1(2), outer_type2(2), outer_custom([1.0, 1.0])):
        W.check()
    with pytest.raises(InvalidConfig):
        outer_custom([[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]])
