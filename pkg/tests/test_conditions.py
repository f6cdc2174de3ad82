import numpy as np
import pytest

from ramified_dirac.conditions import (
    ChiralityOperator,
    bag_fiber,
    chiral_branching_index,
    chirality_split,
    complete_plus,
    equal_conditions,
    fredholm_delta_index,
    is_lagrangian,
    make_aps,
    make_bag,
    make_custom,
    make_local,
    make_maximal,
    make_minimal,
    same_subspace,
    symbol_regularity_check,
    symplectic_complement,
)
from ramified_dirac.errors import DimensionMismatch, NotEpsInvariant, TailNotTransverse
from ramified_dirac.model_config import ModelConfig, convention_J, outer_type1
from ramified_dirac.spectral import calderon_family

MUS = (0.0, 0.5, 1.0, 3.0, 5.0)


def span(*vecs):
    return np.array(vecs, dtype=complex).T


def catalog(d=1):
    J = convention_J(d)
    ker = np.kron(np.array([[1.0], [0.0]]), np.eye(d))
    out = [
        make_minimal(d),
        make_maximal(d),
        make_aps(d),
        make_aps(d, kernel=ker),
        make_bag(+1, d),
        make_bag(-1, d),
        make_local(np.kron(np.array([[1.0], [0.0]]), np.eye(d)), d),
        make_local(np.kron(np.array([[0.0], [1.0]]), np.eye(d)), d),
        make_custom({1.0: J[:, :d]}, d, default=np.kron(np.array([[1.0], [1.0]]), np.eye(d))),
    ]
    return out


# ---------------------------------------------------------------- construction


def test_aps_blocks():
    R = make_aps(1)
    assert same_subspace(R.subspace(5.0), span([1, 1]) / np.sqrt(2))
    assert R.subspace(0.0).shape[1] == 0
    assert symplectic_complement(R).subspace(0.0).shape[1] == 2
    for mu in (0.5, 5.0):
        assert equal_conditions(symplectic_complement(R), R, (mu,))


def test_minimal_maximal():
    for d in (1, 3):
        assert make_minimal(d).subspace(2.0).shape == (2 * d, 0)
        np.testing.assert_array_equal(make_maximal(d).subspace(2.0), np.eye(2 * d))
        assert symplectic_complement(make_minimal(d)).kind == "Maximal"
        assert equal_conditions(symplectic_complement(make_minimal(d)), make_maximal(d), MUS)
        assert not is_lagrangian(make_minimal(d), MUS)


def test_bag_fibers():
    Qp, Qm = bag_fiber(+1), bag_fiber(-1)
    J = convention_J(1)
    # eigenvectors of i J with eigenvalue +1 and -1
    np.testing.assert_allclose(1j * J @ Qp, Qp, atol=1e-15)
    np.testing.assert_allclose(1j * J @ Qm, -Qm, atol=1e-15)
    np.testing.assert_allclose(Qp.conj().T @ Qm, 0.0, atol=1e-15)
    Rp = make_bag(+1)
    assert equal_conditions(symplectic_complement(Rp), make_bag(-1), MUS)
    assert not is_lagrangian(Rp, MUS)
    assert symbol_regularity_check(Qp)


def test_local_examples():
    R = make_local(span([1, 0]))
    assert all(same_subspace(R.subspace(mu), span([1, 0])) for mu in MUS)
    assert is_lagrangian(R, MUS)
    G = symplectic_complement(R)
    assert same_subspace(G.subspace(2.0), span([1, 0]))
    # in d = 2 the f-slot block is Lagrangian and its complement is itself;
    # the g-slot pairs with it under J
    f2 = make_local(np.kron(span([1, 0]), np.eye(2)), 2)
    assert is_lagrangian(f2, MUS)
    with pytest.raises(DimensionMismatch):
        make_local(np.ones(3), 1)


def test_lagrangian_examples():
    assert is_lagrangian(make_aps(1, kernel=span([1, 0])), MUS)
    assert not is_lagrangian(make_aps(1), MUS)
    assert not is_lagrangian(make_maximal(1), MUS)


@pytest.mark.parametrize("d", [1, 2])
def test_complement_involutive(d):
    for R in catalog(d):
        GG = symplectic_complement(symplectic_complement(R))
        assert equal_conditions(GG, R, MUS), R.kind


def test_orthonormal_bases():
    for R in catalog(2):
        for mu in MUS:
            Q = R.subspace(mu)
            np.testing.assert_allclose(Q.conj().T @ Q, np.eye(Q.shape[1]), atol=1e-12)


# ---------------------------------------------------------------- symbol criterion


def test_symbol_check_examples():
    assert symbol_regularity_check(bag_fiber(+1))
    assert symbol_regularity_check(bag_fiber(-1))
    assert not symbol_regularity_check(np.eye(2))
    assert symbol_regularity_check(span([1, 0]))
    assert symbol_regularity_check(span([0, 1]))
    assert not symbol_regularity_check(span([1, 1]))
    assert not symbol_regularity_check(span([1, -1]))


# ---------------------------------------------------------------- chirality


def test_default_chirality():
    eps = ChiralityOperator.default(2).check()
    J = convention_J(2)
    np.testing.assert_allclose(eps.eps @ J + J @ eps.eps, 0.0)
    with pytest.raises(NotEpsInvariant):
        ChiralityOperator(np.eye(2)).check()


def test_chirality_split_and_complete():
    eps = ChiralityOperator.default(1)
    Hp, Hm = eps.eigenspace(+1), eps.eigenspace(-1)
    # eps-invariant conditions split and reassemble
    for R in (make_aps(1), make_maximal(1), make_minimal(1), make_aps(1, kernel=Hp)):
        Rp, Rm = chirality_split(R, eps, MUS)
        for mu in MUS:
            both = np.hstack([Rp.subspace(mu), Rm.subspace(mu)])
            assert both.shape[1] == R.subspace(mu).shape[1]
            if both.shape[1]:
                assert same_subspace(both, R.subspace(mu))
    with pytest.raises(NotEpsInvariant):
        chirality_split(make_local(span([1, 0])), eps, MUS)

    zero = complete_plus(make_minimal(1), eps)
    assert all(same_subspace(zero.subspace(mu), Hm) for mu in MUS)
    full = complete_plus(make_local(Hp), eps)
    assert all(same_subspace(full.subspace(mu), Hp) for mu in MUS)
    assert is_lagrangian(zero, MUS) and is_lagrangian(full, MUS)
    with pytest.raises(NotEpsInvariant):
        complete_plus(make_local(Hm), eps).subspace(1.0)


def test_chiral_index_default_is_zero():
    assert chiral_branching_index(ModelConfig()) == 0


# ---------------------------------------------------------------- Fredholm index


@pytest.mark.parametrize("d", [1, 2])
def test_fredholm_index_examples(d):
    cfg = ModelConfig(fiber_dim=d, outer_bc=outer_type1(d), mu_cut=16.0)
    Lam = calderon_family(cfg)
    assert fredholm_delta_index(make_aps(d), Lam, cfg) == -d
    ker = np.kron(span([1, 0]), np.eye(d))
    assert fredholm_delta_index(make_aps(d, kernel=ker), Lam, cfg) == 0
    J = convention_J(d)
    comp = make_custom({mu: J @ Q for mu, Q in Lam.items()}, d)
    assert fredholm_delta_index(comp, Lam, cfg) == 0


def test_fredholm_index_tail_check():
    cfg = ModelConfig(mu_cut=16.0)
    Lam = calderon_family(cfg)
    with pytest.raises(TailNotTransverse):
        fredholm_delta_index(make_maximal(1), Lam, cfg)


def test_fredholm_index_deformation():
    cfg = ModelConfig(mu_cut=16.0)
    Lam = calderon_family(cfg)
    seen = []
    for t in np.linspace(0.0, np.pi, 37):
        R = make_local(span([np.cos(t), np.sin(t)]))
        try:
            seen.append(fredholm_delta_index(R, Lam, cfg))
        except TailNotTransverse:
            continue
    assert seen and len(set(seen)) == 1
