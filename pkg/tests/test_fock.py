import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kerrfeedback.fock import (FockOperator, ModeSpace, SpaceMismatchError, annihilator, basis_projector,
                               commutator, embed, expectation, identity, ladder_matrix, number)


def random_matrix(rng, n):
    return rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))


def test_single_mode_ladder_entries():
    a = annihilator(ModeSpace((3,)), 0).matrix
    expected = np.zeros((3, 3))
    expected[0, 1] = 1.0
    expected[1, 2] = np.sqrt(2)
    assert np.array_equal(a, expected)


def test_second_mode_embedding_is_identity_kron_ladder():
    a2 = np.array([[0, 1], [0, 0]])
    got = annihilator(ModeSpace((2, 2)), 1).matrix
    assert np.array_equal(got, np.kron(np.eye(2), a2))


def test_number_operator_diagonal():
    n = number(ModeSpace((3,)), 0).matrix
    np.testing.assert_allclose(n, np.diag([0, 1, 2]), atol=1e-15)


def test_embed_identity_and_ordering():
    space = ModeSpace((2, 3))
    assert np.array_equal(embed(space, 0, np.eye(2)).matrix, np.eye(6))
    sigma = np.array([[0, 1], [1, 0]])
    s22 = ModeSpace((2, 2))
    assert np.array_equal(embed(s22, 0, sigma).matrix, np.kron(sigma, np.eye(2)))
    s33 = ModeSpace((3, 3))
    assert embed(s33, 1, ladder_matrix(3)) == annihilator(s33, 1)


def test_basis_index_is_mode0_major():
    space = ModeSpace((3, 4))
    assert space.basis_index((2, 1)) == 2 * 4 + 1
    assert space.occupations()[9].tolist() == [2, 1]
    # the number operator of mode 0 reads n_a off that layout
    assert number(space, 0).matrix[9, 9] == pytest.approx(2)


@pytest.mark.parametrize("dims", [(), (1,), (3, 1)])
def test_mode_space_rejects_bad_dims(dims):
    with pytest.raises(ValueError):
        ModeSpace(dims)


def test_embed_errors():
    space = ModeSpace((2, 3))
    with pytest.raises(ValueError):
        embed(space, 1, np.eye(2))
    with pytest.raises(IndexError):
        annihilator(space, 2)


def test_space_mismatch_is_an_error():
    a = annihilator(ModeSpace((2, 2)), 0)
    b = annihilator(ModeSpace((3, 2)), 0)
    for op in (lambda: a @ b, lambda: a + b, lambda: a - b, lambda: commutator(a, b)):
        with pytest.raises(SpaceMismatchError):
            op()


def test_operators_are_immutable():
    a = annihilator(ModeSpace((3,)), 0)
    with pytest.raises(ValueError):
        a.matrix[0, 1] = 5.0
    with pytest.raises(AttributeError):
        a.matrix = np.zeros((3, 3))


@pytest.mark.parametrize("N", [2, 3, 5, 8])
def test_truncated_commutator(N):
    a = annihilator(ModeSpace((N,)), 0)
    c = commutator(a, a.dag()).matrix
    expected = np.eye(N)
    expected[-1, -1] = -(N - 1)
    # sqrt(n)^2 is exact up to one rounding
    np.testing.assert_allclose(c, expected, rtol=0, atol=1e-14)


def test_expectation_examples():
    space = ModeSpace((4,))
    n = number(space, 0)
    assert expectation(basis_projector(space, (0,)), n) == 0
    assert expectation(basis_projector(space, (2,)), n) == pytest.approx(2.0)
    s3 = ModeSpace((3,))
    mixed = identity(s3) / 3
    assert expectation(mixed, number(s3, 0)) == pytest.approx(1.0)


def test_expectation_checks_trace_and_space():
    space = ModeSpace((3,))
    with pytest.raises(ValueError):
        expectation(identity(space), number(space, 0))
    with pytest.raises(SpaceMismatchError):
        expectation(basis_projector(space, (0,)), number(ModeSpace((4,)), 0))


dims_strategy = st.lists(st.integers(2, 4), min_size=1, max_size=3).map(tuple)


@settings(max_examples=40, deadline=None)
@given(dims=dims_strategy, seed=st.integers(0, 2**32 - 1))
def test_adjoint_involution_and_antihomomorphism(dims, seed):
    rng = np.random.default_rng(seed)
    space = ModeSpace(dims)
    x = FockOperator(space, random_matrix(rng, space.total_dim))
    y = FockOperator(space, random_matrix(rng, space.total_dim))
    assert x.dag().dag() == x
    assert (x @ y).dag().allclose(y.dag() @ x.dag(), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(d0=st.integers(2, 4), d1=st.integers(2, 4), seed=st.integers(0, 2**32 - 1))
def test_embedding_respects_products_and_modes_commute(d0, d1, seed):
    rng = np.random.default_rng(seed)
    space = ModeSpace((d0, d1))
    A, B = random_matrix(rng, d0), random_matrix(rng, d0)
    assert embed(space, 0, A @ B).allclose(embed(space, 0, A) @ embed(space, 0, B), atol=1e-12)
    C = random_matrix(rng, d1)
    comm = commutator(embed(space, 0, A), embed(space, 1, C)).matrix
    assert np.max(np.abs(comm)) < 1e-12
