import numpy as np
import pytest
from hypothesis import given, strategies as st

from jordanhydro.blocks import (
    BlockStructure,
    MultiIndex,
    c_symmetry_residual,
    circ_product,
    euler_field,
    flat_index,
    hankel_generators,
    mult_operator,
    multi_index,
    structure_constant,
    unit_vector,
)

sizes = st.lists(st.integers(1, 4), min_size=1, max_size=3)
finite = st.floats(-10, 10, allow_nan=False)


@st.composite
def vectors(draw, count=1):
    bs = BlockStructure(draw(sizes))
    vecs = [np.array(draw(st.lists(finite, min_size=bs.n, max_size=bs.n))) for _ in range(count)]
    return bs, vecs


def test_known_values():
    bs = BlockStructure([3, 2])
    assert flat_index(bs, MultiIndex(1, 2)) == 4
    assert multi_index(bs, 5) == MultiIndex(2, 2)
    assert structure_constant(bs, MultiIndex(3, 1), MultiIndex(2, 1), MultiIndex(2, 1)) == 1
    assert structure_constant(bs, MultiIndex(2, 1), MultiIndex(1, 1), MultiIndex(1, 2)) == 0
    assert list(unit_vector(bs)) == [1, 0, 0, 1, 0]
    assert euler_field([1, 2, 3]) == [1, 2, 3]
    V = mult_operator(BlockStructure([3]), [1.0, 2.0, 3.0])
    assert V.tolist() == [[1, 0, 0], [2, 1, 0], [3, 2, 1]]


def test_index_errors():
    bs = BlockStructure([2, 1])
    with pytest.raises(IndexError):
        bs.flat_index(3, 1)
    with pytest.raises(IndexError):
        bs.flat_index(1, 3)
    with pytest.raises(IndexError):
        bs.multi_index(0)
    with pytest.raises(ValueError):
        BlockStructure([])
    with pytest.raises(ValueError):
        BlockStructure([2, 0])
    with pytest.raises(ValueError):
        circ_product(bs, [1, 2], [1, 2, 3])


def test_sorted_records_permutation():
    bs, perm = BlockStructure([1, 3, 2]).sorted()
    assert bs.sizes == (3, 2, 1)
    assert perm == (2, 3, 1)


@given(sizes)
def test_index_roundtrip(ms):
    bs = BlockStructure(ms)
    for k in range(1, bs.n + 1):
        assert flat_index(bs, multi_index(bs, k)) == k
    assert [str(m) for m in bs.indices()] == [bs.label(k) for k in range(1, bs.n + 1)]


@given(vectors(3))
def test_product_is_commutative_associative_unital(args):
    bs, (X, Y, Z) = args
    XY = np.array(circ_product(bs, X, Y))
    assert np.allclose(XY, circ_product(bs, Y, X))
    left = circ_product(bs, XY, Z)
    right = circ_product(bs, X, circ_product(bs, Y, Z))
    assert np.allclose(left, right, atol=1e-9 * (1 + np.max(np.abs(left))))
    assert np.allclose(circ_product(bs, unit_vector(bs), X), X)


@given(vectors(2))
def test_mult_operator_matches_product(args):
    bs, (X, Y) = args
    assert np.allclose(mult_operator(bs, X) @ Y, circ_product(bs, X, Y))
    c = bs.structure_constants
    assert np.allclose(np.einsum("ijk,k->ij", c, X), mult_operator(bs, X))


@given(vectors(1))
def test_hankel_characterisation(args):
    # M_ij = c^s_ij theta_s is c-symmetric and recovers theta
    bs, (theta,) = args
    M = np.einsum("sij,s->ij", bs.structure_constants, theta)
    assert c_symmetry_residual(bs, M) == 0.0
    assert np.allclose(hankel_generators(bs, M), theta)


def test_c_symmetry_brute_force_both_directions():
    rng = np.random.default_rng(3)
    for ms in ([1], [2], [3], [2, 1], [4], [2, 2], [3, 1]):
        bs = BlockStructure(ms)
        c = bs.structure_constants
        for _ in range(20):
            M = rng.normal(size=(bs.n, bs.n))
            M = M + M.T
            hankel = np.einsum("sij,s->ij", c, hankel_generators(bs, M))
            assert (c_symmetry_residual(bs, M) < 1e-12) == np.allclose(M, hankel)
            assert c_symmetry_residual(bs, hankel) < 1e-12
