import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from securecf import galois
from securecf.galois import FieldError, FieldMatrix, FieldScalar, field_arith

PRIMES = [2, 3, 5, 7]


def brute_rank(m, q):
    """Rank as log_q of the number of distinct row combinations."""
    m = np.asarray(m) % q
    span = {tuple((np.asarray(c) @ m) % q) for c in itertools.product(range(q), repeat=m.shape[0])}
    r = 0
    while q**r < len(span):
        r += 1
    return r


@pytest.mark.parametrize(
    "q,a,b,op,expected",
    [(2, 1, 1, "add", 0), (5, 3, None, "inv", 2), (3, 2, 2, "mul", 1), (7, 2, 5, "sub", 4)],
)
def test_field_arith_examples(q, a, b, op, expected):
    bb = None if b is None else FieldScalar(b, q)
    assert field_arith(FieldScalar(a, q), bb, op).value == expected


def test_field_arith_errors():
    with pytest.raises(FieldError):
        field_arith(FieldScalar(0, 5), None, "inv")
    with pytest.raises(FieldError):
        field_arith(FieldScalar(1, 5), FieldScalar(1, 3), "add")
    with pytest.raises(FieldError):
        galois.check_modulus(4)


@given(q=st.sampled_from(PRIMES), a=st.integers(1, 100))
def test_inverse_property(q, a):
    if a % q == 0:
        return
    assert (a * galois.inverse(a, q)) % q == 1


@pytest.mark.parametrize(
    "m,expected",
    [(np.eye(2, dtype=int), 2), (np.zeros((3, 3), dtype=int), 0), ([[1, 1, 0], [0, 1, 1], [1, 0, 1]], 2)],
)
def test_rank_examples(m, expected):
    assert galois.rank(m, 2) == expected


@given(
    q=st.sampled_from([2, 3]),
    rows=st.integers(1, 4),
    cols=st.integers(1, 4),
    data=st.data(),
)
def test_rank_matches_brute_force_and_is_permutation_invariant(q, rows, cols, data):
    m = np.array(data.draw(st.lists(st.integers(0, q - 1), min_size=rows * cols, max_size=rows * cols))).reshape(
        rows, cols
    )
    r = galois.rank(m, q)
    assert r == brute_rank(m, q)
    pr = data.draw(st.permutations(range(rows)))
    pc = data.draw(st.permutations(range(cols)))
    assert galois.rank(m[list(pr)][:, list(pc)], q) == r


def test_solve_membership_examples():
    x = np.array([1, 0, 1])
    assert np.array_equal(galois.solve_membership(np.eye(3, dtype=int), x, 2), x)
    assert galois.solve_membership(np.zeros((3, 2), dtype=int), x, 2) is None
    assert np.array_equal(galois.solve_membership([[1], [1], [1]], [1, 1, 1], 2), [1])


@pytest.mark.parametrize("q,size", [(2, 4), (3, 3), (5, 2)])
def test_solve_round_trip_exhaustive_for_invertible(q, size):
    rng = np.random.default_rng(q * 10 + size)
    for _ in range(5):
        while True:
            m = rng.integers(0, q, size=(size, size))
            if galois.rank(m, q) == size:
                break
        for x in galois.all_vectors(size, q):
            v = galois.solve_membership(m, x, q)
            assert v is not None
            assert np.array_equal(galois.matmul(m, v, q), x)
        inv = galois.inv_matrix(m, q)
        assert np.array_equal(galois.matmul(m, inv, q), np.eye(size, dtype=np.int64))


@given(q=st.sampled_from(PRIMES), data=st.data())
def test_nullspace_dimension_and_annihilation(q, data):
    rows, cols = data.draw(st.integers(1, 4)), data.draw(st.integers(1, 5))
    m = np.array(data.draw(st.lists(st.integers(0, q - 1), min_size=rows * cols, max_size=rows * cols))).reshape(
        rows, cols
    )
    ns = galois.nullspace(m, q)
    assert ns.shape == (cols, cols - galois.rank(m, q))
    assert not galois.matmul(m, ns, q).any()
    if ns.shape[1]:
        assert galois.rank(ns, q) == ns.shape[1]


def test_all_vectors_order_and_index():
    vs = galois.all_vectors(3, 2)
    assert vs.tolist()[:3] == [[0, 0, 0], [0, 0, 1], [0, 1, 0]]
    assert [galois.vector_index(v, 2) for v in vs] == list(range(8))


@given(q=st.sampled_from(PRIMES), rows=st.integers(0, 4), cols=st.integers(0, 4), seed=st.integers(0, 10**6))
def test_matrix_text_round_trip(q, rows, cols, seed):
    data = np.random.default_rng(seed).integers(0, q, size=(rows, cols))
    m = FieldMatrix(data, q)
    back = FieldMatrix.from_text(m.to_text())
    assert back == m and back.shape == (rows, cols)


def test_matrix_file_round_trip(tmp_path):
    m = FieldMatrix([[1, 0, 2], [2, 2, 1]], 3)
    path = tmp_path / "m.txt"
    m.save(path)
    assert FieldMatrix.load(path) == m


def test_matrix_rejects_bad_text():
    with pytest.raises(FieldError):
        FieldMatrix.from_text("2 2 2\n1 0\n")
