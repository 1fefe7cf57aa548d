import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from securecf import codes, galois
from securecf.codes import CodeError, EnsembleSpec


def test_make_hash_split_examples():
    s = codes.make_hash_split(2, 1, 2)
    assert s.F.tolist() == [[1, 0]] and s.F1.tolist() == [[1], [0]] and s.F2.tolist() == [[0], [1]]
    s = codes.make_hash_split(3, 0, 2)
    assert np.array_equal(s.F, np.eye(3)) and s.F2.shape == (3, 0)
    s = codes.make_hash_split(3, 3, 2)
    assert s.F.shape == (0, 3) and np.array_equal(s.F2, np.eye(3))
    with pytest.raises(CodeError):
        codes.make_hash_split(2, 3, 2)


@pytest.mark.parametrize("k,kbar,q", [(3, 1, 2), (4, 2, 2), (2, 1, 3), (3, 0, 5), (3, 3, 2)])
@pytest.mark.parametrize("random_f", [False, True])
def test_hash_split_recovers_message_exhaustively(k, kbar, q, random_f):
    s = codes.random_hash_split(k, kbar, q, seed=11) if random_f else codes.make_hash_split(k, kbar, q)
    s.validate()
    for m in galois.all_vectors(k - kbar, q):
        for l in galois.all_vectors(kbar, q):
            assert np.array_equal(s.hash(s.combine(m, l)), m)


def test_hash_split_from_matrix_completion():
    F = np.array([[1, 1, 0, 1], [0, 1, 1, 1]])
    s = codes.hash_split_from_matrix(F, 2)
    assert s.kbar == 2
    s.validate()


def test_toeplitz_hash_is_linear_and_toeplitz():
    h = codes.ToeplitzHash.random(5, 3, 2, np.random.default_rng(0))
    t = h.matrix
    assert t.shape == (3, 5)
    assert all(t[i, j] == t[i + 1, j + 1] for i in range(2) for j in range(4))
    a, b = np.array([1, 0, 1, 1, 0]), np.array([0, 1, 1, 0, 1])
    assert np.array_equal(h(a ^ b), h(a) ^ h(b))


def test_toeplitz_family_is_universal2():
    # for every nonzero x the hash output is 0 with probability exactly q^-out over the family
    in_len, out_len, q = 4, 2, 2
    for x in galois.all_vectors(in_len, q)[1:]:
        zeros = sum(
            not codes.ToeplitzHash(p, in_len, out_len, q)(x).any()
            for p in galois.all_vectors(in_len + out_len - 1, q)
        )
        assert Fraction(zeros, q ** (in_len + out_len - 1)) <= Fraction(1, q**out_len)


def test_sample_code_examples():
    a = codes.sample_code(EnsembleSpec("uniform", 4, 2, 2, seed=5))
    b = codes.sample_code(EnsembleSpec("uniform", 4, 2, 2, seed=5))
    assert np.array_equal(a.G, b.G) and a.k == 2
    t = codes.sample_code(EnsembleSpec("toeplitz", 3, 1, 2, seed=1))
    assert t.G[0, 0] == 1
    rep = codes.repetition_code(3)
    p = codes.sample_code(EnsembleSpec("fixed-permuted", 3, 1, 2, seed=9, base_code=rep))
    assert np.array_equal(p.G, rep.G)


def test_ensemble_spec_validation():
    with pytest.raises(CodeError):
        EnsembleSpec("bogus", 3, 1)
    with pytest.raises(CodeError):
        EnsembleSpec("uniform", 2, 3)
    with pytest.raises(CodeError):
        EnsembleSpec("fixed-permuted", 3, 1)


def test_membership_small_uniform_against_brute_force():
    spec = EnsembleSpec("uniform", 2, 1, 2)
    plain = codes.membership_probability(spec, [1, 0], full_rank_only=False)
    assert plain.exact == Fraction(1, 4) == oracles.membership_uniform(2, 1, 2, (1, 0), False)
    cond = codes.membership_probability(spec, [1, 0])
    assert cond.exact == Fraction(1, 3) == oracles.membership_uniform(2, 1, 2, (1, 0), True)


@pytest.mark.parametrize("n,k", [(3, 1), (3, 2), (4, 2)])
@pytest.mark.parametrize("full_rank_only", [False, True])
def test_membership_matches_brute_force(n, k, full_rank_only):
    spec = EnsembleSpec("uniform", n, k, 2)
    for x in galois.all_vectors(n, 2)[1:]:
        got = codes.membership_probability(spec, x, full_rank_only=full_rank_only).exact
        assert got == oracles.membership_uniform(n, k, 2, tuple(x), full_rank_only)


@pytest.mark.parametrize("kind", ["uniform", "toeplitz"])
@pytest.mark.parametrize("n,k", [(4, 2), (5, 3), (6, 3), (6, 1)])
def test_universal2_exact(kind, n, k):
    spec = EnsembleSpec(kind, n, k, 2)
    table = codes.membership_table(spec)
    assert table[0] == 1
    assert max(table[1:]) <= Fraction(2**k, 2**n)


def test_membership_table_agrees_with_single_queries():
    spec = EnsembleSpec("uniform", 3, 2, 2)
    table = codes.membership_table(spec, full_rank_only=False)
    for i, x in enumerate(galois.all_vectors(3, 2)[1:], 1):
        assert table[i] == codes.membership_probability(spec, x, full_rank_only=False).exact


def test_membership_fixed_permuted_repetition():
    spec = EnsembleSpec("fixed-permuted", 3, 1, 2, base_code=codes.repetition_code(3))
    assert codes.membership_probability(spec, [1, 1, 1]).exact == 1
    with pytest.raises(CodeError):
        codes.membership_probability(spec, [0, 0, 0])


def test_composition_counts_examples():
    assert codes.composition_counts(codes.repetition_code(3)) == {(0, 3): 1}
    assert codes.composition_counts(codes.single_parity_check_code(3)) == {(1, 2): 3}
    empty = codes.GeneratorCode.from_array(np.zeros((3, 0), dtype=int))
    assert codes.composition_counts(empty) == {}


def test_deviation_examples():
    assert codes.deviation_A(codes.repetition_code(3)) == (4.0, (0, 3))
    assert codes.deviation_A(codes.single_parity_check_code(3)) == (2.0, (1, 2))


@given(n=st.integers(2, 6), data=st.data(), q=st.sampled_from([2, 3]))
def test_deviation_properties(n, data, q):
    k = data.draw(st.integers(1, min(n, 3 if q == 2 else 2)))
    seed = data.draw(st.integers(0, 2**32))
    code = codes.sample_code(EnsembleSpec("uniform", n, k, q, seed=seed))
    A, lam = codes.deviation_A(code)
    assert Fraction(A).limit_denominator(10**6) == oracles.deviation(code.G, q)
    assert math.log(A) <= (n - k) * math.log(q) + 1e-12
    assert sum(codes.composition_counts(code).values()) == q**k - 1


def test_ensemble_deviation_averages_before_max():
    # the fixed-permuted ensemble of a code has A equal to the code's own A
    base = codes.single_parity_check_code(4)
    spec = EnsembleSpec("fixed-permuted", 4, 3, 2, seed=2, base_code=base)
    assert codes.ensemble_deviation_A(spec, 50)[0] == pytest.approx(codes.deviation_A(base)[0])
    # uniform ensemble: averaging first stays close to 1, far below the per-code worst case
    avg, _ = codes.ensemble_deviation_A(EnsembleSpec("uniform", 6, 2, 2, seed=3), 400)
    assert avg < 1.6


def test_encode_node_examples():
    rep = codes.repetition_code(3)
    assert codes.encode_node([0], rep, [0, 0, 0]).tolist() == [0, 0, 0]
    assert codes.encode_node([1], rep, [0, 1, 0]).tolist() == [1, 0, 1]
    ident = codes.identity_code(4, 3)
    assert codes.encode_node([2, 0, 1, 1], ident, [0] * 4).tolist() == [2, 0, 1, 1]


def test_generator_requires_full_rank():
    with pytest.raises(CodeError):
        codes.GeneratorCode.from_array([[1, 1], [1, 1]])


def test_decode_codeword_round_trip():
    code, _ = codes.hamming_7_4()
    for v in galois.all_vectors(4, 2):
        assert np.array_equal(code.decode_codeword(code.encode(v)), v)
    assert code.decode_codeword([1, 0, 0, 0, 0, 0, 0]) is None


def test_hamming_parity_annihilates_generator():
    code, h = codes.hamming_7_4()
    assert not galois.matmul(h, code.G, 2).any()
    assert code.n == 7 and code.k == 4


@given(seed=st.integers(0, 10**6), rows=st.integers(1, 5), cols=st.integers(2, 9))
def test_alist_round_trip(seed, rows, cols):
    h = np.random.default_rng(seed).integers(0, 2, size=(rows, cols))
    h[:, 0] = 1  # no empty rows
    assert np.array_equal(codes.read_alist(codes.write_alist(h)), h)


def test_alist_rejects_inconsistent_degrees():
    text = codes.write_alist(np.array([[1, 1, 0], [0, 1, 1]]))
    lines = text.splitlines()
    lines[2] = "1 1 1"  # column degrees no longer match the rows
    with pytest.raises(CodeError):
        codes.read_alist("\n".join(lines))


def test_generator_from_parity_check():
    h = np.array([[1, 1, 0], [0, 1, 1]])
    g = codes.generator_from_parity_check(h)
    assert g.k == 1 and oracles.span(g.G, 2) == {(0, 0, 0), (1, 1, 1)}
