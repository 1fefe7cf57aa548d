"""Generator codes, code ensembles, the message/sacrifice hash split and
composition statistics of codebooks.

A code is stored as its n x k generator matrix G acting on column vectors,
so the codeword of ``v`` is ``G @ v``.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import galois
from .galois import FieldError, FieldMatrix

Composition = Tuple[int, ...]

MAX_RESAMPLE = 256
MAX_ENUM_CODEWORDS = 2**20
MAX_ENUM_ENSEMBLE = 2**24


class CodeError(ValueError):
    pass


@dataclass(frozen=True)
class GeneratorCode:
    matrix: FieldMatrix

    def __post_init__(self):
        n, k = self.matrix.shape
        if k > n:
            raise CodeError(f"k={k} exceeds n={n}")
        if galois.rank(self.matrix.data, self.q) != k:
            raise CodeError("generator matrix does not have full column rank")

    @classmethod
    def from_array(cls, data, q: int = 2) -> "GeneratorCode":
        return cls(FieldMatrix(np.asarray(data).reshape(len(data), -1), q))

    @property
    def q(self) -> int:
        return self.matrix.q

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def k(self) -> int:
        return self.matrix.shape[1]

    @property
    def G(self) -> np.ndarray:
        return self.matrix.data

    def codewords(self) -> np.ndarray:
        """All q^k codewords, row ``i`` encoding the i-th vector of :func:`galois.all_vectors`."""
        if self.q**self.k > MAX_ENUM_CODEWORDS:
            raise CodeError(f"q^k = {self.q}^{self.k} too large to enumerate")
        msgs = galois.all_vectors(self.k, self.q)
        return (msgs @ self.G.T) % self.q

    def encode(self, v) -> np.ndarray:
        return galois.matmul(self.G, v, self.q)

    def decode_codeword(self, c) -> np.ndarray | None:
        """Message ``v`` with ``G v = c``, or None when ``c`` is not a codeword."""
        return galois.solve_membership(self.G, c, self.q)


def repetition_code(n: int, q: int = 2) -> GeneratorCode:
    return GeneratorCode(FieldMatrix(np.ones((n, 1), dtype=np.int64), q))


def single_parity_check_code(n: int, q: int = 2) -> GeneratorCode:
    """Systematic (n, n-1) code whose last symbol makes the coordinate sum zero."""
    g = np.zeros((n, n - 1), dtype=np.int64)
    g[: n - 1] = np.eye(n - 1, dtype=np.int64)
    g[n - 1] = (-1) % q
    return GeneratorCode(FieldMatrix(g, q))


def identity_code(n: int, q: int = 2) -> GeneratorCode:
    return GeneratorCode(FieldMatrix(np.eye(n, dtype=np.int64), q))


HAMMING_7_4_H = np.array(
    [
        [1, 1, 0, 1, 1, 0, 0],
        [1, 0, 1, 1, 0, 1, 0],
        [0, 1, 1, 1, 0, 0, 1],
    ],
    dtype=np.int64,
)


def generator_from_parity_check(h, q: int = 2) -> GeneratorCode:
    """Generator whose image is the null space of ``h``.

    The basis comes out of reduced row echelon form, so the code is
    systematic on the non-pivot columns of ``h``.
    """
    basis = galois.nullspace(h, q)
    return GeneratorCode(FieldMatrix(basis, q))


def hamming_7_4() -> tuple[GeneratorCode, np.ndarray]:
    return generator_from_parity_check(HAMMING_7_4_H, 2), HAMMING_7_4_H.copy()


# --------------------------------------------------------------------------
# alist parity-check files


def read_alist(text: str) -> np.ndarray:
    """Parse an alist description into a dense binary parity-check matrix."""
    tokens = [ln.split() for ln in text.splitlines() if ln.strip()]
    try:
        n, m = int(tokens[0][0]), int(tokens[0][1])
        col_deg = [int(t) for t in tokens[2]]
        row_deg = [int(t) for t in tokens[3]]
        col_lists = [[int(t) for t in ln] for ln in tokens[4 : 4 + n]]
        row_lists = [[int(t) for t in ln] for ln in tokens[4 + n : 4 + n + m]]
    except (IndexError, ValueError) as exc:
        raise CodeError("malformed alist text") from exc
    if len(col_deg) != n or len(row_deg) != m or len(col_lists) != n:
        raise CodeError("alist degree lists do not match the header")
    h = np.zeros((m, n), dtype=np.int64)
    for j, entries in enumerate(col_lists):
        idx = [i for i in entries if i != 0]
        if len(idx) != col_deg[j]:
            raise CodeError(f"column {j + 1}: degree {col_deg[j]} but {len(idx)} entries")
        for i in idx:
            if not 1 <= i <= m:
                raise CodeError(f"column {j + 1}: row index {i} out of range")
            h[i - 1, j] = 1
    if row_lists:
        if len(row_lists) != m:
            raise CodeError("alist row lists truncated")
        for i, entries in enumerate(row_lists):
            idx = sorted(j for j in entries if j != 0)
            if idx != sorted(int(j) + 1 for j in np.nonzero(h[i])[0]):
                raise CodeError(f"row {i + 1} list disagrees with column lists")
    return h


def write_alist(h) -> str:
    h = np.asarray(h) % 2
    m, n = h.shape
    col_idx = [list(np.nonzero(h[:, j])[0] + 1) for j in range(n)]
    row_idx = [list(np.nonzero(h[i])[0] + 1) for i in range(m)]
    dv = max((len(c) for c in col_idx), default=0)
    dc = max((len(r) for r in row_idx), default=0)

    def pad(xs, width):
        return " ".join(str(int(x)) for x in list(xs) + [0] * (width - len(xs)))

    lines = [f"{n} {m}", f"{dv} {dc}"]
    lines.append(" ".join(str(len(c)) for c in col_idx))
    lines.append(" ".join(str(len(r)) for r in row_idx))
    lines += [pad(c, dv) for c in col_idx]
    lines += [pad(r, dc) for r in row_idx]
    return "\n".join(lines) + "\n"


def load_alist(path) -> np.ndarray:
    return read_alist(Path(path).read_text())


# --------------------------------------------------------------------------
# hash split


@dataclass(frozen=True, eq=False)
class HashSplit:
    """Linear maps separating a length-k code input into message and sacrifice.

    ``F`` hashes the input down to the message, ``F1`` embeds a message and
    ``F2`` embeds the sacrificed randomness, with ``F F1 = I`` and ``F F2 = 0``.
    """

    k: int
    kbar: int
    q: int
    F: np.ndarray
    F1: np.ndarray
    F2: np.ndarray

    @property
    def message_length(self) -> int:
        return self.k - self.kbar

    def combine(self, m, l) -> np.ndarray:
        """V = F1 m + F2 l."""
        m = galois.asfield(m, self.q).reshape(-1)
        l = galois.asfield(l, self.q).reshape(-1)
        return (self.F1 @ m + self.F2 @ l) % self.q

    def hash(self, v) -> np.ndarray:
        return galois.matmul(self.F, galois.asfield(v, self.q).reshape(-1), self.q)

    def validate(self) -> None:
        k, kb, q = self.k, self.kbar, self.q
        if self.F.shape != (k - kb, k) or self.F1.shape != (k, k - kb) or self.F2.shape != (k, kb):
            raise CodeError("hash split blocks have inconsistent shapes")
        if galois.rank(self.F, q) != k - kb:
            raise CodeError("F is not of full row rank")
        if not np.array_equal(galois.matmul(self.F, self.F1, q), np.eye(k - kb, dtype=np.int64)):
            raise CodeError("F F1 is not the identity")
        if galois.rank(np.concatenate([self.F1, self.F2], axis=1), q) != k:
            raise CodeError("[F1 | F2] is not invertible")
        if galois.matmul(self.F, self.F2, q).any():
            raise CodeError("F F2 is not zero")


def make_hash_split(k: int, kbar: int, q: int = 2) -> HashSplit:
    """Coordinate split: the message occupies the first k - kbar input symbols."""
    if not 0 <= kbar <= k:
        raise CodeError(f"need 0 <= kbar <= k, got kbar={kbar}, k={k}")
    galois.check_modulus(q)
    km = k - kbar
    eye = np.eye(k, dtype=np.int64)
    split = HashSplit(k, kbar, q, F=eye[:km].copy(), F1=eye[:, :km].copy(), F2=eye[:, km:].copy())
    return split


def hash_split_from_matrix(F, q: int = 2) -> HashSplit:
    """Complete a full-row-rank hash ``F`` to a split with F F1 = I and F F2 = 0."""
    F = galois.asfield(F, q)
    km, k = F.shape
    if galois.rank(F, q) != km:
        raise CodeError("F is not of full row rank")
    _, pivots = galois.row_echelon(F, q)
    # F restricted to its pivot columns is invertible
    F1 = np.zeros((k, km), dtype=np.int64)
    F1[pivots] = galois.inv_matrix(F[:, pivots], q)
    F2 = galois.nullspace(F, q)
    split = HashSplit(k, k - km, q, F=F, F1=F1, F2=F2)
    split.validate()
    return split


def toeplitz_matrix(params, rows: int, cols: int) -> np.ndarray:
    """rows x cols Toeplitz matrix with entry (i, j) = params[i - j + cols - 1]."""
    params = np.asarray(params, dtype=np.int64)
    if params.shape != (rows + cols - 1,):
        raise CodeError(f"need {rows + cols - 1} Toeplitz parameters, got {params.shape}")
    i = np.arange(rows)[:, None]
    j = np.arange(cols)[None, :]
    return params[i - j + cols - 1]


@dataclass(frozen=True, eq=False)
class ToeplitzHash:
    """Member of the Toeplitz universal2 family F_q^in_len -> F_q^out_len.

    With ``params`` uniform, T x is uniform for every fixed nonzero x, so two
    distinct inputs collide with probability exactly q^-out_len.
    """

    params: np.ndarray
    in_len: int
    out_len: int
    q: int = 2

    @classmethod
    def random(cls, in_len: int, out_len: int, q: int, rng: np.random.Generator) -> "ToeplitzHash":
        return cls(rng.integers(0, q, size=in_len + out_len - 1), in_len, out_len, q)

    @property
    def matrix(self) -> np.ndarray:
        return toeplitz_matrix(self.params, self.out_len, self.in_len) % self.q

    def __call__(self, x) -> np.ndarray:
        return galois.matmul(self.matrix, x, self.q)


def random_hash_split(k: int, kbar: int, q: int, seed: int) -> HashSplit:
    """Split whose hash F is a full-rank member of the Toeplitz family."""
    if not 0 <= kbar <= k:
        raise CodeError(f"need 0 <= kbar <= k, got kbar={kbar}, k={k}")
    if kbar == k:
        return make_hash_split(k, kbar, q)
    rng = np.random.default_rng(seed)
    for _ in range(MAX_RESAMPLE):
        F = ToeplitzHash.random(k, k - kbar, q, rng).matrix
        if galois.rank(F, q) == k - kbar:
            return hash_split_from_matrix(F, q)
    raise CodeError("could not draw a full-rank Toeplitz hash")


# --------------------------------------------------------------------------
# ensembles


KINDS = ("uniform", "toeplitz", "fixed-permuted")


@dataclass(frozen=True)
class EnsembleSpec:
    kind: str
    n: int
    k: int
    q: int = 2
    seed: int = 0
    base_code: Optional[GeneratorCode] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise CodeError(f"unknown ensemble kind {self.kind!r}")
        if not 0 <= self.k <= self.n:
            raise CodeError(f"need 0 <= k <= n, got k={self.k}, n={self.n}")
        galois.check_modulus(self.q)
        if (self.base_code is not None) != (self.kind == "fixed-permuted"):
            raise CodeError("base_code must be given exactly for the fixed-permuted ensemble")
        if self.base_code is not None and (
            self.base_code.n != self.n or self.base_code.k != self.k or self.base_code.q != self.q
        ):
            raise CodeError("base_code dimensions disagree with the ensemble")


def _systematic_toeplitz(params, n: int, k: int, q: int) -> np.ndarray:
    g = np.zeros((n, k), dtype=np.int64)
    g[:k] = np.eye(k, dtype=np.int64)
    if n > k:
        g[k:] = toeplitz_matrix(params, n - k, k) % q
    return g


def sample_code(spec: EnsembleSpec) -> GeneratorCode:
    """Draw one code from the ensemble, deterministically from ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    n, k, q = spec.n, spec.k, spec.q
    if spec.kind == "uniform":
        for _ in range(MAX_RESAMPLE):
            g = rng.integers(0, q, size=(n, k))
            if galois.rank(g, q) == k:
                return GeneratorCode(FieldMatrix(g, q))
        raise CodeError(f"no rank-{k} matrix after {MAX_RESAMPLE} draws")
    if spec.kind == "toeplitz":
        params = rng.integers(0, q, size=max(n - 1, 0)) if n > k else np.zeros(0, dtype=np.int64)
        return GeneratorCode(FieldMatrix(_systematic_toeplitz(params, n, k, q), q))
    perm = rng.permutation(n)
    return GeneratorCode(FieldMatrix(spec.base_code.G[perm], q))


def _ensemble_members(spec: EnsembleSpec):
    """Yield batches of generator matrices, each ensemble member once with equal weight."""
    n, k, q = spec.n, spec.k, spec.q
    if spec.kind == "uniform":
        total = q ** (n * k)
        batch = 4096
        powers = q ** np.arange(n * k - 1, -1, -1, dtype=np.int64)
        for start in range(0, total, batch):
            idx = np.arange(start, min(start + batch, total), dtype=np.int64)
            mats = ((idx[:, None] // powers[None, :]) % q).reshape(-1, n, k)
            yield mats
    elif spec.kind == "toeplitz":
        if n == k:
            yield np.eye(k, dtype=np.int64)[None]
            return
        for params in galois.all_vectors(n - 1, q):
            yield _systematic_toeplitz(params, n, k, q)[None]
    else:
        base = spec.base_code.G
        for perm in itertools.permutations(range(n)):
            yield base[list(perm)][None]


def _ensemble_size(spec: EnsembleSpec) -> int:
    if spec.kind == "uniform":
        return spec.q ** (spec.n * spec.k)
    if spec.kind == "toeplitz":
        return spec.q ** max(spec.n - 1, 0) if spec.n > spec.k else 1
    return math.factorial(spec.n)


@dataclass(frozen=True)
class MembershipEstimate:
    probability: float
    exact: Optional[Fraction]
    samples: Optional[int] = None


def membership_table(spec: EnsembleSpec, full_rank_only: bool = True) -> List[Fraction]:
    """Exact Pr{x in Im G} for every x in F_q^n, indexed as :func:`galois.vector_index`.

    One pass over the enumerated ensemble; limited to 2^24 members.
    """
    n, k, q = spec.n, spec.k, spec.q
    if _ensemble_size(spec) > MAX_ENUM_ENSEMBLE:
        raise CodeError("ensemble too large for exact enumeration")
    msgs = galois.all_vectors(k, q)
    powers = q ** np.arange(n - 1, -1, -1, dtype=np.int64)
    hits = np.zeros(q**n, dtype=np.int64)
    total = 0
    for mats in _ensemble_members(spec):
        words = np.einsum("bnk,mk->bmn", mats, msgs) % q
        if spec.kind == "uniform" and full_rank_only:
            keep = ~(~words[:, 1:].any(axis=2)).any(axis=1)
            words = words[keep]
        idx = words @ powers
        b = idx.shape[0]
        # a word counts once per member even when G is rank deficient
        keys = np.unique(idx + (np.arange(b, dtype=np.int64) * q**n)[:, None])
        hits += np.bincount(keys % q**n, minlength=q**n)
        total += b
    return [Fraction(int(h), total) for h in hits]


def membership_probability(
    spec: EnsembleSpec,
    x,
    full_rank_only: bool = True,
    samples: int = 20000,
) -> MembershipEstimate:
    """Pr{x in Im G} over the ensemble.

    Exact enumeration when the ensemble has at most 2^24 members, Monte Carlo
    over ``samples`` codes drawn with seeds derived from ``spec.seed``
    otherwise.  ``full_rank_only`` restricts the uniform ensemble to rank-k
    matrices, matching :func:`sample_code`; switch it off for the plain
    uniform matrix family.
    """
    q = spec.q
    x = galois.asfield(x, q).reshape(-1)
    if x.shape != (spec.n,):
        raise FieldError(f"x must have length {spec.n}")
    if not x.any():
        raise CodeError("x = 0 lies in every image; probability is trivially 1")
    if _ensemble_size(spec) <= MAX_ENUM_ENSEMBLE:
        frac = membership_table(spec, full_rank_only)[galois.vector_index(x, q)]
        return MembershipEstimate(float(frac), frac, None)
    ss = np.random.SeedSequence(spec.seed)
    hits = 0
    for child in ss.spawn(samples):
        sub = EnsembleSpec(spec.kind, spec.n, spec.k, q, int(child.generate_state(1, np.uint64)[0]), spec.base_code)
        code = sample_code(sub)
        if code.decode_codeword(x) is not None:
            hits += 1
    return MembershipEstimate(hits / samples, None, samples)


# --------------------------------------------------------------------------
# compositions and the deviation A


def composition(x, q: int) -> Composition:
    x = np.asarray(x).reshape(-1)
    return tuple(int((x == t).sum()) for t in range(q))


def multinomial(counts) -> int:
    out = 1
    total = 0
    for c in counts:
        total += c
        out *= math.comb(total, c)
    return out


def composition_counts(code: GeneratorCode) -> Dict[Composition, int]:
    """N(lambda, g) for every composition of a nonzero codeword."""
    if code.k == 0:
        return {}
    words = code.codewords()
    n, q = code.n, code.q
    hist = np.stack([(words == t).sum(axis=1) for t in range(q)], axis=1)
    counts = Counter(map(tuple, hist.tolist()))
    zero = (n,) + (0,) * (q - 1)
    counts.pop(zero, None)
    return {tuple(int(c) for c in lam): int(v) for lam, v in sorted(counts.items())}


def _argmax_ratio(counts: Dict[Composition, float], n: int, k: int, q: int):
    best_val, best_lam = None, None
    for lam in sorted(counts):
        val = Fraction(counts[lam]) * q ** (n - k) / multinomial(lam)
        if best_val is None or val > best_val:
            best_val, best_lam = val, lam
    return best_val, best_lam


def deviation_A(code: GeneratorCode) -> tuple[float, Composition]:
    """Largest ratio N(lambda, g) q^(n-k) / multinomial(n; lambda).

    Under the randomly permuted ensemble built on ``code`` the expectation of
    N(lambda, G) equals N(lambda, g), so this is that ensemble's A.
    """
    if code.k == 0:
        raise CodeError("deviation A is undefined for k = 0")
    val, lam = _argmax_ratio(composition_counts(code), code.n, code.k, code.q)
    return float(val), lam


def ensemble_deviation_A(spec: EnsembleSpec, samples: int) -> tuple[float, Composition]:
    """Monte Carlo A for an ensemble: average N(lambda, G) over codes, then maximize."""
    if spec.k == 0:
        raise CodeError("deviation A is undefined for k = 0")
    totals: Counter = Counter()
    ss = np.random.SeedSequence(spec.seed)
    for child in ss.spawn(samples):
        sub = EnsembleSpec(spec.kind, spec.n, spec.k, spec.q, int(child.generate_state(1, np.uint64)[0]), spec.base_code)
        totals.update(composition_counts(sample_code(sub)))
    mean = {lam: Fraction(v, samples) for lam, v in totals.items()}
    val, lam = _argmax_ratio(mean, spec.n, spec.k, spec.q)
    return float(val), lam


def encode_node(v, code: GeneratorCode, e) -> np.ndarray:
    """Channel input G v + e of one node."""
    q = code.q
    v = galois.asfield(v, q).reshape(-1)
    e = galois.asfield(e, q).reshape(-1)
    if v.shape != (code.k,) or e.shape != (code.n,):
        raise FieldError(f"expected v of length {code.k} and e of length {code.n}")
    return (code.G @ v + e) % q
