"""Arithmetic and linear algebra over a prime field F_q.

Vectors and matrices are plain integer numpy arrays paired with an explicit
modulus ``q``; :class:`FieldMatrix` bundles the two where a self-describing
value is needed (file IO, code containers).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class FieldError(ValueError):
    """Raised on modulus mismatches, zero inverses and shape errors."""


def is_prime(q: int) -> bool:
    if q < 2:
        return False
    i = 2
    while i * i <= q:
        if q % i == 0:
            return False
        i += 1
    return True


def check_modulus(q: int) -> int:
    q = int(q)
    if not is_prime(q):
        raise FieldError(f"modulus {q} is not prime")
    return q


def inverse(a: int, q: int) -> int:
    a %= q
    if a == 0:
        raise FieldError("inverse of zero")
    return pow(a, q - 2, q)


@dataclass(frozen=True)
class FieldScalar:
    value: int
    q: int

    def __post_init__(self):
        check_modulus(self.q)
        object.__setattr__(self, "value", int(self.value) % self.q)

    def _other(self, other) -> int:
        if isinstance(other, FieldScalar):
            if other.q != self.q:
                raise FieldError(f"modulus mismatch: {self.q} vs {other.q}")
            return other.value
        return int(other) % self.q

    def __add__(self, other):
        return FieldScalar(self.value + self._other(other), self.q)

    def __sub__(self, other):
        return FieldScalar(self.value - self._other(other), self.q)

    def __mul__(self, other):
        return FieldScalar(self.value * self._other(other), self.q)

    def __neg__(self):
        return FieldScalar(-self.value, self.q)

    def inv(self) -> "FieldScalar":
        return FieldScalar(inverse(self.value, self.q), self.q)

    def __int__(self):
        return self.value


def field_arith(a: FieldScalar, b: FieldScalar | None, op: str) -> FieldScalar:
    """Apply ``op`` in {add, sub, mul, inv}; ``b`` is ignored for inv."""
    if op == "inv":
        return a.inv()
    if b is None:
        raise FieldError(f"operation {op!r} needs two operands")
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise FieldError(f"unknown operation {op!r}")


def asfield(a, q: int) -> np.ndarray:
    return np.mod(np.asarray(a, dtype=np.int64), q)


def matmul(a, b, q: int) -> np.ndarray:
    return np.mod(asfield(a, q) @ asfield(b, q), q)


def row_echelon(m, q: int) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form of ``m`` over F_q and its pivot columns."""
    a = asfield(m, q).copy()
    if a.ndim != 2:
        raise FieldError("expected a 2-d matrix")
    rows, cols = a.shape
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r >= rows:
            break
        nz = np.nonzero(a[r:, c])[0]
        if nz.size == 0:
            continue
        p = r + int(nz[0])
        if p != r:
            a[[r, p]] = a[[p, r]]
        a[r] = (a[r] * inverse(int(a[r, c]), q)) % q
        others = np.nonzero(a[:, c])[0]
        others = others[others != r]
        if others.size:
            a[others] = (a[others] - np.outer(a[others, c], a[r])) % q
        pivots.append(c)
        r += 1
    return a, pivots


def rank(m, q: int) -> int:
    m = np.asarray(m)
    if m.size == 0:
        return 0
    return len(row_echelon(m, q)[1])


def solve_membership(m, x, q: int) -> np.ndarray | None:
    """Return some ``v`` with ``m @ v == x`` over F_q, or None if x is not in the column span."""
    m = asfield(m, q)
    x = asfield(x, q).reshape(-1)
    if m.ndim != 2 or m.shape[0] != x.shape[0]:
        raise FieldError(f"dimension mismatch: matrix {m.shape}, vector {x.shape}")
    rows, cols = m.shape
    if cols == 0:
        return np.zeros(0, dtype=np.int64) if not x.any() else None
    aug, pivots = row_echelon(np.concatenate([m, x[:, None]], axis=1), q)
    if cols in pivots:
        return None
    v = np.zeros(cols, dtype=np.int64)
    for r, c in enumerate(pivots):
        v[c] = aug[r, cols]
    return v


def nullspace(m, q: int) -> np.ndarray:
    """Basis of {x : m @ x = 0} as the columns of the returned matrix."""
    m = asfield(m, q)
    cols = m.shape[1]
    red, pivots = row_echelon(m, q)
    free = [c for c in range(cols) if c not in pivots]
    basis = np.zeros((cols, len(free)), dtype=np.int64)
    for j, f in enumerate(free):
        basis[f, j] = 1
        for r, c in enumerate(pivots):
            basis[c, j] = (-red[r, f]) % q
    return basis


def inv_matrix(m, q: int) -> np.ndarray:
    m = asfield(m, q)
    n = m.shape[0]
    if m.shape != (n, n):
        raise FieldError("matrix is not square")
    red, pivots = row_echelon(np.concatenate([m, np.eye(n, dtype=np.int64)], axis=1), q)
    if pivots[:n] != list(range(n)) or len(pivots) < n:
        raise FieldError("matrix is singular")
    return red[:, n:]


def all_vectors(length: int, q: int) -> np.ndarray:
    """Every vector of F_q^length, rows in lexicographic order (first coordinate most significant)."""
    if length == 0:
        return np.zeros((1, 0), dtype=np.int64)
    idx = np.arange(q**length, dtype=np.int64)
    powers = q ** np.arange(length - 1, -1, -1, dtype=np.int64)
    return (idx[:, None] // powers[None, :]) % q


def vector_index(v, q: int) -> int:
    """Inverse of :func:`all_vectors` row ordering."""
    out = 0
    for x in np.asarray(v).reshape(-1):
        out = out * q + int(x)
    return out


@dataclass(frozen=True, eq=False)
class FieldMatrix:
    data: np.ndarray
    q: int

    def __post_init__(self):
        check_modulus(self.q)
        arr = asfield(self.data, self.q)
        if arr.ndim != 2:
            raise FieldError("FieldMatrix needs a 2-d array")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def __eq__(self, other):
        return (
            isinstance(other, FieldMatrix)
            and self.q == other.q
            and self.data.shape == other.data.shape
            and bool(np.array_equal(self.data, other.data))
        )

    def to_text(self) -> str:
        rows, cols = self.data.shape
        lines = [f"{self.q} {rows} {cols}"]
        lines += [" ".join(str(int(x)) for x in row) for row in self.data]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "FieldMatrix":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise FieldError("empty matrix text")
        try:
            q, rows, cols = (int(t) for t in lines[0].split())
        except ValueError as exc:
            raise FieldError(f"bad header line {lines[0]!r}") from exc
        body = [[int(t) for t in ln.split()] for ln in lines[1:]]
        if cols == 0 and not body:
            body = [[] for _ in range(rows)]
        if len(body) != rows or any(len(r) != cols for r in body):
            raise FieldError(f"expected {rows}x{cols} entries")
        data = np.array(body, dtype=np.int64).reshape(rows, cols)
        if ((data < 0) | (data >= q)).any():
            raise FieldError(f"entries outside [0, {q})")
        return cls(data, q)

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "FieldMatrix":
        return cls.from_text(Path(path).read_text())
