"""Independent brute-force references used across the test modules."""

import itertools
import math
from collections import Counter
from fractions import Fraction

import numpy as np


def span(g, q):
    """All codewords of the column span of the n x k matrix g, by enumeration."""
    g = np.asarray(g)
    n, k = g.shape
    return {tuple(int(t) for t in (g @ np.array(v)) % q) for v in itertools.product(range(q), repeat=k)}


def membership_uniform(n, k, q, x, full_rank_only):
    hits = total = 0
    x = tuple(x)
    for flat in itertools.product(range(q), repeat=n * k):
        g = np.array(flat).reshape(n, k)
        words = span(g, q)
        if full_rank_only and len(words) < q**k:
            continue
        total += 1
        hits += x in words
    return Fraction(hits, total)


def deviation(g, q):
    """max over nonzero compositions of N(lambda) q^(n-k) / multinomial."""
    g = np.asarray(g)
    n, k = g.shape
    counts = Counter()
    for w in span(g, q):
        if any(w):
            counts[tuple(w.count(t) for t in range(q))] += 1
    best = None
    for lam, c in counts.items():
        multi = math.factorial(n) // math.prod(math.factorial(t) for t in lam)
        val = Fraction(c * q ** (n - k), multi)
        best = val if best is None else max(best, val)
    return best
