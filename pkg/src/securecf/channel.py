"""Real Gaussian multiple-access channel Y = h1 sigma(X1) + h2 sigma(X2) + Z.

Likelihood helpers accept numpy arrays for ``y`` and broadcast.  Decoders go
through the shift-aware degraded density: the shifts enter inside sigma, so no
constellation additivity is assumed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from scipy.special import logsumexp

from . import galois

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class ChannelError(ValueError):
    pass


@dataclass(frozen=True)
class Constellation:
    q: int
    points: Tuple[float, ...]

    def __post_init__(self):
        galois.check_modulus(self.q)
        pts = tuple(float(p) for p in self.points)
        if len(pts) != self.q:
            raise ChannelError(f"need {self.q} constellation points, got {len(pts)}")
        object.__setattr__(self, "points", pts)

    @classmethod
    def bpsk(cls) -> "Constellation":
        """sigma(x) = (-1)^x on F_2."""
        return cls(2, (1.0, -1.0))

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.points)[np.asarray(x, dtype=np.int64) % self.q]


@dataclass(frozen=True)
class MacChannelParams:
    h1: float
    h2: float
    N0: float
    constellation: Constellation = field(default_factory=Constellation.bpsk)

    def __post_init__(self):
        if not self.N0 > 0:
            raise ChannelError(f"noise variance must be positive, got {self.N0}")

    @classmethod
    def bpsk(cls, h: float, N0: float = 1.0, h2: float | None = None) -> "MacChannelParams":
        return cls(float(h), float(h if h2 is None else h2), float(N0), Constellation.bpsk())

    @property
    def q(self) -> int:
        return self.constellation.q

    def pair_means(self) -> np.ndarray:
        """q x q table of noiseless outputs h1 sigma(a) + h2 sigma(b)."""
        pts = np.asarray(self.constellation.points)
        return self.h1 * pts[:, None] + self.h2 * pts[None, :]


def gaussian_density(y, mean, N0):
    if not np.all(np.asarray(N0) > 0):
        raise ChannelError("noise variance must be positive")
    y = np.asarray(y, dtype=float)
    return np.exp(-((y - mean) ** 2) / (2.0 * N0)) / np.sqrt(2.0 * np.pi * N0)


def gaussian_logdensity(y, mean, N0):
    return -((np.asarray(y, dtype=float) - mean) ** 2) / (2.0 * N0) - LOG_SQRT_2PI - 0.5 * np.log(N0)


def pair_likelihood(y, a: int, b: int, params: MacChannelParams):
    mean = params.pair_means()[int(a) % params.q, int(b) % params.q]
    return gaussian_density(y, mean, params.N0)


def degraded_means(c: int, params: MacChannelParams, shift1: int = 0, shift2: int = 0) -> np.ndarray:
    """Means of the q equally weighted components of the degraded density for sum ``c``."""
    q = params.q
    a = np.arange(q)
    x1 = (a + shift1) % q
    x2 = (c - a + shift2) % q
    return params.pair_means()[x1, x2]


def degraded_logdensity(y, c: int, params: MacChannelParams, shift1=0, shift2=0):
    """log of (1/q) sum_a phi(y; h1 sigma(a + e1) + h2 sigma(c - a + e2)).

    ``c``, ``shift1`` and ``shift2`` may be arrays broadcasting against ``y``.
    """
    q = params.q
    y = np.asarray(y, dtype=float)
    c, s1, s2 = (np.asarray(t, dtype=np.int64) for t in (c, shift1, shift2))
    y, c, s1, s2 = np.broadcast_arrays(y, c, s1, s2)
    table = params.pair_means()
    a = np.arange(q).reshape((q,) + (1,) * y.ndim)
    means = table[(a + s1) % q, (c - a + s2) % q]
    return logsumexp(gaussian_logdensity(y[None], means, params.N0), axis=0) - math.log(q)


def degraded_density(y, c: int, params: MacChannelParams, shift1=0, shift2=0):
    return np.exp(degraded_logdensity(y, c, params, shift1, shift2))


def symbol_loglik_table(y, params: MacChannelParams, shift1=None, shift2=None) -> np.ndarray:
    """n x q array of log degraded densities of each received sample for every sum symbol."""
    y = np.asarray(y, dtype=float).reshape(-1)
    n, q = y.size, params.q
    s1 = np.zeros(n, dtype=np.int64) if shift1 is None else np.asarray(shift1, dtype=np.int64)
    s2 = np.zeros(n, dtype=np.int64) if shift2 is None else np.asarray(shift2, dtype=np.int64)
    cs = np.arange(q)[None, :]
    return degraded_logdensity(y[:, None], cs, params, s1[:, None], s2[:, None])


def transmit(x1, x2, params: MacChannelParams, seed) -> np.ndarray:
    """One use of the channel per coordinate; ``seed`` is an int or a numpy Generator."""
    x1 = np.asarray(x1, dtype=np.int64).reshape(-1)
    x2 = np.asarray(x2, dtype=np.int64).reshape(-1)
    if x1.shape != x2.shape:
        raise ChannelError(f"input lengths differ: {x1.size} vs {x2.size}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    sigma = params.constellation
    noise = rng.normal(0.0, math.sqrt(params.N0), size=x1.size)
    return params.h1 * sigma(x1) + params.h2 * sigma(x2) + noise
