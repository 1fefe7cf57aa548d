"""Differential entropies of Gaussian mixtures and information quantities of
the single-letter channel, all in nats.

Integrals run over a truncated interval with a composite Gauss-Legendre rule
whose panel count doubles until two successive estimates agree to
``abs_tol``.  Integrands are formed in the log domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .channel import MacChannelParams, degraded_means

HALF_LOG_2PIE = 0.5 * math.log(2.0 * math.pi * math.e)
GL_ORDER = 20
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(GL_ORDER)


class QuadratureError(ArithmeticError):
    """Refinement did not reach the requested tolerance."""


@dataclass(frozen=True)
class QuadratureSpec:
    truncation_sigmas: float = 12.0
    max_subdivisions: int = 4096
    abs_tol: float = 1e-10

    def __post_init__(self):
        if self.truncation_sigmas < 6:
            raise ValueError("truncation_sigmas must be at least 6")
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")


DEFAULT_SPEC = QuadratureSpec()


@dataclass(frozen=True)
class GaussianMixture:
    weights: tuple
    means: tuple
    N0: float

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        mu = tuple(float(x) for x in self.means)
        if len(w) != len(mu) or not w:
            raise ValueError("weights and means must be non-empty and of equal length")
        if any(x < 0 for x in w) or abs(sum(w) - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        if not self.N0 > 0:
            raise ValueError("N0 must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)

    @classmethod
    def uniform(cls, means: Sequence[float], N0: float) -> "GaussianMixture":
        means = list(means)
        return cls(tuple([1.0 / len(means)] * len(means)), tuple(means), N0)

    def logpdf(self, y) -> np.ndarray:
        return _mixture_logpdf(np.asarray(y, dtype=float), np.asarray(self.weights), np.asarray(self.means), self.N0)

    def pdf(self, y) -> np.ndarray:
        return np.exp(self.logpdf(y))


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    return np.squeeze(out, axis=axis)


def _component_logpdf(y: np.ndarray, means: np.ndarray, N0: float) -> np.ndarray:
    """log phi(y; mean, N0) with components stacked along a new leading axis."""
    diff = y[None, ...] - means.reshape((-1,) + (1,) * y.ndim)
    return -(diff**2) / (2.0 * N0) - 0.5 * math.log(2.0 * math.pi * N0)


def _mixture_logpdf(y, weights, means, N0):
    with np.errstate(divide="ignore"):
        logw = np.log(weights).reshape((-1,) + (1,) * y.ndim)
    return _logsumexp(logw + _component_logpdf(y, means, N0), axis=0)


def integrate(f: Callable[[np.ndarray], np.ndarray], a: float, b: float, spec: QuadratureSpec = DEFAULT_SPEC,
              panels: int = 16) -> float:
    """Composite Gauss-Legendre integral of a vectorized ``f`` over [a, b].

    The panel count doubles until consecutive estimates differ by at most
    ``spec.abs_tol``; exceeding ``spec.max_subdivisions`` panels raises.
    """
    if b <= a:
        return 0.0

    def estimate(m: int) -> float:
        edges = np.linspace(a, b, m + 1)
        half = 0.5 * (edges[1:] - edges[:-1])
        mid = 0.5 * (edges[1:] + edges[:-1])
        y = mid[:, None] + half[:, None] * _GL_NODES[None, :]
        vals = f(y.ravel()).reshape(y.shape)
        return float(np.sum(half * (vals @ _GL_WEIGHTS)))

    m = max(1, panels)
    prev = estimate(m)
    while True:
        m *= 2
        if m > spec.max_subdivisions:
            raise QuadratureError(f"no convergence to {spec.abs_tol} within {spec.max_subdivisions} panels")
        cur = estimate(m)
        if abs(cur - prev) <= spec.abs_tol:
            return cur
        prev = cur


def _window(means, N0: float, spec: QuadratureSpec) -> tuple[float, float, int]:
    sd = math.sqrt(N0)
    lo = float(np.min(means)) - spec.truncation_sigmas * sd
    hi = float(np.max(means)) + spec.truncation_sigmas * sd
    return lo, hi, max(8, int(math.ceil((hi - lo) / sd)))


def mixture_entropy(m: GaussianMixture, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Differential entropy -int p log p of a Gaussian mixture."""
    w = np.asarray(m.weights)
    mu = np.asarray(m.means)
    keep = w > 0
    w, mu = w[keep], mu[keep]
    if np.ptp(mu) == 0:
        return 0.5 * math.log(2.0 * math.pi * math.e * m.N0)

    def integrand(y):
        lp = _mixture_logpdf(y, w, mu, m.N0)
        return -np.exp(lp) * lp

    lo, hi, panels = _window(mu, m.N0, spec)
    return integrate(integrand, lo, hi, spec, panels)


def entropy_of_means(means, N0: float, spec: QuadratureSpec = DEFAULT_SPEC, weights=None) -> float:
    means = np.asarray(means, dtype=float).ravel()
    if weights is None:
        weights = np.full(means.size, 1.0 / means.size)
    return mixture_entropy(GaussianMixture(tuple(weights), tuple(means), N0), spec)


@dataclass(frozen=True)
class InfoReport:
    i_y_x1: float
    i_y_x1x2: float
    i_y_sum: float
    params: MacChannelParams
    spec: QuadratureSpec


def mutual_infos(params: MacChannelParams, spec: QuadratureSpec = DEFAULT_SPEC) -> InfoReport:
    """I(Y;X1), I(Y;X1,X2) and I(Y;X1+X2) for independent uniform inputs."""
    q, N0 = params.q, params.N0
    table = params.pair_means()
    h_y = entropy_of_means(table.ravel(), N0, spec)
    h_noise = 0.5 * math.log(2.0 * math.pi * math.e * N0)
    h_given_x1 = np.mean([entropy_of_means(table[a], N0, spec) for a in range(q)])
    h_given_sum = np.mean([entropy_of_means(degraded_means(c, params), N0, spec) for c in range(q)])
    # clip quadrature noise around zero for the degenerate h = 0 channel
    i12 = max(h_y - h_noise, 0.0)
    i1 = min(max(h_y - h_given_x1, 0.0), i12)
    isum = max(h_y - h_given_sum, 0.0)
    return InfoReport(i_y_x1=float(i1), i_y_x1x2=float(i12), i_y_sum=float(isum), params=params, spec=spec)


RENYI_TARGETS = ("X1", "X1X2")


def _conditional_logpdfs(params: MacChannelParams, which: str):
    """(log prior over z, function y -> log p(y|z) stacked along axis 0)."""
    q, N0 = params.q, params.N0
    table = params.pair_means()
    if which == "X1X2":
        means = table.ravel()
        logprior = np.full(q * q, -2.0 * math.log(q))

        def logp(y):
            return _component_logpdf(y, means, N0)

        return logprior, logp, means
    if which == "X1":
        logprior = np.full(q, -math.log(q))

        def logp(y):
            comp = _component_logpdf(y, table.ravel(), N0).reshape((q, q) + y.shape)
            return _logsumexp(comp, axis=1) - math.log(q)

        return logprior, logp, table.ravel()
    raise ValueError(f"which must be one of {RENYI_TARGETS}, got {which!r}")


def renyi_exp(params: MacChannelParams, s: float, which: str, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """s * I_{1/(1-s)}^down(Y; Z) for Z = X1 or Z = (X1, X2), uniform inputs.

    Equals log int (sum_z P(z) p(y|z)^{1/(1-s)})^{1-s} dy; computed as
    log1p of the integral of the deviation from p(y) so small s keeps its
    relative accuracy.
    """
    if not 0.0 <= s <= 0.5:
        raise ValueError(f"s must lie in [0, 1/2], got {s}")
    if s == 0.0:
        return 0.0
    logprior, logp, means = _conditional_logpdfs(params, which)
    lp_shape = (-1, 1)
    alpha = 1.0 / (1.0 - s)

    def integrand(y):
        lc = logp(y)
        lw = logprior.reshape(lp_shape)
        tilted = (1.0 - s) * _logsumexp(lw + alpha * lc, axis=0)
        marginal = _logsumexp(lw + lc, axis=0)
        return np.exp(tilted) - np.exp(marginal)

    if np.ptp(means) == 0:
        return 0.0
    lo, hi, panels = _window(means, params.N0, spec)
    dev = integrate(integrand, lo, hi, spec, panels)
    return math.log1p(max(dev, 0.0))


def renyi_down(params: MacChannelParams, s: float, which: str, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Renyi mutual information I_{1/(1-s)}^down(Y; X1) or (Y; X1, X2) in nats.

    At s = 0 the limiting Shannon mutual information is returned.
    """
    if which not in RENYI_TARGETS:
        raise ValueError(f"which must be one of {RENYI_TARGETS}, got {which!r}")
    if not 0.0 <= s <= 0.5:
        raise ValueError(f"s must lie in [0, 1/2], got {s}")
    if s == 0.0:
        rep = mutual_infos(params, spec)
        return rep.i_y_x1 if which == "X1" else rep.i_y_x1x2
    return renyi_exp(params, s, which, spec) / s
