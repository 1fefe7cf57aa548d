"""Two-phase secure exchange through an untrusted relay.

Each node hashes its message and fresh randomness into V = F1 m + F2 l,
sends G V + e over the Gaussian MAC, and the relay decodes V1 + V2 and
broadcasts F(V1 + V2).  Leakage to the relay is the L1 distance between the
joint law of (message, relay output) and the product of its marginals.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import List, Optional

import numpy as np
from scipy import integrate, optimize
from scipy.special import ndtr

from . import galois
from .channel import MacChannelParams, symbol_loglik_table, transmit
from .codes import GeneratorCode, HashSplit

ML_CHUNK = 1 << 14
MAX_ML_MESSAGES = 2**20
LLR_CLIP = 50.0


class ProtocolError(ValueError):
    pass


@dataclass(eq=False)
class ProtocolConfig:
    channel: MacChannelParams
    code: GeneratorCode
    split: HashSplit
    shift_mode: str = "random"
    e1: Optional[np.ndarray] = None
    e2: Optional[np.ndarray] = None
    decoder: str = "ml"
    bp_iterations: int = 50
    parity_check: Optional[np.ndarray] = None
    broadcast: str = "hashed"

    def __post_init__(self):
        q, n = self.code.q, self.code.n
        if self.shift_mode == "fixed":
            self.e1 = np.zeros(n, dtype=np.int64) if self.e1 is None else galois.asfield(self.e1, q).reshape(-1)
            self.e2 = np.zeros(n, dtype=np.int64) if self.e2 is None else galois.asfield(self.e2, q).reshape(-1)
        if self.parity_check is not None:
            self.parity_check = np.asarray(self.parity_check, dtype=np.int64) % q
        problems = self.problems()
        if problems:
            raise ProtocolError("; ".join(problems))

    def problems(self) -> List[str]:
        """Every violated invariant, so a bad configuration is reported in one go."""
        out = []
        q, n, k = self.code.q, self.code.n, self.code.k
        if self.channel.q != q:
            out.append(f"channel alphabet {self.channel.q} differs from code field {q}")
        if self.split.k != k:
            out.append(f"hash split is for k={self.split.k} but the code has k={k}")
        if self.split.q != q:
            out.append("hash split field differs from code field")
        if self.shift_mode not in ("fixed", "random"):
            out.append(f"shift_mode must be 'fixed' or 'random', got {self.shift_mode!r}")
        elif self.shift_mode == "fixed":
            for name, e in (("e1", self.e1), ("e2", self.e2)):
                if e is not None and e.shape != (n,):
                    out.append(f"{name} must have length {n}")
        if self.broadcast not in ("hashed", "raw"):
            out.append(f"broadcast must be 'hashed' or 'raw', got {self.broadcast!r}")
        if self.decoder == "ml":
            if q**k > MAX_ML_MESSAGES:
                out.append(f"exhaustive ML needs q^k <= 2^20, got {q}^{k}")
        elif self.decoder == "bp":
            if q != 2:
                out.append("belief propagation is implemented for q = 2 only")
            if self.parity_check is None:
                out.append("bp decoder needs a parity-check matrix")
            elif self.parity_check.ndim != 2 or self.parity_check.shape[1] != n:
                out.append(f"parity-check matrix must have {n} columns")
            elif galois.matmul(self.parity_check, self.code.G, q).any():
                out.append("parity-check null space does not contain the code")
            if self.bp_iterations < 0:
                out.append("bp_iterations must be nonnegative")
        else:
            out.append(f"decoder must be 'ml' or 'bp', got {self.decoder!r}")
        return out

    @property
    def q(self) -> int:
        return self.code.q


@dataclass
class TrialRecord:
    m1: list
    m2: list
    l1: list
    l2: list
    e1: list
    e2: list
    y: list
    v_hat: list
    relay_broadcast: list
    recovered_m2_at_node1: list
    recovered_m1_at_node2: list
    sum_decode_ok: bool
    recovery_ok: bool

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def _ints(a) -> list:
    return [int(x) for x in np.asarray(a).reshape(-1)]


def _shifts(config: ProtocolConfig, rng: np.random.Generator):
    if config.shift_mode == "fixed":
        return config.e1, config.e2
    n, q = config.code.n, config.q
    return rng.integers(0, q, size=n), rng.integers(0, q, size=n)


# --------------------------------------------------------------------------
# relay decoders


def ml_decode(y, config: ProtocolConfig, e1=None, e2=None) -> np.ndarray:
    """Exhaustive maximum likelihood estimate of V1 + V2 under the degraded channel.

    Ties go to the lexicographically smallest message.
    """
    code = config.code
    q, k = code.q, code.k
    if q**k > MAX_ML_MESSAGES:
        raise ProtocolError(f"exhaustive ML needs q^k <= 2^20, got {q}^{k}")
    e1 = config.e1 if e1 is None else e1
    e2 = config.e2 if e2 is None else e2
    table = symbol_loglik_table(y, config.channel, e1, e2)
    rows = np.arange(code.n)
    msgs = galois.all_vectors(k, q)
    best_score, best_idx = -math.inf, 0
    for start in range(0, msgs.shape[0], ML_CHUNK):
        words = (msgs[start:start + ML_CHUNK] @ code.G.T) % q
        scores = table[rows[None, :], words].sum(axis=1)
        i = int(np.argmax(scores))
        if scores[i] > best_score:
            best_score, best_idx = float(scores[i]), start + i
    return msgs[best_idx].copy()


class TannerGraph:
    """Edge-list view of a binary parity-check matrix for flooding sum-product decoding."""

    def __init__(self, h):
        h = np.asarray(h, dtype=np.int64) % 2
        self.h = h
        self.m, self.n = h.shape
        self.check_of_edge, self.var_of_edge = np.nonzero(h)

    def syndrome_ok(self, bits) -> bool:
        return not ((self.h @ bits) % 2).any()

    def decode(self, llr, iterations: int):
        """Sum-product with LLRs log P(0)/P(1); returns (hard bits, parity satisfied)."""
        llr = np.clip(np.asarray(llr, dtype=float), -LLR_CLIP, LLR_CLIP)
        bits = (llr < 0).astype(np.int64)
        if self.syndrome_ok(bits):
            return bits, True
        ce, ve = self.check_of_edge, self.var_of_edge
        v2c = llr[ve].copy()
        for _ in range(iterations):
            t = np.tanh(0.5 * v2c)
            mag = np.maximum(np.abs(t), 1e-300)
            logmag = np.log(mag)
            neg = (t < 0).astype(np.int64)
            tot_log = np.bincount(ce, weights=logmag, minlength=self.m)
            tot_neg = np.bincount(ce, weights=neg, minlength=self.m).astype(np.int64)
            ext_mag = np.exp(tot_log[ce] - logmag)
            ext_sign = np.where((tot_neg[ce] - neg) % 2 == 1, -1.0, 1.0)
            prod = np.clip(ext_sign * ext_mag, -1 + 1e-15, 1 - 1e-15)
            c2v = 2.0 * np.arctanh(prod)
            total = llr + np.bincount(ve, weights=c2v, minlength=self.n)
            bits = (total < 0).astype(np.int64)
            if self.syndrome_ok(bits):
                return bits, True
            v2c = np.clip(total[ve] - c2v, -LLR_CLIP, LLR_CLIP)
        return bits, False


def _message_from_word(code: GeneratorCode, word) -> np.ndarray:
    """Read V off a (possibly invalid) word through k information positions of G."""
    q = code.q
    _, pivots = galois.row_echelon(code.G.T, q)
    sub = code.G[pivots]
    return galois.matmul(galois.inv_matrix(sub, q), np.asarray(word)[pivots], q)


def bp_decode(y, config: ProtocolConfig, e1=None, e2=None, return_status: bool = False):
    """Belief-propagation estimate of V1 + V2 (q = 2).

    Channel LLRs come from the shift-aware degraded densities, so the graph
    decodes the sum codeword G(V1 + V2) directly.
    """
    if config.q != 2:
        raise ProtocolError("belief propagation is implemented for q = 2 only")
    if config.parity_check is None:
        raise ProtocolError("bp decoder needs a parity-check matrix")
    e1 = config.e1 if e1 is None else e1
    e2 = config.e2 if e2 is None else e2
    table = symbol_loglik_table(y, config.channel, e1, e2)
    graph = TannerGraph(config.parity_check)
    bits, ok = graph.decode(table[:, 0] - table[:, 1], config.bp_iterations)
    v = _message_from_word(config.code, bits)
    return (v, ok) if return_status else v


def decode(y, config: ProtocolConfig, e1, e2) -> np.ndarray:
    if config.decoder == "bp":
        return bp_decode(y, config, e1, e2)
    return ml_decode(y, config, e1, e2)


# --------------------------------------------------------------------------
# one round and Monte Carlo error rates


def run_trial(config: ProtocolConfig, seed) -> TrialRecord:
    rng = np.random.default_rng(seed)
    code, split, q = config.code, config.split, config.q
    km, kb = split.message_length, split.kbar
    m1, m2 = rng.integers(0, q, size=km), rng.integers(0, q, size=km)
    l1, l2 = rng.integers(0, q, size=kb), rng.integers(0, q, size=kb)
    e1, e2 = _shifts(config, rng)
    v1, v2 = split.combine(m1, l1), split.combine(m2, l2)
    x1 = (code.G @ v1 + e1) % q
    x2 = (code.G @ v2 + e2) % q
    y = transmit(x1, x2, config.channel, rng)
    v_hat = decode(y, config, e1, e2)
    hashed = split.hash(v_hat)
    broadcast = hashed if config.broadcast == "hashed" else v_hat
    # F F2 = 0 and F F1 = I make F(V_R) - m_i the peer's message
    rec_m2 = (hashed - m1) % q
    rec_m1 = (hashed - m2) % q
    sum_ok = bool(np.array_equal(v_hat, (v1 + v2) % q))
    rec_ok = bool(np.array_equal(rec_m2, m2) and np.array_equal(rec_m1, m1))
    return TrialRecord(
        m1=_ints(m1), m2=_ints(m2), l1=_ints(l1), l2=_ints(l2), e1=_ints(e1), e2=_ints(e2),
        y=[float(t) for t in y], v_hat=_ints(v_hat), relay_broadcast=_ints(broadcast),
        recovered_m2_at_node1=_ints(rec_m2), recovered_m1_at_node2=_ints(rec_m1),
        sum_decode_ok=sum_ok, recovery_ok=rec_ok,
    )


def trial_seeds(master_seed: int, trials: int) -> List[int]:
    """Independent 64-bit per-trial seeds split off a master seed."""
    children = np.random.SeedSequence(int(master_seed)).spawn(trials)
    return [int(c.generate_state(1, np.uint64)[0]) for c in children]


def wilson_halfwidth(errors: int, trials: int, z: float = 1.959963984540054) -> float:
    p = errors / trials
    denom = 1 + z * z / trials
    return z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom


@dataclass
class ErrorRate:
    trials: int
    sum_errors: int
    recovery_errors: int
    p_sum_err: float
    p_recovery_err: float
    confidence_halfwidth: float
    recovery_halfwidth: float


def error_rate(config: ProtocolConfig, trials: int, master_seed: int, log=None) -> ErrorRate:
    """Monte Carlo decoding error rates with Wilson 95% half-widths.

    ``log``, if given, receives one JSON line per trial.
    """
    if trials < 1:
        raise ProtocolError("need at least one trial")
    sum_err = rec_err = 0
    for seed in trial_seeds(master_seed, trials):
        rec = run_trial(config, seed)
        sum_err += not rec.sum_decode_ok
        rec_err += not rec.recovery_ok
        if log is not None:
            log.write(rec.to_json() + "\n")
    return ErrorRate(trials, sum_err, rec_err, sum_err / trials, rec_err / trials,
                     wilson_halfwidth(sum_err, trials), wilson_halfwidth(rec_err, trials))


# --------------------------------------------------------------------------
# leakage to the relay


@dataclass
class LeakageEstimate:
    value: float
    method: str
    node: int
    std_error: Optional[float] = None
    shifts: str = "fixed"


def _input_words(config: ProtocolConfig, node: int, e1, e2):
    """Channel inputs of the observed node for each (message, sacrifice) and of the peer for each V."""
    code, split, q = config.code, config.split, config.q
    own_shift, peer_shift = (e1, e2) if node == 1 else (e2, e1)
    msgs = galois.all_vectors(split.message_length, q)
    sac = galois.all_vectors(split.kbar, q)
    v = (msgs @ split.F1.T)[:, None, :] + (sac @ split.F2.T)[None, :, :]
    own = (v @ code.G.T + own_shift) % q
    peer = (galois.all_vectors(code.k, q) @ code.G.T + peer_shift) % q
    return own, peer


def message_component_means(config: ProtocolConfig, node: int, e1=None, e2=None) -> np.ndarray:
    """Array (messages, components, n) of noiseless outputs; each message's density is the
    uniform mixture of unit-weight Gaussian products at these means."""
    if node not in (1, 2):
        raise ProtocolError("node must be 1 or 2")
    e1 = config.e1 if e1 is None else galois.asfield(e1, config.q)
    e2 = config.e2 if e2 is None else galois.asfield(e2, config.q)
    if e1 is None or e2 is None:
        raise ProtocolError("leakage needs fixed shift vectors")
    own, peer = _input_words(config, node, e1, e2)
    table = config.channel.pair_means()
    M, L, n = own.shape
    own = own.reshape(M, L, 1, n)
    peer = peer.reshape(1, 1, -1, n)
    if node == 1:
        means = table[own, peer]
    else:
        means = table[peer, own]
    return means.reshape(M, -1, n)


def _signed_weights(means: np.ndarray):
    """Per message, distinct mean vectors and signed weights of p(.|m) - p(.)."""
    M, C, n = means.shape
    flat = np.round(means.reshape(-1, n), 12)
    uniq, inv = np.unique(flat, axis=0, return_inverse=True)
    inv = inv.reshape(M, C)
    w = np.zeros((M, uniq.shape[0]))
    for m in range(M):
        np.add.at(w[m], inv[m], 1.0 / C)
    return uniq, w - w.mean(axis=0, keepdims=True)


def _abs_gaussian_sum_1d(coef: np.ndarray, mus: np.ndarray, N0: float) -> float:
    """int over R of |sum_j coef_j phi(y - mu_j)| for a common variance N0, exactly up to root finding.

    A sum of J equal-variance Gaussians has at most J - 1 sign changes; they are
    bracketed on a fine grid and polished with Brent's method.
    """
    keep = coef != 0
    coef, mus = coef[keep], mus[keep]
    if coef.size == 0:
        return 0.0
    sd = math.sqrt(N0)
    if coef.size == 1:
        return abs(float(coef[0]))

    def g(y):
        # scaled by the largest exponent so the far tails keep their sign instead of underflowing to 0
        y = np.asarray(y, dtype=float)
        expo = -((y[None, :] - mus[:, None]) ** 2) / (2 * N0)
        return np.sum(coef[:, None] * np.exp(expo - expo.max(axis=0)), axis=0)

    lo, hi = mus.min() - 40 * sd, mus.max() + 40 * sd
    grid = np.linspace(lo, hi, 4001)
    vals = g(grid)
    sign = np.sign(vals)
    roots = list(grid[sign == 0])
    for i in np.nonzero(sign[:-1] * sign[1:] < 0)[0]:
        roots.append(optimize.brentq(lambda t: float(g(np.array([t]))[0]), grid[i], grid[i + 1], xtol=1e-14))
    edges = np.concatenate([[-np.inf], sorted(roots), [np.inf]])
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        mass = float(np.sum(coef * (ndtr((b - mus) / sd) - ndtr((a - mus) / sd))))
        total += abs(mass)
    return total


def _tv_integral(mus: np.ndarray, coef: np.ndarray, N0: float, tol: float) -> float:
    """int over R^n of |sum_c coef_c prod_i phi(y_i - mus[c, i])| for n in {1, 2}."""
    n = mus.shape[1]
    if n == 1:
        return _abs_gaussian_sum_1d(coef, mus[:, 0], N0)
    inner_vals, inner_idx = np.unique(mus[:, 1], return_inverse=True)
    sd = math.sqrt(N0)

    def outer(y1):
        w = coef * np.exp(-((y1 - mus[:, 0]) ** 2) / (2 * N0)) / math.sqrt(2 * math.pi * N0)
        b = np.bincount(inner_idx, weights=w, minlength=inner_vals.size)
        return _abs_gaussian_sum_1d(b, inner_vals, N0)

    lo, hi = mus[:, 0].min() - 12 * sd, mus[:, 0].max() + 12 * sd
    brk = sorted(set(np.round(mus[:, 0], 12).tolist()))
    val, _ = integrate.quad(outer, lo, hi, points=brk, epsabs=tol, epsrel=0.0, limit=1000)
    return float(val)


def leakage_exact(config: ProtocolConfig, node: int = 1, e1=None, e2=None, average_shifts: bool = False,
                  tol: float = 1e-10) -> LeakageEstimate:
    """d = sum_m P(m) int |p(y|m) - p(y)| dy for block lengths n <= 2.

    With ``average_shifts`` the value is averaged over every pair of shift
    vectors; otherwise the configured fixed shifts are used.
    """
    code, q = config.code, config.q
    if code.n > 2:
        raise ProtocolError("exact leakage is limited to n <= 2")
    if q ** (2 * code.k) > 2**10:
        raise ProtocolError("exact leakage needs q^(2k) <= 2^10")
    if config.split.message_length == 0:
        return LeakageEstimate(0.0, "exact-quadrature", node, None, "all" if average_shifts else "fixed")
    if average_shifts:
        pairs = [(a, b) for a in galois.all_vectors(code.n, q) for b in galois.all_vectors(code.n, q)]
    else:
        pairs = [(e1, e2)]
    vals = []
    for a, b in pairs:
        means = message_component_means(config, node, a, b)
        uniq, w = _signed_weights(means)
        vals.append(float(np.mean([_tv_integral(uniq, w[m], config.channel.N0, tol) for m in range(w.shape[0])])))
    return LeakageEstimate(float(np.mean(vals)), "exact-quadrature", node, None, "all" if average_shifts else "fixed")


def _mixture_loglik(y: np.ndarray, means: np.ndarray, N0: float) -> np.ndarray:
    """log of the uniform mixture over axis -2 of ``means`` (..., C, n) at points y (S, n) -> (S, ...)."""
    d = y.reshape((y.shape[0],) + (1,) * (means.ndim - 1) + (y.shape[1],)) - means[None]
    comp = -np.sum(d * d, axis=-1) / (2 * N0) - 0.5 * y.shape[1] * math.log(2 * math.pi * N0)
    mx = comp.max(axis=-1, keepdims=True)
    return np.log(np.mean(np.exp(comp - mx), axis=-1)) + mx[..., 0]


def leakage_mc(config: ProtocolConfig, node: int = 1, samples: int = 20000, master_seed: int = 0,
               e1=None, e2=None, average_shifts: bool = False, estimator: str = "posterior") -> LeakageEstimate:
    """Monte Carlo estimate of the leakage from samples of the joint law of (m, y).

    ``estimator="posterior"`` averages sum_m' |P(m'|y) - P(m')|, which is
    bounded by 2; ``"ratio"`` averages |1 - p(y)/p(y|m)|, unbiased too but
    heavy-tailed once the conditional densities separate.  Conditional and
    marginal densities are evaluated exactly per sample.  With
    ``average_shifts`` each sample also draws a uniform shift pair.
    """
    if estimator not in ("posterior", "ratio"):
        raise ProtocolError(f"unknown estimator {estimator!r}")
    code, q = config.code, config.q
    if q ** (2 * code.k) > 2**16:
        raise ProtocolError("Monte Carlo leakage needs q^(2k) <= 2^16")
    shifts = "all" if average_shifts else "fixed"
    if config.split.message_length == 0:
        return LeakageEstimate(0.0, "monte-carlo", node, 0.0, shifts)
    rng = np.random.default_rng(master_seed)
    N0 = config.channel.N0
    n = code.n
    if average_shifts:
        all_e = galois.all_vectors(n, q)
        idx = rng.integers(0, all_e.shape[0], size=(samples, 2))
        keys = [(int(a), int(b)) for a, b in idx]
    else:
        keys = [None] * samples
    groups: dict = {}
    for i, key in enumerate(keys):
        groups.setdefault(key, []).append(i)
    terms = np.empty(samples)
    for key, members in sorted(groups.items(), key=lambda kv: (kv[0] is not None, kv[0] or (0, 0))):
        if key is None:
            means = message_component_means(config, node, e1, e2)
        else:
            means = message_component_means(config, node, all_e[key[0]], all_e[key[1]])
        M, C, _ = means.shape
        cnt = len(members)
        msg = rng.integers(0, M, size=cnt)
        comp = rng.integers(0, C, size=cnt)
        y = means[msg, comp] + rng.normal(0.0, math.sqrt(N0), size=(cnt, n))
        cond = _mixture_loglik(y, means, N0)
        log_marg = np.log(np.mean(np.exp(cond - cond.max(axis=1, keepdims=True)), axis=1)) + cond.max(axis=1)
        if estimator == "ratio":
            log_cond = cond[np.arange(cnt), msg]
            terms[members] = np.abs(1.0 - np.exp(log_marg - log_cond))
        else:
            posterior = np.exp(cond - log_marg[:, None]) / M
            terms[members] = np.abs(posterior - 1.0 / M).sum(axis=1)
    value = float(terms.mean())
    se = float(terms.std(ddof=1) / math.sqrt(samples)) if samples > 1 else math.nan
    return LeakageEstimate(value, "monte-carlo", node, se, shifts)
