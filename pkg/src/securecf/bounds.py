"""Finite-length leakage bounds, their exponents, achievable-rate formulas and
machine checks of the inequalities relating them.

All bound arithmetic is carried out on logarithms; ``exp`` is only taken when
a raw value is reported, saturating at ``inf``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, List, Optional, Sequence

import numpy as np
from scipy.optimize import bisect

from .channel import MacChannelParams
from .infoq import DEFAULT_SPEC, InfoReport, QuadratureSpec, entropy_of_means, mutual_infos, renyi_down

LOG3 = math.log(3.0)
LN2 = math.log(2.0)
S_MAX = 0.5
GRID_POINTS = 64
S_TOL = 1e-4
INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class BoundError(ValueError):
    pass


def _check_s(s: float) -> None:
    if not 0.0 <= s <= S_MAX:
        raise BoundError(f"s must lie in [0, 1/2], got {s}")


def safe_exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def bound_from_log(log_value: float) -> float:
    """exp of a log bound with the leading 3 pulled out, so s = 0 gives exactly 3."""
    rest = safe_exp(log_value - LOG3)
    return 3.0 * rest


@dataclass(frozen=True)
class CodeRateParams:
    n: int
    k: int
    kbar: int
    q: int = 2

    def __post_init__(self):
        if not 0 <= self.kbar <= self.k <= self.n or self.n < 1:
            raise BoundError(f"need 0 <= kbar <= k <= n, got n={self.n}, k={self.k}, kbar={self.kbar}")

    @property
    def r0(self) -> float:
        return self.k / self.n * math.log(self.q)

    @property
    def r1(self) -> float:
        return self.kbar / self.n * math.log(self.q)

    @property
    def max_A(self) -> float:
        """q^(n-k), the largest value the deviation A can take."""
        return float(self.q) ** (self.n - self.k)


# --------------------------------------------------------------------------
# the two bounds


def log_bound_b1(params: CodeRateParams, s: float, renyi_x1: float) -> float:
    _check_s(s)
    n, k, kb, q = params.n, params.k, params.kbar, params.q
    return LOG3 + s * (n - k - kb) * math.log(q) + s * n * renyi_x1


def bound_b1(params: CodeRateParams, s: float, renyi_x1: float) -> float:
    """3 q^{s(n-k-kbar)} exp(s n I_x1), with I_x1 the per-letter Renyi information at order 1/(1-s)."""
    return bound_from_log(log_bound_b1(params, s, renyi_x1))


def log_bound_b2(params: CodeRateParams, s: float, A: float, renyi_x1: float, renyi_x1x2: float) -> float:
    _check_s(s)
    if A < 0:
        raise BoundError(f"A must be nonnegative, got {A}")
    n, k, kb, q = params.n, params.k, params.kbar, params.q
    first = LOG3 - s * (k + kb) * math.log(q) + s * n * renyi_x1x2
    if A == 0:
        log_As = 0.0 if s == 0 else -math.inf
    else:
        log_As = s * math.log(A)
    second = LOG3 + log_As - s * kb * math.log(q) + s * n * renyi_x1
    return float(np.logaddexp(first, second))


def bound_b2(params: CodeRateParams, s: float, A: float, renyi_x1: float, renyi_x1x2: float) -> float:
    return bound_from_log(log_bound_b2(params, s, A, renyi_x1, renyi_x1x2))


# --------------------------------------------------------------------------
# optimization over s


def golden_section_min(f: Callable[[float], float], a: float, b: float, tol: float = S_TOL):
    """Minimize a unimodal ``f`` on [a, b]; returns (argmin, min) over all evaluated points."""
    best = min(((a, f(a)), (b, f(b))), key=lambda t: t[1])
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INVPHI * (b - a)
            fd = f(d)
    inner = min(((c, fc), (d, fd)), key=lambda t: t[1])
    return min((best, inner), key=lambda t: (t[1], t[0]))


def minimize_over_s(objective: Callable[[float], float], tol: float = S_TOL):
    """Grid of 64 points on [0, 1/2] followed by golden-section refinement around the best one."""
    grid = np.linspace(0.0, S_MAX, GRID_POINTS)
    vals = [objective(float(s)) for s in grid]
    i = int(np.argmin(vals))
    lo = float(grid[max(i - 1, 0)])
    hi = float(grid[min(i + 1, GRID_POINTS - 1)])
    s_ref, v_ref = golden_section_min(objective, lo, hi, tol)
    if v_ref < vals[i]:
        return s_ref, v_ref
    return float(grid[i]), vals[i]


class RenyiCache:
    """Per-letter Renyi informations of one channel, memoized on the exact value of s."""

    def __init__(self, channel: MacChannelParams, spec: QuadratureSpec = DEFAULT_SPEC):
        self.channel = channel
        self.spec = spec
        self._memo: dict = {}

    def __call__(self, s: float, which: str) -> float:
        key = (float(s), which)
        if key not in self._memo:
            self._memo[key] = renyi_down(self.channel, float(s), which, self.spec)
        return self._memo[key]


@dataclass
class LeakageBoundReport:
    n: int
    k: int
    kbar: int
    q: int
    s_star: float
    b1: float
    log2_b1: float
    s_star_b2: Optional[float] = None
    b2: Optional[float] = None
    log2_b2: Optional[float] = None
    A_used: Optional[float] = None
    b1_overflow: bool = False
    b2_overflow: bool = False

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def optimize_bound(kind: str, params: CodeRateParams, channel: MacChannelParams, A: float | None = None,
                   spec: QuadratureSpec = DEFAULT_SPEC, renyi: RenyiCache | None = None):
    """min over s in [0, 1/2] of B1 or B2[A]; returns (s_star, log of the minimum)."""
    renyi = renyi or RenyiCache(channel, spec)
    if kind == "b1":
        def objective(s):
            return log_bound_b1(params, s, renyi(s, "X1"))
    elif kind == "b2":
        if A is None:
            raise BoundError("B2 needs the deviation A")

        def objective(s):
            return log_bound_b2(params, s, A, renyi(s, "X1"), renyi(s, "X1X2"))
    else:
        raise BoundError(f"unknown bound kind {kind!r}")
    return minimize_over_s(objective)


def leakage_bounds(params: CodeRateParams, channel: MacChannelParams, A: float | None = None,
                   spec: QuadratureSpec = DEFAULT_SPEC) -> LeakageBoundReport:
    renyi = RenyiCache(channel, spec)
    s1, lb1 = optimize_bound("b1", params, channel, spec=spec, renyi=renyi)
    b1 = bound_from_log(lb1)
    rep = LeakageBoundReport(params.n, params.k, params.kbar, params.q, s1, b1, lb1 / LN2,
                             b1_overflow=math.isinf(b1))
    if A is not None:
        s2, lb2 = optimize_bound("b2", params, channel, A, spec, renyi)
        b2 = bound_from_log(lb2)
        rep.s_star_b2, rep.b2, rep.log2_b2, rep.A_used = s2, b2, lb2 / LN2, float(A)
        rep.b2_overflow = math.isinf(b2)
    return rep


# --------------------------------------------------------------------------
# exponents and rates


def _maximize_over_s(objective: Callable[[float], float]):
    s, v = minimize_over_s(lambda s: -objective(s))
    return s, -v


def exponents(params: CodeRateParams, channel: MacChannelParams, r2: float,
              spec: QuadratureSpec = DEFAULT_SPEC) -> tuple[float, float]:
    """Decay exponents of min_s B1 and min_s B2 at the rates r0 = k/n log q, r1 = kbar/n log q."""
    renyi = RenyiCache(channel, spec)
    r0, r1, logq = params.r0, params.r1, math.log(params.q)

    def obj1(s):
        return s * (r1 + r0 - logq - renyi(s, "X1"))

    def obj2(s):
        return min(s * (r0 + r1 - renyi(s, "X1X2")), s * (r1 - r2 - renyi(s, "X1")))

    # + 0.0 turns a -0.0 optimum at s = 0 into 0.0
    return _maximize_over_s(obj1)[1] + 0.0, _maximize_over_s(obj2)[1] + 0.0


@dataclass(frozen=True)
class RateReport:
    r0: float
    rate1: float
    rate2: float
    rate3: float
    r2_used: float


def rate_report(info: InfoReport, r0: float, r2: float = 0.0) -> RateReport:
    """1st, 2nd and 3rd type rates; negative values are returned unclipped."""
    if r0 < 0:
        raise BoundError("r0 must be nonnegative")
    logq = math.log(info.params.q)
    rate1 = 2 * r0 - logq - info.i_y_x1
    rate2 = min(2 * r0 - info.i_y_x1x2, r0 - r2 - info.i_y_x1)
    rate3 = min(2 * r0 - info.i_y_x1x2, r0 - info.i_y_x1)
    return RateReport(r0, rate1, rate2, rate3, r2)


def random_coding_rates(channel: MacChannelParams, spec: QuadratureSpec = DEFAULT_SPEC) -> RateReport:
    """Rates with the code rate at its optimum r0 = I(Y; X1+X2) and r2 = 0."""
    info = mutual_infos(channel, spec)
    return rate_report(info, info.i_y_sum, 0.0)


# --------------------------------------------------------------------------
# BPSK closed forms (Gaussian means written on the 0, h, 2h lattice)


def _h_mix4(h: float, N0: float, spec) -> float:
    return entropy_of_means([0.0, h, 2 * h], N0, spec, weights=[0.25, 0.5, 0.25])


def _h_mix2(h: float, N0: float, spec) -> float:
    return entropy_of_means([0.0, 2 * h], N0, spec)


def _h_single(N0: float) -> float:
    return 0.5 * math.log(2.0 * math.pi * math.e * N0)


def rate_h13(h: float, N0: float = 1.0, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Second/third type rate of random coding: H((p0 + 2p_h + p_2h)/4) - H((p0 + p_2h)/2)."""
    return _h_mix4(h, N0, spec) - _h_mix2(h, N0, spec)


def rate_h17(h: float, N0: float = 1.0, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """First type rate of random coding: H((p0 + 2p_h + p_2h)/4) - H(p_h) - log 2."""
    return _h_mix4(h, N0, spec) - _h_single(N0) - LN2


def i_of_h(h: float, N0: float = 1.0, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    return _h_mix4(h, N0, spec) - 0.5 * _h_mix2(h, N0, spec) - 0.5 * _h_single(N0)


@dataclass(frozen=True)
class RateRow:
    h: float
    rate_h13: float
    rate_h17: float
    i_h: float


def bpsk_rate_curves(h_grid: Iterable[float], N0: float = 1.0, spec: QuadratureSpec = DEFAULT_SPEC) -> List[RateRow]:
    if not N0 > 0:
        raise BoundError("N0 must be positive")
    rows = []
    for h in h_grid:
        h = float(h)
        m4, m2, m1 = _h_mix4(h, N0, spec), _h_mix2(h, N0, spec), _h_single(N0)
        rows.append(RateRow(h, m4 - m2, m4 - m1 - LN2, m4 - 0.5 * m2 - 0.5 * m1))
    return rows


def bisect_root(f: Callable[[float], float], a: float, b: float, xtol: float = 1e-8) -> float:
    return float(bisect(f, a, b, xtol=xtol))


def zero_crossings(hs: Sequence[float], values: Sequence[float]) -> List[tuple]:
    """Grid intervals [h_i, h_{i+1}] over which ``values`` changes sign (or hits zero)."""
    out = []
    for i in range(len(hs) - 1):
        a, b = values[i], values[i + 1]
        if a == 0.0 or (a < 0) != (b < 0):
            out.append((float(hs[i]), float(hs[i + 1])))
    if values and values[-1] == 0.0 and len(hs) > 1:
        out.append((float(hs[-2]), float(hs[-1])))
    return out


def bpsk_thresholds(N0: float = 1.0, lo: float = 0.5, hi: float = 6.0,
                    spec: QuadratureSpec = DEFAULT_SPEC) -> tuple[float, float]:
    """Zeros in h of the second-type and first-type BPSK rate curves, by bisection."""
    return (bisect_root(lambda h: rate_h13(h, N0, spec), lo, hi),
            bisect_root(lambda h: rate_h17(h, N0, spec), lo, hi))


# --------------------------------------------------------------------------
# LDPC gap tables


@dataclass
class DeltaITable:
    h: np.ndarray
    delta_i: np.ndarray
    metadata: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=float)
        self.delta_i = np.asarray(self.delta_i, dtype=float)
        if self.h.ndim != 1 or self.h.shape != self.delta_i.shape or self.h.size == 0:
            raise BoundError("delta-I table needs matching, non-empty h and delta_i columns")
        if np.any(np.diff(self.h) <= 0):
            raise BoundError("h must be strictly increasing")
        if np.any(self.delta_i < 0):
            raise BoundError("delta_i must be nonnegative")

    @classmethod
    def constant(cls, value: float, h_min: float = 0.0, h_max: float = 20.0) -> "DeltaITable":
        return cls(np.array([h_min, h_max]), np.array([value, value]))

    def __call__(self, h) -> np.ndarray:
        h = np.asarray(h, dtype=float)
        if np.any(h < self.h[0]) or np.any(h > self.h[-1]):
            raise BoundError(f"h outside the table range [{self.h[0]}, {self.h[-1]}]")
        return np.interp(h, self.h, self.delta_i)

    @classmethod
    def from_csv(cls, text: str) -> "DeltaITable":
        meta, body = [], []
        for ln in text.splitlines():
            if ln.lstrip().startswith("#"):
                meta.append(ln.lstrip()[1:].strip())
            elif ln.strip():
                body.append(ln)
        reader = csv.DictReader(body)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["h", "delta_i_nats"]:
            raise BoundError("delta-I CSV header must be 'h,delta_i_nats'")
        hs, ds = [], []
        for row in reader:
            row = {k.strip(): v for k, v in row.items()}
            hs.append(float(row["h"]))
            ds.append(float(row["delta_i_nats"]))
        return cls(np.array(hs), np.array(ds), meta)

    @classmethod
    def load(cls, path) -> "DeltaITable":
        return cls.from_csv(Path(path).read_text())

    def to_csv(self) -> str:
        buf = io.StringIO()
        for m in self.metadata:
            buf.write(f"# {m}\n")
        buf.write("h,delta_i_nats\n")
        for h, d in zip(self.h, self.delta_i):
            buf.write(f"{fmt(h)},{fmt(d)}\n")
        return buf.getvalue()


@dataclass(frozen=True)
class LdpcRateRow:
    h: float
    rate_h14: float
    rate_h18: float


def ldpc_adjusted_rates(table: DeltaITable, h_grid: Iterable[float], N0: float = 1.0,
                        spec: QuadratureSpec = DEFAULT_SPEC, base: Sequence[RateRow] | None = None) -> List[LdpcRateRow]:
    """BPSK rate curves lowered by twice the interpolated gap delta_I(h)."""
    hs = np.asarray(list(h_grid), dtype=float)
    gaps = table(hs)
    base = list(base) if base is not None else bpsk_rate_curves(hs, N0, spec)
    return [LdpcRateRow(r.h, r.rate_h13 - 2 * g, r.rate_h17 - 2 * g) for r, g in zip(base, gaps)]


def fmt(x) -> str:
    """Decimal with 10 significant digits."""
    if x is None:
        return ""
    return f"{float(x):.10g}"


def rates_csv(rows: Sequence[RateRow], ldpc: Sequence[LdpcRateRow] | None = None) -> str:
    buf = io.StringIO()
    header = ["h", "rate_h13_nats", "rate_h17_nats", "i_h_nats"]
    if ldpc is not None:
        header += ["rate_h14_nats", "rate_h18_nats"]
    buf.write(",".join(header) + "\n")
    for i, r in enumerate(rows):
        vals = [r.h, r.rate_h13, r.rate_h17, r.i_h]
        if ldpc is not None:
            vals += [ldpc[i].rate_h14, ldpc[i].rate_h18]
        buf.write(",".join(fmt(v) for v in vals) + "\n")
    return buf.getvalue()


def bounds_csv(reports: Sequence[LeakageBoundReport]) -> str:
    with_b2 = any(r.b2 is not None for r in reports)
    header = ["n", "k", "kbar", "q", "s_star", "b1", "log2_b1"]
    if with_b2:
        header += ["b2", "log2_b2", "A"]
    lines = [",".join(header)]
    for r in reports:
        vals = [str(r.n), str(r.k), str(r.kbar), str(r.q), fmt(r.s_star), fmt(r.b1), fmt(r.log2_b1)]
        if with_b2:
            vals += [fmt(r.b2), fmt(r.log2_b2), fmt(r.A_used)]
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# verification harness


@dataclass
class CheckResult:
    name: str
    cases: int
    violations: int
    worst_margin: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.violations == 0


@dataclass
class VerificationReport:
    checks: List[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def table(self) -> str:
        lines = [f"{'check':<28}{'cases':>8}{'fail':>6}{'worst margin':>16}{'tol':>10}  status"]
        for c in self.checks:
            lines.append(f"{c.name:<28}{c.cases:>8}{c.violations:>6}{c.worst_margin:>16.6e}"
                         f"{c.tolerance:>10.0e}  {'PASS' if c.passed else 'FAIL'}")
        return "\n".join(lines)


@dataclass(frozen=True)
class VerificationGrid:
    hs: tuple = (0.5, 1.0, 2.0, 4.0)
    b2_b1_s: tuple = (0.1, 0.3, 0.5)
    marginal_s: tuple = (0.1, 0.25, 0.5)
    ns: tuple = (8, 16, 64)
    k_fractions: tuple = (0.25, 0.5, 0.75)
    N0: float = 1.0

    @classmethod
    def small(cls) -> "VerificationGrid":
        return cls(hs=(1.0, 4.0), b2_b1_s=(0.1, 0.5), marginal_s=(0.25,), ns=(8,), k_fractions=(0.5,))


FAULTS = ("a_times_q", "a_squared")


def verify_inequalities(grid: VerificationGrid = VerificationGrid(), spec: QuadratureSpec = DEFAULT_SPEC,
                        fault: str | None = None) -> VerificationReport:
    """Check B2[A] <= 2 B1 at A = q^(n-k) on the grid, along with the Renyi
    marginalization inequality, the sum-rate identity
    min(2r0 - I12, r0 - I1) = 2 I_sum - I12 at r0 = I_sum, and rate3 >= rate1.

    Margins are reported so that negative means violated.  ``fault`` replaces
    the A fed to B2 by a deliberately wrong value to exercise the harness.
    """
    if fault is not None and fault not in FAULTS:
        raise BoundError(f"unknown fault {fault!r}")
    q = 2
    channels = [MacChannelParams.bpsk(h, grid.N0) for h in grid.hs]
    caches = [RenyiCache(ch, spec) for ch in channels]
    checks = []

    # B2[q^(n-k)] <= 2 B1, relative tolerance 1e-9 on the log scale
    tol1 = 1e-9
    cases = viol = 0
    worst = math.inf
    for cache in caches:
        for s in grid.b2_b1_s:
            i1, i12 = cache(s, "X1"), cache(s, "X1X2")
            for n in grid.ns:
                for frac in grid.k_fractions:
                    k = int(round(frac * n))
                    for kb in range(k + 1):
                        p = CodeRateParams(n, k, kb, q)
                        A = p.max_A
                        if fault == "a_times_q":
                            A *= q
                        elif fault == "a_squared":
                            A = A * A
                        lhs = log_bound_b2(p, s, A, i1, i12)
                        rhs = LN2 + log_bound_b1(p, s, i1)
                        margin = rhs - lhs
                        cases += 1
                        worst = min(worst, margin)
                        if margin < -tol1 * max(1.0, abs(rhs)):
                            viol += 1
    checks.append(CheckResult("b2_le_2b1", cases, viol, worst, tol1))

    # Renyi marginalization: exp(s I12) <= q^s exp(s I1)
    tol3 = 1e-9
    cases = viol = 0
    worst = math.inf
    for cache in caches:
        for s in grid.marginal_s:
            lhs = s * cache(s, "X1X2")
            rhs = s * math.log(q) + s * cache(s, "X1")
            margin = rhs - lhs
            cases += 1
            worst = min(worst, margin)
            if margin < -tol3 * max(1.0, abs(rhs)):
                viol += 1
    checks.append(CheckResult("renyi_marginalization", cases, viol, worst, tol3))

    # min(2r0 - I12, r0 - I1) at r0 = I_sum equals 2 I_sum - I12
    tolc = 1e-6
    cases = viol = 0
    worst = math.inf
    gap_cases = gap_viol = 0
    gap_worst = math.inf
    for ch in channels:
        info = mutual_infos(ch, spec)
        rep = rate_report(info, info.i_y_sum, 0.0)
        margin = tolc - abs(rep.rate3 - (2 * info.i_y_sum - info.i_y_x1x2))
        cases += 1
        worst = min(worst, margin + 0.0)
        if margin < 0:
            viol += 1
        gap = rep.rate3 - rep.rate1
        gap_cases += 1
        gap_worst = min(gap_worst, gap)
        if gap < -tolc:
            gap_viol += 1
    checks.append(CheckResult("sum_rate_identity", cases, viol, worst, tolc))
    checks.append(CheckResult("rate3_ge_rate1", gap_cases, gap_viol, gap_worst, tolc))
    return VerificationReport(checks)
