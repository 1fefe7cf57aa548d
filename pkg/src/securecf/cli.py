"""Command-line front end.

Exit codes: 0 success, 2 usage or configuration error, 3 numeric failure,
4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import bounds, codes
from .channel import MacChannelParams
from .galois import FieldError, FieldMatrix
from .infoq import QuadratureError
from .protocol import ProtocolConfig, ProtocolError, error_rate, leakage_exact, leakage_mc

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_VERIFY = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _round(obj):
    """Recursively round floats to 10 significant digits for stable output."""
    if isinstance(obj, float):
        if math.isfinite(obj):
            return float(f"{obj:.10g}")
        return str(obj)
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, np.generic):
        return _round(obj.item())
    return obj


def dump_json(obj) -> str:
    return json.dumps(_round(obj), indent=2, sort_keys=True) + "\n"


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _run_config(args) -> dict:
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}
    return {"command": args.command, "flags": flags}


# --------------------------------------------------------------------------
# rates


def _h_grid(h_min: float, h_max: float, h_step: float) -> np.ndarray:
    if h_step <= 0 or h_max < h_min or h_min < 0:
        raise UsageError("need 0 <= h-min <= h-max and h-step > 0")
    count = int(math.floor((h_max - h_min) / h_step + 1e-9)) + 1
    return h_min + h_step * np.arange(count)


def cmd_rates(args) -> int:
    hs = _h_grid(args.h_min, args.h_max, args.h_step)
    rows = bounds.bpsk_rate_curves(hs, args.n0)
    ldpc = None
    if args.delta_i:
        table = bounds.DeltaITable.load(args.delta_i)
        try:
            ldpc = bounds.ldpc_adjusted_rates(table, hs, args.n0, base=rows)
        except bounds.BoundError as exc:
            raise UsageError(str(exc)) from exc
    text = bounds.rates_csv(rows, ldpc)
    if args.bits:
        text = _to_bits(text)
    _emit(text, args.output)

    series = {"rate_h13": [r.rate_h13 for r in rows], "rate_h17": [r.rate_h17 for r in rows]}
    funcs = {"rate_h13": bounds.rate_h13, "rate_h17": bounds.rate_h17}
    report = sys.stderr if not args.output else sys.stdout
    for name, vals in series.items():
        for a, b in bounds.zero_crossings(list(hs), vals):
            f = funcs[name]
            if f(a, args.n0) == 0.0:
                root = a
            elif f(b, args.n0) == 0.0:
                root = b
            else:
                root = bounds.bisect_root(lambda h: f(h, args.n0), a, b)
            report.write(f"# crossing {name} h={bounds.fmt(root)}\n")
        negative = [h for h, v in zip(hs, vals) if v < 0]
        if negative:
            report.write(f"# {name} negative on {len(negative)} grid points (max h {bounds.fmt(max(negative))}): "
                         "secure transmission of M1+M2 impossible there\n")
    return EXIT_OK


def _to_bits(text: str) -> str:
    lines = text.splitlines()
    header = lines[0].split(",")
    out = [",".join(h.replace("_nats", "_bits") for h in header)]
    for ln in lines[1:]:
        cells = ln.split(",")
        conv = [cells[0]] + [bounds.fmt(float(c) / bounds.LN2) for c in cells[1:]]
        out.append(",".join(conv))
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# bound


def _bpsk_channel(h: float, n0: float, h2: float | None = None) -> MacChannelParams:
    if not n0 > 0:
        raise UsageError("n0 must be positive")
    return MacChannelParams.bpsk(h, n0, h2)


def cmd_bound(args) -> int:
    if args.q != 2:
        raise UsageError("the BPSK channel needs q = 2")
    A = args.A
    a_error = None
    n, k = args.n, args.k
    if args.code:
        code = codes.GeneratorCode(FieldMatrix.load(args.code))
        if code.q != args.q:
            raise UsageError("code field differs from --q")
        n = code.n if n is None else n
        k = code.k if k is None else k
        if (n, k) != (code.n, code.k):
            raise UsageError(f"--n/--k disagree with the code ({code.n}, {code.k})")
        try:
            A, _ = codes.deviation_A(code)
        except codes.CodeError as exc:
            a_error = f"A computation infeasible: {exc}"
    if n is None or k is None:
        raise UsageError("--n and --k are required without --code")
    try:
        params = bounds.CodeRateParams(n, k, args.kbar, args.q)
    except bounds.BoundError as exc:
        raise UsageError(str(exc)) from exc
    if A is not None and A < 0:
        raise UsageError("A must be nonnegative")
    rep = bounds.leakage_bounds(params, _bpsk_channel(args.h, args.n0), A)
    out = rep.as_dict()
    out["h"], out["n0"] = args.h, args.n0
    out["units"] = "nats"
    out["run_config"] = _run_config(args)
    if a_error:
        out["A_error"] = a_error
    _emit(dump_json(out), args.output)
    return EXIT_NUMERIC if a_error else EXIT_OK


# --------------------------------------------------------------------------
# configuration files for simulate / leakage


def read_kv(path) -> dict:
    """Flat ``key = value`` file; blank lines and ``#`` comments are skipped."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, val = line.split("=", 1)
        else:
            parts = line.split(None, 1)
            if len(parts) != 2:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, val = parts
        values[key.strip().replace("_", "-")] = val.strip()
    return values


def _digits(text: str) -> list:
    text = text.replace(",", " ")
    return [int(t) for t in (text.split() if " " in text.strip() else list(text.strip()))]


def build_protocol_config(values: dict, base_dir: Path = Path(".")) -> ProtocolConfig:
    """Protocol configuration from flat key/value pairs; every problem is reported at once."""
    problems = []

    def get(key, conv, default=None):
        if key not in values:
            return default
        try:
            return conv(values[key])
        except (TypeError, ValueError):
            problems.append(f"{key}: cannot parse {values[key]!r}")
            return default

    h = get("h", float, None)
    h1 = get("h1", float, h)
    h2 = get("h2", float, h1)
    n0 = get("n0", float, 1.0)
    if h1 is None:
        problems.append("h (or h1) is required")
    if n0 is not None and not n0 > 0:
        problems.append("n0 must be positive")

    code = None
    parity = None
    try:
        if "alist" in values:
            parity = codes.load_alist(base_dir / values["alist"])
        if "code" in values:
            code = codes.GeneratorCode(FieldMatrix.load(base_dir / values["code"]))
        elif "code-kind" in values:
            kind = values["code-kind"]
            n, k = get("n", int), get("k", int)
            if kind == "repetition":
                code = codes.repetition_code(n)
            elif kind == "spc":
                code = codes.single_parity_check_code(n)
            elif kind == "hamming74":
                code, parity = codes.hamming_7_4()
            elif kind in ("uniform", "toeplitz"):
                code = codes.sample_code(codes.EnsembleSpec(kind, n, k, 2, get("code-seed", int, 0)))
            else:
                problems.append(f"code-kind: unknown kind {kind!r}")
        elif parity is not None:
            code = codes.generator_from_parity_check(parity)
        else:
            problems.append("one of code, code-kind or alist is required")
    except (OSError, FieldError, codes.CodeError, TypeError) as exc:
        problems.append(f"code: {exc}")

    kbar = get("kbar", int, 0)
    split = None
    if code is not None:
        try:
            if values.get("hash", "coordinate") == "toeplitz":
                split = codes.random_hash_split(code.k, kbar, code.q, get("hash-seed", int, 0))
            else:
                split = codes.make_hash_split(code.k, kbar, code.q)
        except codes.CodeError as exc:
            problems.append(f"kbar: {exc}")

    shift_mode = values.get("shift-mode", "random")
    e1 = get("e1", _digits)
    e2 = get("e2", _digits)
    decoder = values.get("decoder", "ml")
    iterations = get("bp-iterations", int, 50)
    broadcast = values.get("broadcast", "hashed")
    known = {"h", "h1", "h2", "n0", "alist", "code", "code-kind", "n", "k", "code-seed", "kbar", "hash",
             "hash-seed", "shift-mode", "e1", "e2", "decoder", "bp-iterations", "broadcast"}
    for key in sorted(set(values) - known):
        problems.append(f"unknown key {key!r}")

    if code is not None and split is not None and h1 is not None and n0 is not None and n0 > 0:
        try:
            probe = ProtocolConfig.__new__(ProtocolConfig)
            probe.channel = MacChannelParams.bpsk(h1, n0, h2)
            probe.code, probe.split = code, split
            probe.shift_mode, probe.decoder, probe.bp_iterations = shift_mode, decoder, iterations
            probe.broadcast = broadcast
            probe.parity_check = None if parity is None else np.asarray(parity) % 2
            probe.e1 = None if e1 is None else np.asarray(e1)
            probe.e2 = None if e2 is None else np.asarray(e2)
            problems.extend(probe.problems())
        except Exception as exc:  # noqa: BLE001 - reported with the rest
            problems.append(str(exc))
    elif decoder == "bp" and parity is None:
        problems.append("bp decoder needs a parity-check matrix")
    if problems:
        raise UsageError("invalid configuration:\n  " + "\n  ".join(problems))
    return ProtocolConfig(MacChannelParams.bpsk(h1, n0, h2), code, split, shift_mode,
                          None if e1 is None else np.asarray(e1), None if e2 is None else np.asarray(e2),
                          decoder, iterations, parity, broadcast)


def _config_values(args) -> tuple[dict, Path]:
    values: dict = {}
    base = Path(".")
    if args.config:
        values.update(read_kv(args.config))
        base = Path(args.config).parent
    for item in args.set or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, val = item.split("=", 1)
        values[key.strip().replace("_", "-")] = val.strip()
    return values, base


def cmd_simulate(args) -> int:
    values, base = _config_values(args)
    config = build_protocol_config(values, base)
    log = open(args.log, "w") if args.log else None
    try:
        res = error_rate(config, args.trials, args.seed, log)
    finally:
        if log:
            log.close()
    out = {
        "trials": res.trials,
        "sum_errors": res.sum_errors,
        "recovery_errors": res.recovery_errors,
        "p_sum_err": res.p_sum_err,
        "p_recovery_err": res.p_recovery_err,
        "confidence_halfwidth": res.confidence_halfwidth,
        "recovery_halfwidth": res.recovery_halfwidth,
        "n": config.code.n,
        "k": config.code.k,
        "kbar": config.split.kbar,
        "q": config.q,
        "decoder": config.decoder,
        "config": values,
        "seed": str(args.seed),
        "run_config": _run_config(args),
    }
    _emit(dump_json(out), args.output)
    return EXIT_OK


def cmd_leakage(args) -> int:
    values, base = _config_values(args)
    values.setdefault("shift-mode", "fixed")
    config = build_protocol_config(values, base)
    if config.shift_mode != "fixed":
        raise UsageError("leakage needs shift-mode = fixed")
    try:
        if args.method == "exact":
            est = leakage_exact(config, args.node, average_shifts=args.average_shifts)
        else:
            est = leakage_mc(config, args.node, args.samples, args.seed, average_shifts=args.average_shifts)
    except ProtocolError as exc:
        raise UsageError(str(exc)) from exc
    out = dict(est.__dict__)
    out["run_config"] = _run_config(args)
    _emit(dump_json(out), args.output)
    return EXIT_OK


def cmd_analyze(args) -> int:
    if bool(args.code) == bool(args.alist):
        raise UsageError("give exactly one of --code or --alist")
    if args.code:
        code = codes.GeneratorCode(FieldMatrix.load(args.code))
    else:
        code = codes.generator_from_parity_check(codes.load_alist(args.alist))
    out = {"n": code.n, "k": code.k, "q": code.q}
    try:
        comps = codes.composition_counts(code)
        A, lam = codes.deviation_A(code)
        out.update(A=A, argmax=list(lam), log_A_over_n=math.log(A) / code.n,
                   compositions={" ".join(map(str, k)): v for k, v in comps.items()})
    except codes.CodeError as exc:
        out["A_error"] = f"A computation infeasible: {exc}"
        _emit(dump_json(out), args.output)
        return EXIT_NUMERIC
    if args.write_generator:
        code.matrix.save(args.write_generator)
    _emit(dump_json(out), args.output)
    return EXIT_OK


def cmd_verify(args) -> int:
    grid = bounds.VerificationGrid.small() if args.grid == "small" else bounds.VerificationGrid()
    rep = bounds.verify_inequalities(grid, fault=args.inject_fault)
    sys.stdout.write(rep.table() + "\n")
    return EXIT_OK if rep.passed else EXIT_VERIFY


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="securecf", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("rates", help="BPSK rate curves (nats) and their zero crossings")
    r.add_argument("--n0", type=float, default=1.0)
    r.add_argument("--h-min", type=float, default=0.0)
    r.add_argument("--h-max", type=float, default=12.0)
    r.add_argument("--h-step", type=float, default=0.01)
    r.add_argument("--delta-i", metavar="FILE", help="CSV 'h,delta_i_nats' gap table for LDPC-adjusted rates")
    r.add_argument("--bits", action="store_true", help="display rates in bits")
    r.add_argument("--output", "-o")
    r.set_defaults(func=cmd_rates)

    b = sub.add_parser("bound", help="finite-length leakage bounds B1 and B2[A]")
    b.add_argument("--n", type=int)
    b.add_argument("--k", type=int)
    b.add_argument("--kbar", type=int, required=True)
    b.add_argument("--q", type=int, default=2)
    b.add_argument("--h", type=float, required=True)
    b.add_argument("--n0", type=float, default=1.0)
    g = b.add_mutually_exclusive_group()
    g.add_argument("--A", type=float)
    g.add_argument("--code", metavar="FILE", help="generator matrix file; A is computed from it")
    b.add_argument("--output", "-o")
    b.set_defaults(func=cmd_bound)

    s = sub.add_parser("simulate", help="Monte Carlo protocol simulation")
    s.add_argument("--config", metavar="FILE")
    s.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config value")
    s.add_argument("--trials", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--log", metavar="FILE", help="write one JSON trial record per line")
    s.add_argument("--output", "-o")
    s.set_defaults(func=cmd_simulate)

    lk = sub.add_parser("leakage", help="exact or Monte Carlo leakage to the relay")
    lk.add_argument("--config", metavar="FILE")
    lk.add_argument("--set", action="append", metavar="KEY=VALUE")
    lk.add_argument("--node", type=int, choices=(1, 2), default=1)
    lk.add_argument("--method", choices=("exact", "mc"), default="exact")
    lk.add_argument("--samples", type=int, default=20000)
    lk.add_argument("--seed", type=int, default=0)
    lk.add_argument("--average-shifts", action="store_true")
    lk.add_argument("--output", "-o")
    lk.set_defaults(func=cmd_leakage)

    a = sub.add_parser("analyze", help="composition counts and deviation A of a code")
    a.add_argument("--code", metavar="FILE")
    a.add_argument("--alist", metavar="FILE")
    a.add_argument("--write-generator", metavar="FILE")
    a.add_argument("--output", "-o")
    a.set_defaults(func=cmd_analyze)

    v = sub.add_parser("verify", help="check the bound inequalities on a grid")
    v.add_argument("--grid", choices=("full", "small"), default="full")
    v.add_argument("--inject-fault", choices=bounds.FAULTS, help=argparse.SUPPRESS)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if getattr(args, "seed", 0) is not None and not 0 <= getattr(args, "seed", 0) < 2**64:
        sys.stderr.write("error: seeds are 64-bit unsigned integers\n")
        return EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, FieldError, codes.CodeError, ProtocolError, bounds.BoundError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (QuadratureError, ArithmeticError) as exc:
        sys.stderr.write(f"numeric failure: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
