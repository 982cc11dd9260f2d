"""Command-line front end.

Subcommands:
    bound             one tail bound, optionally with its plug-back residual
    keyrate           full key-rate report at one fiber length
    scan              key rate against fiber length, one CSV row per (L, method)
    compare-sampling  sampling-bound deviation against the test-sample size
    compare-expected  lower bounds on an expectation against the observed count

Exit codes: 0 success, 2 usage, 3 config validation, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Sequence

import numpy as np

from .channel import simulate_counts
from .config import ConfigError, RunConfig, load_config
from .decoy import PIPELINE_METHODS, evaluate
from .numerics import DomainError
from .optimizer import optimize_keyrate
from .tail_bounds import (
    MethodTag,
    SampleSplit,
    chernoff_delta_lower,
    chernoff_delta_upper,
    chernoff_lower_residual,
    chernoff_upper_residual,
    expected_lower,
    gamma_upper_analytic,
    gamma_upper_numeric,
    sampling_gamma,
    sampling_residual,
    variant_delta_lower,
    variant_delta_upper,
    variant_lower_residual,
    variant_upper_residual,
)

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3, 4

SCAN_COLUMNS = ("L_km", "method", "key_rate", "ell", "s0", "s1", "phi1",
                "mu", "nu", "p_mu", "p_nu", "p_z", "q_z")
SAMPLING_METHODS = (MethodTag.OURS_NUMERIC, MethodTag.OURS_ANALYTIC, MethodTag.SERFLING,
                    MethodTag.LIM, MethodTag.ZHANG_NUMERIC)
EXPECTED_METHODS = (MethodTag.OURS_NUMERIC, MethodTag.OURS_ANALYTIC, MethodTag.ZHANG_NUMERIC,
                    MethodTag.ZHANG_ANALYTIC, MethodTag.GAUSSIAN)


class UsageError(Exception):
    pass


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    return "%.9e" % value


def _csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _parse_methods(text: str | None, default: Sequence[MethodTag],
                   allowed: Sequence[MethodTag]) -> tuple[MethodTag, ...]:
    if text is None:
        return tuple(default)
    out = []
    for name in text.split(","):
        try:
            tag = MethodTag.parse(name.strip())
        except (DomainError, ValueError):
            raise UsageError(f"unknown method {name.strip()!r}") from None
        if tag not in allowed:
            raise UsageError(f"method {tag.value} is not available here; "
                             f"choose from {', '.join(m.value for m in allowed)}")
        out.append(tag)
    return tuple(out)


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _log_grid(lo: float, hi: float, points: int) -> list[float]:
    if not 0 < lo <= hi or points < 1:
        raise UsageError("log grid needs 0 < min <= max and at least one point")
    if points == 1:
        return [lo]
    return [float(v) for v in np.logspace(math.log10(lo), math.log10(hi), points)]


# --- bound ---------------------------------------------------------------

def _need(args, *names: str) -> None:
    missing = [f"--{n.replace('_', '-') if n != 'lam' else 'lambda'}"
               for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"family {args.family} needs {', '.join(missing)}")


def cmd_bound(args) -> int:
    eps = args.eps
    upper = args.direction == "upper"
    if args.family == "sampling":
        _need(args, "n", "k", "lam")
        s = SampleSplit(args.n, args.k, args.lam, eps)
        dev = gamma_upper_numeric(s) if args.mode == "numeric" else gamma_upper_analytic(s)
        residual = sampling_residual(dev.width, s)
        direction = "upper"
    elif args.family == "chernoff":
        _need(args, "xstar")
        fn = chernoff_delta_upper if upper else chernoff_delta_lower
        dev = fn(args.xstar, eps, args.mode)
        res_fn = chernoff_upper_residual if upper else chernoff_lower_residual
        residual = res_fn(dev.width / args.xstar, args.xstar, eps) if args.xstar > 0 else math.nan
        direction = args.direction
    else:
        _need(args, "x")
        fn = variant_delta_upper if upper else variant_delta_lower
        dev = fn(args.x, eps, args.mode)
        if upper:
            residual = variant_upper_residual(dev.width, args.x, eps)
        else:
            residual = variant_lower_residual(dev.width, args.x, eps) if args.x > 0 else math.nan
        direction = args.direction
    header = ["family", "mode", "direction", "width", "bound", "clamped"]
    row = [args.family, args.mode, direction, dev.width, dev.bound, str(dev.clamped).lower()]
    if args.verbose:
        header.append("residual")
        row.append(residual)
    _emit(_csv_text(header, [row]), args.output)
    return EXIT_OK


# --- key rate ------------------------------------------------------------

def _config(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, optimizer=replace(cfg.optimizer, seed=args.seed))
    return cfg


def _point(cfg: RunConfig, L: float, methods: Sequence[MethodTag], optimize: bool) -> list[tuple]:
    """Reports for all methods at one fiber length, in the order given."""
    model = cfg.channel.at(L)
    results = {}
    order = list(methods)
    # the numeric method starts from the analytic optimum, which it dominates
    if optimize and MethodTag.OURS_NUMERIC in order and MethodTag.OURS_ANALYTIC in order:
        order.remove(MethodTag.OURS_ANALYTIC)
        order.insert(order.index(MethodTag.OURS_NUMERIC), MethodTag.OURS_ANALYTIC)
    for method in order:
        if optimize:
            warm = ()
            if method is MethodTag.OURS_NUMERIC and MethodTag.OURS_ANALYTIC in results:
                warm = (results[MethodTag.OURS_ANALYTIC][0],)
            results[method] = optimize_keyrate(model, cfg.budget, method, cfg.protocol,
                                               cfg.space, cfg.optimizer, warm_starts=warm)
        else:
            counts = simulate_counts(model, cfg.protocol)
            results[method] = (cfg.protocol, evaluate(counts, cfg.protocol, cfg.budget, method))
    return [(L, m) + results[m] for m in methods]


def _scan_row(L, method, params, report) -> list:
    return [L, method.value, report.key_rate, report.ell, report.s0_lower, report.s1_lower,
            report.phi1_upper, params.mu, params.nu, params.p_mu, params.p_nu,
            params.p_z, params.q_z]


def _methods_for(args, cfg: RunConfig) -> tuple[MethodTag, ...]:
    return _parse_methods(args.method, cfg.methods, PIPELINE_METHODS)


def cmd_keyrate(args) -> int:
    cfg = _config(args)
    methods = _methods_for(args, cfg)
    L = cfg.channel.L if args.L is None else args.L
    if L < 0:
        raise UsageError("--L must be nonnegative")
    results = _point(cfg, L, methods, args.optimize)
    doc = {
        "L_km": L,
        "config": cfg.to_dict(),
        "results": [{"method": m.value, "params": {k: getattr(p, k) for k in
                                                   ("mu", "nu", "p_mu", "p_nu", "p_z", "q_z")},
                     "report": r.to_dict()} for _, m, p, r in results],
    }
    sys.stdout.write(json.dumps(doc, indent=2, sort_keys=False) + "\n")
    if args.output:
        _emit(_csv_text(SCAN_COLUMNS, [_scan_row(*r) for r in results]), args.output)
    return EXIT_OK


def _scan_task(payload):
    cfg, L, methods, optimize = payload
    return _point(cfg, L, methods, optimize)


def cmd_scan(args) -> int:
    cfg = _config(args)
    methods = _methods_for(args, cfg)
    lengths = cfg.sweep.lengths()
    payloads = [(cfg, L, methods, args.optimize) for L in lengths]
    if args.jobs > 1 and len(lengths) > 1:
        # map keeps submission order, so the output does not depend on scheduling
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            blocks = list(pool.map(_scan_task, payloads))
    else:
        blocks = [_scan_task(p) for p in payloads]
    rows = [_scan_row(*r) for block in blocks for r in block]
    _emit(_csv_text(SCAN_COLUMNS, rows), args.output)
    return EXIT_OK


# --- comparisons ---------------------------------------------------------

def cmd_compare_sampling(args) -> int:
    methods = _parse_methods(args.method, SAMPLING_METHODS, SAMPLING_METHODS)
    ks = _float_list(args.k) if args.k else _log_grid(args.k_min, args.k_max, args.points)
    lams = _float_list(args.lam)
    rows = []
    for k in ks:
        for lam in lams:
            s = SampleSplit(args.n, k, lam, args.eps)
            for m in methods:
                rows.append([k, lam, m.value, sampling_gamma(m, s).width])
    _emit(_csv_text(("k", "lambda", "method", "gamma"), rows), args.output)
    return EXIT_OK


def cmd_compare_expected(args) -> int:
    methods = _parse_methods(args.method, EXPECTED_METHODS,
                             EXPECTED_METHODS + (MethodTag.CURTY,))
    xs = _float_list(args.x) if args.x else _log_grid(args.x_min, args.x_max, args.points)
    rows = [[x, m.value, expected_lower(m, x, args.eps).bound] for x in xs for m in methods]
    _emit(_csv_text(("x", "method", "lower_bound"), rows), args.output)
    return EXIT_OK


# --- parser --------------------------------------------------------------

def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="finitekey", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        p.add_argument("--output", help="write CSV here instead of stdout")
        p.add_argument("--method", "--methods", dest="method",
                       help="comma-separated method names")
        if config:
            p.add_argument("--config", help="JSON run configuration (default: bundled Table I)")
            p.add_argument("--optimize", action="store_true",
                           help="optimize intensities and probabilities per fiber length")
            p.add_argument("--seed", type=int, help="optimizer seed (overrides the config)")
            p.add_argument("--jobs", type=_positive_int, default=1,
                           help="worker processes for the sweep")

    p = sub.add_parser("bound", help="evaluate one tail bound")
    p.add_argument("--family", required=True, choices=("sampling", "chernoff", "variant"))
    p.add_argument("--mode", default="analytic", choices=("numeric", "analytic"))
    p.add_argument("--direction", default="upper", choices=("upper", "lower"))
    p.add_argument("--n", type=float, help="untested population size (sampling)")
    p.add_argument("--k", type=float, help="test sample size (sampling)")
    p.add_argument("--lambda", dest="lam", type=float, help="observed error fraction (sampling)")
    p.add_argument("--xstar", type=float, help="expected value (chernoff)")
    p.add_argument("--x", type=float, help="observed value (variant)")
    p.add_argument("--eps", type=float, required=True, help="failure probability")
    p.add_argument("--verbose", action="store_true",
                   help="also print the defining-equation residual at the width "
                        "(~0 for numeric mode, the slack for analytic)")
    p.add_argument("--output", help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("keyrate", help="key-rate report at one fiber length")
    common(p)
    p.add_argument("--L", type=float, help="fiber length in km (default: channel.L)")
    p.set_defaults(func=cmd_keyrate)

    p = sub.add_parser("scan", help="key rate against fiber length")
    common(p)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("compare-sampling", help="sampling bounds against the sample size")
    common(p, config=False)
    p.add_argument("--n", type=float, default=1e5)
    p.add_argument("--eps", type=float, default=1e-10)
    p.add_argument("--lambda", dest="lam", default="0.01", help="comma-separated error fractions")
    p.add_argument("--k", help="comma-separated sample sizes (overrides the grid)")
    p.add_argument("--k-min", type=float, default=1e3)
    p.add_argument("--k-max", type=float, default=1e7)
    p.add_argument("--points", type=_positive_int, default=21)
    p.set_defaults(func=cmd_compare_sampling)

    p = sub.add_parser("compare-expected", help="expectation lower bounds against the count")
    common(p, config=False)
    p.add_argument("--eps", type=float, default=1e-10)
    p.add_argument("--x", help="comma-separated observed values (overrides the grid)")
    p.add_argument("--x-min", type=float, default=1.0)
    p.add_argument("--x-max", type=float, default=1e4)
    p.add_argument("--points", type=_positive_int, default=41)
    p.set_defaults(func=cmd_compare_expected)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    uses_config = args.command in ("keyrate", "scan")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"finitekey {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"finitekey {args.command}: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        # from a validated config this is an inconsistent run, otherwise a bad flag
        print(f"finitekey {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG if uses_config else EXIT_USAGE
    except ArithmeticError as exc:
        print(f"finitekey {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
