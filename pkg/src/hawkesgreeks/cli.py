"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 degenerate model,
4 convergence gate failed.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

from . import estimators as est
from .config import OUTPUT_ENV, ConfigError, RunConfig, config_keys, parse_config
from .convergence import MIN_STABLE_PATHS, run_convergence
from .hawkes import StripOverflow
from .malliavin import DegenerateModelError, build_weight, find_v1

EXIT_OK, EXIT_CONFIG, EXIT_DEGENERATE, EXIT_GATE = 0, 2, 3, 4
METHOD_CHOICES = ("exact", "wm", "pm", "wp", "fd", "all")


def fmt(v) -> str:
    """Shortest text that round-trips the float, for byte-stable files."""
    return format(float(v), ".17g")


def _write(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _delta_rows(results, timings: bool):
    for d in results:
        row = [d.method, fmt(d.strike), fmt(d.value), fmt(d.stderr), d.n_paths]
        if timings:
            row.append(fmt(d.wallclock))
        yield row


def _delta_header(timings: bool) -> list[str]:
    head = ["method", "K", "value", "stderr", "n_paths"]
    return head + ["wallclock"] if timings else head


def cmd_price(cfg: RunConfig, args) -> int:
    r = est.price(cfg.model, cfg.hawkes, cfg.mc)
    _write(cfg.output_dir / "price.csv", ["kind", "K", "value", "stderr", "n_paths"],
           [[cfg.mc.kind, fmt(cfg.mc.strike), fmt(r.value), fmt(r.stderr), r.n_paths]])
    print(f"{cfg.mc.kind} price K={cfg.mc.strike:g}: {r.value:.6f} +/- {r.stderr:.6f}")
    return EXIT_OK


def cmd_delta(cfg: RunConfig, args) -> int:
    methods = est.METHODS if args.method == "all" else (args.method,)
    results = est.deltas(cfg.model, cfg.hawkes, cfg.mc, methods)
    _write(cfg.output_dir / "delta.csv", _delta_header(args.timings), _delta_rows(results, args.timings))
    for d in results:
        print(f"{d.method:5s} {d.value:.6f} +/- {d.stderr:.6f}")
    return EXIT_OK


def cmd_convergence(cfg: RunConfig, args) -> int:
    if cfg.mc.n_paths < MIN_STABLE_PATHS:
        print(f"warning: {cfg.mc.n_paths} paths may be too few for a stable regression "
              f"(recommend >= {MIN_STABLE_PATHS})", file=sys.stderr)
    r = run_convergence(cfg.model, cfg.hawkes, cfg.mc.n_paths, cfg.mc.seed, cfg.grids)
    _write(cfg.output_dir / "convergence.csv",
           ["n", "lambda_mse", "lambda_stderr", "x_mse", "x_stderr"],
           [[int(n), fmt(a), fmt(b), fmt(c), fmt(d)]
            for n, a, b, c, d in zip(r.grids, r.lambda_mse, r.lambda_stderr, r.x_mse, r.x_stderr)])
    _write(cfg.output_dir / "convergence_slopes.csv", ["quantity", "slope", "gate", "passed"],
           [["lambda", fmt(r.lambda_slope), "-0.8", int(r.lambda_slope <= -0.8)],
            ["X", fmt(r.x_slope), "-0.4", int(r.x_slope <= -0.4)]])
    print(f"slope lambda: {r.lambda_slope:.3f} (gate <= -0.8)")
    print(f"slope X:      {r.x_slope:.3f} (gate <= -0.4)")
    return EXIT_OK if r.passed else EXIT_GATE


def cmd_table(cfg: RunConfig, args) -> int:
    methods = ("exact",) if args.method == "exact" else (
        ("wm", "pm", "wp", "fd") if args.method == "all" else (args.method,))
    strikes = est.table_strikes(cfg.model.s0)
    t = est.mse_table(cfg.model, cfg.hawkes, strikes, methods, cfg.mc)
    kind = cfg.mc.kind
    _write(cfg.output_dir / f"mse_{kind}.csv", ["method", "mse"],
           [[m.upper(), fmt(v)] for m, v in t.mse.items()])
    _write(cfg.output_dir / f"curves_{kind}.csv", _delta_header(args.timings),
           _delta_rows(t.curves, args.timings))
    _write(cfg.output_dir / f"reference_{kind}.csv", ["K", "value", "stderr", "n_paths"],
           [[fmt(k), fmt(v), fmt(e), cfg.mc.n_paths * 10]
            for k, v, e in zip(t.strikes, t.reference, t.reference_stderr)])
    for m, v in t.mse.items():
        print(f"{m.upper():5s} MSE {v:.3g}")
    return EXIT_OK


def cmd_dump_path(cfg: RunConfig, args) -> int:
    path = est.sample_path(cfg.model, cfg.hawkes, cfg.mc.seed, args.path_index, cfg.mc.grid_n)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    out = cfg.output_dir / f"path_{args.path_index}.csv"
    path.to_csv(out)
    if args.weights:
        v1 = find_v1(cfg.model, cfg.hawkes)
        w = build_weight(path, cfg.mc.kind, cfg.mc.strike, v1, cfg.mc.pm_empty_branch)
        w.to_csv(cfg.output_dir / f"weights_{args.path_index}.csv")
    print(f"wrote {out}")
    return EXIT_OK


COMMANDS = {
    "price": cmd_price,
    "delta": cmd_delta,
    "convergence": cmd_convergence,
    "table": cmd_table,
    "dump-path": cmd_dump_path,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value file")
    common.add_argument("--seed", type=str)
    common.add_argument("--paths", type=str)
    common.add_argument("--grid", type=str, help="time steps on [0, T]")
    common.add_argument("--strike", type=str)
    common.add_argument("--kind", type=str, help="european or asian")
    common.add_argument("--workers", type=str)
    common.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or .)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help=f"override any config key: {', '.join(config_keys())}")
    common.add_argument("--timings", action="store_true",
                        help="add a wallclock column (makes output non-reproducible)")

    p = argparse.ArgumentParser(prog="hawkesgreeks", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("price", parents=[common], help="Monte Carlo option price")
    d = sub.add_parser("delta", parents=[common], help="delta estimates at one strike")
    d.add_argument("--method", choices=METHOD_CHOICES, default="all")
    sub.add_parser("convergence", parents=[common], help="strong convergence slopes")
    t = sub.add_parser("table", parents=[common], help="MSE table over the strike grid")
    t.add_argument("--method", choices=METHOD_CHOICES, default="all")
    dp = sub.add_parser("dump-path", parents=[common], help="write one path (and weights) as CSV")
    dp.add_argument("--path-index", type=int, default=0)
    dp.add_argument("--weights", action="store_true", help="also dump the PM weight field")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides = {"seed": args.seed, "paths": args.paths, "grid": args.grid,
                 "strike": args.strike, "kind": args.kind, "workers": args.workers}
    for item in args.set:
        if "=" not in item:
            print(f"error: --set expects KEY=VALUE, got {item!r}", file=sys.stderr)
            return EXIT_CONFIG
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    try:
        cfg = parse_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out is not None:
        cfg = replace(cfg, output_dir=Path(args.out))
    try:
        return COMMANDS[args.command](cfg, args)
    except DegenerateModelError as exc:
        print(f"degenerate model: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except StripOverflow as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE


if __name__ == "__main__":
    sys.exit(main())
