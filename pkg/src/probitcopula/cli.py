"""Command line entry points.

Four subcommands: ``simulate`` draws copula samples to CSV, ``fit``
estimates a density surface from a two-column dataset, ``bench`` runs the
Monte Carlo comparison described by a config file or flags, and ``ise``
scores one saved surface against another.  The config file is flat
``key = value`` text; any key can be overridden by the matching flag, and
the PROBITCOPULA_OUTDIR environment variable supplies the default output
directory.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

from .bench import (
    BenchmarkConfig,
    default_output_dir,
    fit_dataset,
    ise_grid,
    run_benchmark,
    write_report_csv,
)
from .copulas import parse_copula_spec, sample_copula
from .kde import read_grid_csv

__all__ = ["main", "load_config"]

CONFIG_KEYS = ("copulas", "estimators", "n", "reps", "grid_n", "seed", "outdir")


def load_config(path) -> dict:
    """Flat key = value file; '#' starts a comment, blank lines ignored."""
    cfg = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, eq, value = line.partition("=")
            if not eq:
                raise ValueError(f"config line {lineno}: expected 'key = value'")
            key = key.strip().lower()
            if key not in CONFIG_KEYS:
                raise ValueError(f"config line {lineno}: unknown key {key!r}")
            cfg[key] = value.strip()
    return cfg


def _split_specs(text: str) -> tuple[str, ...]:
    # spec strings contain commas (t:rho=...,nu=...), so lists use semicolons
    items = tuple(s.strip() for s in text.split(";") if s.strip())
    if not items:
        raise ValueError("empty spec list")
    return items


def _cmd_simulate(args) -> int:
    model = parse_copula_spec(args.model)
    u, v = sample_copula(model, args.n, args.seed)
    out = sys.stdout if args.out is None else open(args.out, "w", newline="")
    try:
        writer = csv.writer(out)
        writer.writerow(["u", "v"])
        for a, b in zip(u, v):
            writer.writerow([f"{a:.12g}", f"{b:.12g}"])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _cmd_fit(args) -> int:
    prefix = args.out
    if prefix is None:
        prefix = os.path.join(default_output_dir(), "fit_grid")
    grid, manifest = fit_dataset(
        args.data, args.estimator, grid_n=args.grid_n, out_prefix=prefix
    )
    for key, value in manifest.items():
        print(f"{key} = {value}")
    return 0


def _cmd_bench(args) -> int:
    cfg = load_config(args.config) if args.config else {}
    def pick(flag, key, fallback=None):
        return flag if flag is not None else cfg.get(key, fallback)
    copulas = pick(args.copulas, "copulas")
    estimators = pick(args.estimators, "estimators")
    if copulas is None or estimators is None:
        raise SystemExit("bench needs copulas and estimators (config file or flags)")
    config = BenchmarkConfig(
        copulas=_split_specs(copulas) if isinstance(copulas, str) else copulas,
        estimators=_split_specs(estimators) if isinstance(estimators, str) else estimators,
        n=int(pick(args.n, "n", 200)),
        reps=int(pick(args.reps, "reps", 50)),
        grid_n=int(pick(args.grid_n, "grid_n", 64)),
        seed=int(pick(args.seed, "seed", 20240801)),
    )
    outdir = pick(args.outdir, "outdir", default_output_dir())
    os.makedirs(outdir, exist_ok=True)
    if not args.quiet:
        total = len(config.copulas) * config.reps
        state = {"done": 0}
        def progress(cspec, rep):
            state["done"] += 1
            if state["done"] % max(1, total // 20) == 0:
                print(f"  {state['done']}/{total} replications", file=sys.stderr)
        report = run_benchmark(config, progress=progress)
    else:
        report = run_benchmark(config)
    path = os.path.join(outdir, "report.csv")
    write_report_csv(report, path)
    header = f"{'copula':28s} {'estimator':18s} {'mise':>10s} {'stderr':>9s} {'rel':>7s} {'fail':>4s}"
    print(header)
    for row in report.rows:
        print(
            f"{row['copula']:28s} {row['estimator']:18s} "
            f"{row['mise']:10.5f} {row['stderr']:9.5f} "
            f"{row['relative_to_mirror']:7.3f} {row['failures']:4d}"
        )
    print(f"report written to {path}")
    return 0


def _cmd_ise(args) -> int:
    estimate = read_grid_csv(args.estimate)
    truth = read_grid_csv(args.truth)
    print(f"{ise_grid(estimate, truth):.10g}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="probitcopula",
        description="Copula density estimation by probit-transformation kernels",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="draw copula samples to CSV")
    p_sim.add_argument("--model", required=True, help="e.g. gaussian:rho=0.59")
    p_sim.add_argument("--n", type=int, required=True)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out", default=None, help="output CSV (default stdout)")
    p_sim.set_defaults(func=_cmd_simulate)

    p_fit = sub.add_parser("fit", help="fit one estimator to a dataset")
    p_fit.add_argument("--data", required=True, help="two-column numeric CSV")
    p_fit.add_argument("--estimator", required=True, help="e.g. logquad or beta:h=0.02")
    p_fit.add_argument("--grid-n", type=int, default=64, dest="grid_n")
    p_fit.add_argument("--out", default=None,
                       help="output prefix (writes <out>.csv and <out>.manifest.txt)")
    p_fit.set_defaults(func=_cmd_fit)

    p_bench = sub.add_parser("bench", help="run the Monte Carlo comparison")
    p_bench.add_argument("--config", default=None, help="flat key=value config file")
    p_bench.add_argument("--copulas", default=None,
                         help="semicolon-separated model specs")
    p_bench.add_argument("--estimators", default=None,
                         help="semicolon-separated estimator specs")
    p_bench.add_argument("--n", type=int, default=None)
    p_bench.add_argument("--reps", type=int, default=None)
    p_bench.add_argument("--grid-n", type=int, default=None, dest="grid_n")
    p_bench.add_argument("--seed", type=int, default=None)
    p_bench.add_argument("--outdir", default=None)
    p_bench.add_argument("--quiet", action="store_true")
    p_bench.set_defaults(func=_cmd_bench)

    p_ise = sub.add_parser("ise", help="integrated squared error between grids")
    p_ise.add_argument("--estimate", required=True)
    p_ise.add_argument("--truth", required=True)
    p_ise.set_defaults(func=_cmd_ise)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
