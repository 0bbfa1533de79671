"""Command-line interface: test, optimize, benchmark, slope, surface."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from .bahadur import SlopeConfig, efficiency_gauss, fssd_slope_gauss, lks_slope_gauss
from .exceptions import SteinGofError
from .harness import (
    RunSpec,
    benchmark_csv,
    ingest_csv,
    run_benchmark,
    run_method,
    run_surface_scan,
)
from .models import model_from_config
from .optimize import OptimizerConfig, optimize_locations


def _write_out(text, out):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _load_model(path):
    with open(path) as fh:
        return model_from_config(json.load(fh))


def _add_common(p):
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--train-fraction", type=float, default=0.2)
    p.add_argument("--j", type=int, default=5, help="number of test locations")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output path ('-' for stdout)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="steingof",
        description="Goodness-of-fit testing for unnormalized models via Stein features.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", help="run one test on one dataset")
    p.add_argument("--model", required=True, help="model config JSON")
    p.add_argument("--data", required=True, help="sample CSV, one row per point")
    p.add_argument(
        "--method", required=True, choices=["fssd_opt", "fssd_rand", "ksd", "lks"]
    )
    _add_common(p)

    p = sub.add_parser("optimize", help="tune test locations on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--gamma", type=float, default=1e-4)
    _add_common(p)

    p = sub.add_parser("benchmark", help="run a benchmark spec")
    p.add_argument("--spec", required=True, help="RunSpec JSON file")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--timing", action="store_true", help="include wall times in CSV")
    p.add_argument("--out", default=None)

    p = sub.add_parser("slope", help="closed-form Bahadur slopes and efficiency")
    p.add_argument("--mu-q", type=float, required=True)
    p.add_argument("--sigma-q-sq", type=float, default=1.0)
    p.add_argument("--v", type=float, default=None, help="default 2*mu_q")
    p.add_argument("--sigma-k-sq", type=float, default=1.0)
    p.add_argument("--kappa-sq", type=float, default=1.0)
    p.add_argument(
        "--grid",
        default=None,
        help="sweep mu_q over lo:hi:count and emit CSV instead of a single row",
    )
    p.add_argument("--out", default=None)

    p = sub.add_parser("surface", help="power-criterion grid scan of one location")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument(
        "--grid",
        required=True,
        help="per-dimension lo:hi:count triples, comma separated (d <= 2)",
    )
    p.add_argument("--gamma", type=float, default=1e-4)
    p.add_argument("--bandwidth-sq", type=float, default=None)
    p.add_argument("--out", default=None)
    return parser


def _parse_grid(text):
    grid = []
    for part in text.split(","):
        lo, hi, count = part.split(":")
        grid.append((float(lo), float(hi), int(count)))
    return grid


def _slope_row(mu_q, sigma_q_sq, v, sigma_k_sq, kappa_sq):
    cfg = SlopeConfig(
        mu_q=mu_q, sigma_q_sq=sigma_q_sq, v=v, sigma_k_sq=sigma_k_sq, kappa_sq=kappa_sq
    )
    c_fssd = fssd_slope_gauss(cfg)
    c_lks = lks_slope_gauss(mu_q, sigma_q_sq, kappa_sq)
    try:
        eff = efficiency_gauss(cfg)
    except SteinGofError:
        eff = float("nan")
    return [mu_q, sigma_q_sq, v, sigma_k_sq, kappa_sq, c_fssd, c_lks, eff]


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "test":
            model = _load_model(args.model)
            sample = ingest_csv(args.data, expected_d=model.dim)
            spec = RunSpec(
                problem="same_gauss",  # placeholder; only protocol knobs are used
                methods=(args.method,),
                n=sample.n,
                d=model.dim,
                trials=1,
                alpha=args.alpha,
                J=args.j,
                train_fraction=args.train_fraction,
            )
            seq = np.random.SeedSequence(args.seed)
            result = run_method(args.method, model, sample, spec, seq)
            _write_out(result.to_json() + "\n", args.out)
        elif args.command == "optimize":
            model = _load_model(args.model)
            sample = ingest_csv(args.data, expected_d=model.dim)
            config = OptimizerConfig(
                gamma=args.gamma,
                train_fraction=args.train_fraction,
                seed=args.seed,
            )
            locations = optimize_locations(model, sample, args.j, config)
            _write_out(locations.to_json() + "\n", args.out)
        elif args.command == "benchmark":
            with open(args.spec) as fh:
                spec = RunSpec.from_dict(json.load(fh))
            rows = run_benchmark(spec, workers=args.workers)
            _write_out(benchmark_csv(rows, include_time=args.timing), args.out)
        elif args.command == "slope":
            header = [
                "mu_q", "sigma_q_sq", "v", "sigma_k_sq", "kappa_sq",
                "c_fssd", "c_lks", "efficiency",
            ]
            buf = io.StringIO()
            writer = csv.writer(buf, lineterminator="\n")
            writer.writerow(header)
            if args.grid is not None:
                lo, hi, count = args.grid.split(":")
                for mu_q in np.linspace(float(lo), float(hi), int(count)):
                    v = 2.0 * mu_q if args.v is None else args.v
                    writer.writerow(
                        _slope_row(float(mu_q), args.sigma_q_sq, v,
                                   args.sigma_k_sq, args.kappa_sq)
                    )
            else:
                v = 2.0 * args.mu_q if args.v is None else args.v
                writer.writerow(
                    _slope_row(args.mu_q, args.sigma_q_sq, v,
                               args.sigma_k_sq, args.kappa_sq)
                )
            _write_out(buf.getvalue(), args.out)
        elif args.command == "surface":
            model = _load_model(args.model)
            sample = ingest_csv(args.data, expected_d=model.dim)
            grid = _parse_grid(args.grid)
            rows, best = run_surface_scan(
                model, sample, grid, bandwidth_sq=args.bandwidth_sq, gamma=args.gamma
            )
            buf = io.StringIO()
            writer = csv.writer(buf, lineterminator="\n")
            d = rows.shape[1] - 1
            writer.writerow([f"v{i + 1}" for i in range(d)] + ["criterion"])
            for row in rows:
                writer.writerow([repr(x) for x in row])
            writer.writerow(["argmax"] * 1 + [repr(x) for x in best])
            _write_out(buf.getvalue(), args.out)
    except SteinGofError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
