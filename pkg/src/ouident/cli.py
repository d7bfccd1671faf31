"""Command-line entry point: ``ouident <command> --config PATH [options]``.

Exit codes: 0 when every applicable check passes, 1 when a check fails,
2 for configuration or precondition errors (including bad flags).
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from .config import ConfigError, load_config
from .fields import GridField, GridSpec, SchwartzFunction, sample, write_csv
from .harness import COMMAND_STAGES, run_suite
from .kernel import convolution_kernel
from .resolvent import resolve
from .spectral import AssumptionError, eigenstructure

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _pair(text: str, kind=float):
    try:
        a, b = text.split(",")
        return kind(a), float(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}") from None


def _grid(text: str):
    return _pair(text, int)


def _lambda(text: str) -> complex:
    re, im = _pair(text)
    return complex(re, im)


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ouident", description="Verify Ornstein-Uhlenbeck operator estimates.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*COMMAND_STAGES, "dump"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="config path or bundled name")
        p.add_argument("--out", help="write output here instead of stdout")
        p.add_argument("--format", choices=("json", "table"), default="table")
        p.add_argument("--seed", type=_seed)
        p.add_argument("--grid", type=_grid, metavar="n,L")
        p.add_argument("--p", type=float)
        p.add_argument("--lambda", dest="lam", type=_lambda, metavar="RE,IM")
        if name == "dump":
            p.add_argument("--what", choices=("kernel", "resolvent"), default="kernel")
            p.add_argument("--t", type=float, default=0.5, help="kernel time")
    return parser


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dump(cfg, args) -> int:
    prob = cfg.problem
    spec = GridSpec(prob.d, cfg.L, cfg.n)
    eig = eigenstructure(prob.A, prob.B)
    if args.what == "kernel":
        K = convolution_kernel(prob, eig, spec.points(), args.t)
        field = GridField(spec, K.reshape(K.shape[:-2] + (prob.N * prob.N,)))
    else:
        lam = cfg.lambdas[0] if cfg.lambdas else 1.0
        rng = np.random.default_rng(cfg.seed + 1)
        g = sample(SchwartzFunction.random(rng, prob.d, prob.N, spread=0.25), spec)
        field = resolve(prob, eig, g, lam).v
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_csv(field, fh)
    else:
        write_csv(field, sys.stdout)
    return EXIT_PASS


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PASS if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = load_config(args.config)
        if any(x is not None for x in (args.seed, args.grid, args.p, args.lam)):
            cfg = cfg.override(seed=args.seed, grid=args.grid, p=args.p, lam=args.lam)
        if args.command == "dump":
            return _dump(cfg, args)
    except (ConfigError, AssumptionError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    report = run_suite(cfg, COMMAND_STAGES[args.command])
    _emit(report.to_json() if args.format == "json" else report.to_table(), args.out)
    if report.error_kind == "precondition":
        print(f"error: {report.error}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_PASS if report.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
