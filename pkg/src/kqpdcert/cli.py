"""Command-line entry point.

Usage examples::

    kqpdcert exact --config runs.ini --out out/exact
    kqpdcert sweep --config runs.ini --seed 7 --threads 4
    kqpdcert reproduce-fig2a --out out/fig2a

Exit codes: 0 success, 2 configuration error, 3 numerical diagnostic failure.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, load_config
from .harness import (
    NumericalDiagnosticError,
    cmd_estimate,
    cmd_exact,
    cmd_reproduce_fig2,
    cmd_simulate,
    cmd_sweep,
)
from .sampling import SamplingError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _u64(text):
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config file (INI, one section per command)")
    common.add_argument("--seed", type=_u64, help="master seed, overrides the config")
    common.add_argument("--out", help="output directory, overrides the config")
    common.add_argument("--threads", type=_positive, default=1, help="worker processes for trials")
    common.add_argument("--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="kqpdcert", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("exact", "write the exact K surface"),
        ("simulate", "sample measurement records"),
        ("estimate", "estimate K over repeated trials"),
        ("sweep", "exact and estimated K across a chi list"),
        ("reproduce-fig2a", "canned Fock-state (x/p) certification run"),
        ("reproduce-fig2b", "canned spin certification run"),
    ]:
        sub.add_parser(name, parents=[common], help=help_)
    return parser


COMMANDS = {"exact": cmd_exact, "simulate": cmd_simulate, "estimate": cmd_estimate, "sweep": cmd_sweep}


def run(args):
    if args.command.startswith("reproduce-fig2"):
        panel = args.command[-1]
        return cmd_reproduce_fig2(
            panel,
            output_dir=args.out or f"out/fig2{panel}",
            master_seed=0 if args.seed is None else args.seed,
            n_jobs=args.threads,
        )
    if not args.config:
        raise ConfigError(f"'{args.command}' needs --config")
    cfg = load_config(args.config, args.command).override(master_seed=args.seed, output_dir=args.out)
    func = COMMANDS[args.command]
    if args.command in ("estimate", "sweep"):
        return func(cfg, n_jobs=args.threads)
    return func(cfg)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        files = run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalDiagnosticError, SamplingError, ArithmeticError) as exc:
        print(f"numerical diagnostic: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for f in files:
        print(f)
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
