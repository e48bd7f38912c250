"""Command line entry point.

    rmt-transfer <subcommand> --config <path> [--out <path>] [--threads k]
                 [--json] [--fixed-source]

Subcommands map one-to-one onto the harness runners.  Exit codes:
0 success, 2 configuration error, 3 regime/convergence error,
4 I/O error.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConvergenceError, DegenerateSpecError, RegimeError
from .harness import KINDS, RUNNERS, ConfigError, load_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_REGIME = 3
EXIT_IO = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rmt-transfer",
        description="Experiment harness for alpha-scaled ridge transfer learning",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        sp = sub.add_parser(kind, help=f"run a {kind} experiment")
        sp.add_argument("--config", required=True, help="path to a JSON config")
        sp.add_argument("--out", help="output path (default: stdout)")
        sp.add_argument("--threads", type=int, default=1,
                        help="max worker threads for Monte Carlo trials")
        sp.add_argument("--json", action="store_true",
                        help="emit a JSON object instead of CSV")
        if kind in ("sweep-alpha", "distribution"):
            sp.add_argument("--fixed-source", action="store_true",
                            help="train one source classifier and condition on it")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, expected_kind=args.command)
    except OSError as exc:
        print(f"rmt-transfer: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        print(f"rmt-transfer: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    runner = RUNNERS[args.command]
    kwargs = {"threads": args.threads}
    if getattr(args, "fixed_source", False):
        kwargs["fixed_source"] = True
    try:
        table = runner(config, **kwargs)
    except ConfigError as exc:
        print(f"rmt-transfer: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RegimeError, DegenerateSpecError, ConvergenceError) as exc:
        print(f"rmt-transfer: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except OSError as exc:
        print(f"rmt-transfer: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        # dataset/estimator domain errors surface as run-level failures
        print(f"rmt-transfer: {exc}", file=sys.stderr)
        return EXIT_REGIME

    text = table.to_json() if args.json else table.to_csv()
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"rmt-transfer: cannot write output: {exc}", file=sys.stderr)
            return EXIT_IO
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
