"""Command-line entry point.

``submeta run --config experiment.cfg`` executes a sweep and writes CSV;
``submeta verify --scope {counterexample,bounds,oracle}`` runs the built-in
checks; ``submeta counterexample`` prints the rectangle construction's
reproduction report.  Exit codes: 0 success, 1 verification failure,
2 configuration or data error.
"""

from __future__ import annotations

import argparse
import sys

from .bench import (
    ConfigError,
    counterexample_report,
    parse_config,
    run_experiment,
    verify_cmd,
)
from .core import DomainError
from .data import InputError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="submeta")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a sweep experiment from a config file")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int, default=None, help="single-seed override")
    run.add_argument("--out", default=None, help="output CSV path override")
    run.add_argument("--workers", type=int, default=None)
    run.add_argument("--emit-plot-data", action="store_true", default=None)
    run.add_argument(
        "--match-test-budget",
        action="store_true",
        default=None,
        help="derive q from n(k-l)=qk at each sweep point",
    )

    verify = sub.add_parser("verify", help="run built-in verification suites")
    verify.add_argument(
        "--scope", required=True, choices=("counterexample", "bounds", "oracle")
    )

    sub.add_parser("counterexample", help="print the counterexample reproduction")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            overrides = {
                "seeds": [args.seed] if args.seed is not None else None,
                "out": args.out,
                "workers": args.workers,
                "emit_plot_data": args.emit_plot_data,
                "match_test_budget": args.match_test_budget,
            }
            config = parse_config(args.config, overrides)
            rows = run_experiment(config)
            print(f"wrote {len(rows)} rows to {config.out}")
            return 0
        if args.command == "verify":
            ok, report = verify_cmd(args.scope)
            print(report)
            return 0 if ok else 1
        if args.command == "counterexample":
            ok, report = counterexample_report()
            print(report)
            return 0 if ok else 1
    except (ConfigError, InputError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
