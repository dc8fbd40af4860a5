"""Command-line entry point.

    pdl <experiment> [--config PATH] [--seed U64] [--out DIR] [--reps N]
                     [--threads N]

Exit codes: 0 success, 2 validation error, 3 partial failure.
"""

from __future__ import annotations

import argparse
import sys

from .experiments import REGISTRY
from .harness import ConfigError, resolve_config, run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdl",
        description="Monte Carlo lab for activated random walks, modified-border "
        "contact processes, and subcritical branching processes.",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name, spec in sorted(REGISTRY.items()):
        p = sub.add_parser(name, help=spec.doc or f"run the {name} experiment")
        p.add_argument("--config", default=None, help="INI config file")
        p.add_argument("--seed", type=int, default=None, help="64-bit master seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--reps", type=int, default=None, help="replications")
        p.add_argument("--threads", type=int, default=None, help="worker processes")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(
            args.experiment,
            REGISTRY,
            config_path=args.config,
            seed=args.seed,
            out=args.out,
            reps=args.reps,
            threads=args.threads,
        )
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    summary = run_experiment(config, REGISTRY)
    print(f"{config.name}: {summary['rows']} rows -> {summary['csv']}")
    if summary["failed"]:
        print(f"warning: {summary['failed']} rows flagged as failed", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
