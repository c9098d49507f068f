"""Command-line entry point.

    onebit-feas run <config.toml> [--out DIR] [--workers N] [--seed S]
    onebit-feas validate <config.toml>

Exit codes: 0 on success, 2 when the config fails validation, 3 when a
table1 run exhausts its budget without meeting the stopping rule.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .config import ParseError, ValidationError, to_toml, validate_config
from .experiments import run_experiment

EXIT_OK = 0
EXIT_INVALID_CONFIG = 2
EXIT_BUDGET_EXCEEDED = 3


def _load(path: str):
    try:
        return validate_config(path)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except ValidationError as exc:
        print(f"error: invalid config {path!r}:", file=sys.stderr)
        for problem in exc.problems:
            print(f"  - {problem}", file=sys.stderr)
    return None


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="onebit-feas",
        description="One-bit QCS feasibility experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run the experiment described by a config")
    run_p.add_argument("config", help="path to a TOML experiment config")
    run_p.add_argument("--out", default=None, help="output directory override")
    run_p.add_argument("--workers", type=int, default=1,
                       help="trial-level worker processes (default 1)")
    run_p.add_argument("--seed", type=int, default=None, help="master seed override")

    val_p = sub.add_parser("validate", help="validate a config and print its "
                                            "canonical form")
    val_p.add_argument("config", help="path to a TOML experiment config")

    args = parser.parse_args(argv)
    cfg = _load(args.config)
    if cfg is None:
        return EXIT_INVALID_CONFIG

    if args.command == "validate":
        print(to_toml(cfg), end="")
        return EXIT_OK

    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    record = run_experiment(cfg, out_dir=args.out, workers=args.workers)
    if cfg.experiment == "table1":
        print(
            f"table1: samples={record['samples']} "
            f"cpu_seconds={record['cpu_seconds']:.6f} nmse={record['nmse']:.6e} "
            f"converged={record['converged']}"
        )
        if not record["converged"]:
            print("budget exceeded: stopping rule not met within max_iters",
                  file=sys.stderr)
            return EXIT_BUDGET_EXCEEDED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
