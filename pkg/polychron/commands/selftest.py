from __future__ import annotations

import argparse

from polychron.checks import SUITES, run_checks


def register(subparsers: argparse._SubParsersAction[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser("selftest", help="Run the built-in correctness suites")
    parser.add_argument(
        "--suite", action="append", choices=sorted(SUITES), help="Run only this suite (repeatable)",
    )
    parser.add_argument("--seed", type=int, default=0, help="Seed of the suite generators")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    results = run_checks(args.suite, seed=args.seed)
    for result in results:
        print(result.line())
    return 0 if all(result.passed for result in results) else 1
