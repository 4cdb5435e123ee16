"""Run a suite twice and compare the wall-time-free summary hashes."""

from __future__ import annotations

import argparse
import sys
import tempfile
from pathlib import Path

from polynewt.bench import run_suite
from polynewt.config import get_settings
from polynewt.logging_config import configure_logging
from tools.suites import load_suites

DEFAULT_SUITE = "toy"


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        description="Run a benchmark suite twice and check the summaries are identical.",
    )
    parser.add_argument(
        "--suite",
        default=DEFAULT_SUITE,
        help=f"Suite name (default: {DEFAULT_SUITE}).",
    )
    parser.add_argument(
        "--seed",
        type=int,
        default=7,
        help="Seed applied to every experiment (default: 7).",
    )
    parser.add_argument(
        "--suites",
        type=Path,
        default=get_settings().suites_path,
        help="Suite definitions file.",
    )
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    args = parse_args(argv)
    configure_logging(log_level="WARNING")
    specs = load_suites(args.suites).experiments(args.suite, seed=args.seed)
    hashes = []
    for attempt in range(2):
        with tempfile.TemporaryDirectory(prefix=f"polynewt-{attempt}-") as tmp:
            hashes.append(run_suite(specs, tmp, name=args.suite).summary_hash)
    print(f"run 1: {hashes[0]}")
    print(f"run 2: {hashes[1]}")
    if hashes[0] != hashes[1]:
        print("summary hashes differ", file=sys.stderr)
        return 1
    print("deterministic")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
