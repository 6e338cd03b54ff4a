#!/usr/bin/env python3
"""Run every config in configs/ through the CLI and collect the summaries.

    python3 scripts/run_experiments.py [--out results] [--jobs 4] [--seed N]

Each experiment writes into <out>/<experiment>/.  The exit status is the
highest code returned by any run.
"""
import argparse
import sys
from pathlib import Path

from algestim import cli

ROOT = Path(__file__).resolve().parent.parent


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--configs", type=Path, default=ROOT / "configs")
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--jobs", default="1")
    ap.add_argument("--seed", default=None)
    args = ap.parse_args()

    worst = 0
    for path in sorted(args.configs.glob("*.json")):
        name = path.stem
        print(f"== {name}")
        argv = [name, "--config", str(path), "--out", str(args.out / name), "--jobs", args.jobs]
        if args.seed is not None:
            argv += ["--seed", args.seed]
        code = cli.main(argv)
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
