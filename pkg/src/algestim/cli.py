"""``algestim <experiment> --config <path> [--out <dir>] [--seed <u64>] [--jobs <k>]``

Exit codes: 0 all checks passed, 2 a check failed, 3 bad configuration,
1 anything else.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import EXPERIMENTS, ConfigError, load_config
from .demod import ScenarioError
from .experiments import run

EXIT_OK, EXIT_INTERNAL, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2, 3

log = logging.getLogger("algestim")


def _u64(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise ConfigError(f"--seed {text!r} is not an integer") from None
    if not 0 <= value < 2**64:
        raise ConfigError(f"--seed {text} does not fit in 64 bits")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="algestim", description=__doc__.splitlines()[0])
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", required=True, type=Path, help="JSON experiment config")
    parser.add_argument("--out", type=Path, default=None,
                        help="output directory (default: config 'output', else results/<experiment>)")
    parser.add_argument("--seed", default=None,
                        help="run seed; overrides the config, falls back to $ALGESTIM_SEED")
    parser.add_argument("--jobs", type=int, default=1, help="worker threads for trials")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def write_report(out: Path, resolved: dict, tables: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.resolved.json").write_text(json.dumps(resolved, indent=2, sort_keys=True) + "\n",
                                              newline="")
    for name, text in tables.items():
        (out / name).write_text(text, newline="")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    if args.jobs < 1:
        print("algestim: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        seed = None if args.seed is None else _u64(args.seed)
        cfg = load_config(args.config, args.experiment, seed)
        out = args.out or Path(cfg.output or Path("results") / args.experiment)
        log.info("running %s n=%d seed=%d jobs=%d", cfg.experiment, cfg.n, cfg.seed, args.jobs)
        report = run(cfg, jobs=args.jobs)
    except (ConfigError, ScenarioError) as exc:
        print(f"algestim: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"algestim: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL

    write_report(out, cfg.resolved(), report.tables)
    for check in report.checks:
        print(f"{'PASS' if check.passed else 'FAIL'} {check.name} value={check.value:.6g} "
              f"threshold={check.threshold:.6g} {check.detail}".rstrip())
    if not report.passed:
        for line in report.failures:
            print(f"algestim: check failed: {line}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
