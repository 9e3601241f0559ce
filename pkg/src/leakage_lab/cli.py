"""``leakage-lab <config> [--parallel-budgets] [--out DIR]``.

Exit status: 0 success, 1 config error, 2 verification failure, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigError
from .experiments import VerificationReport, parse_config, run

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_RUNTIME = 0, 1, 2, 3

log = logging.getLogger("leakage_lab")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leakage-lab",
        description="Run a privacy/utility experiment described by a key = value config file.",
    )
    parser.add_argument("config", help="path to the experiment config")
    parser.add_argument(
        "--parallel-budgets", action="store_true",
        help="train the distortion budgets in separate processes",
    )
    parser.add_argument("--out", default=".", metavar="DIR", help="output directory (default: .)")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors, which would read as a verification failure
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    try:
        result = run(cfg, args.out, args.parallel_budgets)
    except Exception as exc:  # noqa: BLE001 - mapped to an exit status
        log.error("%s failed: %s: %s", cfg.experiment, type(exc).__name__, exc)
        return EXIT_RUNTIME
    if isinstance(result, VerificationReport):
        for check in result.checks:
            log.info("%s %s  %s", "PASS" if check.passed else "FAIL", check.name, check.detail)
        return EXIT_OK if result.passed else EXIT_VERIFY
    log.info("%s finished; results in %s", cfg.experiment, args.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
