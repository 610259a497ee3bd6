# exciton_pimc/cli.py
"""Command-line entry point: run, oracle, verify, schema."""

import argparse
import json
import sys
from typing import Optional, Sequence

from exciton_pimc.config import load_config
from exciton_pimc.errors import ConfigError
from exciton_pimc.logger import get_logger, log_error, log_info
from exciton_pimc.models.summary_models import RunSummary
from exciton_pimc.runner import run_experiment, run_oracle, run_sweep, verify

logger = get_logger("exciton_pimc")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="exciton-pimc",
        description="Path-integral Monte Carlo for exciton reduced density matrices.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Sample the reduced density matrix (or a sweep).")
    run.add_argument("config", help="TOML run configuration.")
    run.add_argument("--out", default=None, help="Output directory (overrides [output].directory).")

    oracle = sub.add_parser("oracle", help="Grid reference for the configured model and temperature.")
    oracle.add_argument("config")
    oracle.add_argument("--out", default=None)
    oracle.add_argument(
        "--beads",
        type=int,
        default=None,
        help="Evaluate the finite-M quadrature with this many beads instead of the exact DVR result.",
    )

    check = sub.add_parser("verify", help="Run the sampler and the oracle, report z-scores per element.")
    check.add_argument("config")
    check.add_argument("--out", default=None)
    check.add_argument(
        "--finite-m",
        action="store_true",
        help="Compare against the finite-M quadrature at the run's bead count.",
    )

    sub.add_parser("schema", help="Print the JSON schema of summary.json.")
    return parser


def _dispatch(args) -> None:
    if args.command == "schema":
        print(json.dumps(RunSummary.model_json_schema(), indent=2))
        return
    config = load_config(args.config)
    if args.command == "run":
        if config.is_sweep:
            run_sweep(config, args.out)
        else:
            run_experiment(config, args.out)
    elif args.command == "oracle":
        run_oracle(config, args.out, n_beads=args.beads)
    elif args.command == "verify":
        report = verify(config, args.out, finite_m=args.finite_m)
        log_info(logger, f"All elements within the 95% interval: {report.all_within_ci}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _dispatch(args)
    except ConfigError as exc:
        log_error(logger, f"Configuration error: {exc}")
        return EXIT_CONFIG
    except Exception as exc:
        log_error(logger, f"Run failed: {exc}", exc_info=True)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
