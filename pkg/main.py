#!/usr/bin/env python3
"""
tumorcal - Main entry point
Forward simulation, synthetic data, calibration and derivative checks for
reaction-diffusion tumor growth models
"""

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from rich.logging import RichHandler

from src.config import Config
from src.errors import ConfigError, TumorCalError
from src.experiment.commands import COMMANDS
from src.experiment.run_config import load_config

STEP_TITLES = {
    "forward": "Forward Simulation",
    "synth": "Synthetic Observations",
    "calibrate": "Newton-CG Calibration",
    "verify-grad": "Gradient Taylor Test",
    "verify-hess": "Hessian Taylor Test and Symmetry Check",
}


def parse_args(argv=None):
    """Parse command line arguments"""
    parser = argparse.ArgumentParser(
        description="tumorcal: calibrate reaction-diffusion tumor growth models"
    )

    parser.add_argument(
        "command",
        choices=sorted(COMMANDS),
        help="Job to run",
    )

    parser.add_argument(
        "--config",
        "-c",
        type=str,
        required=True,
        help="Path to the run configuration (TOML, one key = value per line)",
    )

    parser.add_argument(
        "--out",
        "-o",
        type=str,
        default=None,
        help="Output directory (default: output_dir from the configuration)",
    )

    parser.add_argument(
        "--seed",
        "-s",
        type=int,
        default=None,
        help="Override the observation noise / direction seed",
    )

    parser.add_argument(
        "--log-level",
        type=str,
        default=None,
        help=f"Logging level (default: {Config.LOG_LEVEL})",
    )

    return parser.parse_args(argv)


def setup_logging(level: str):
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(rich_tracebacks=False, show_path=False)],
        force=True,
    )


def fail(error: Exception, status: int) -> int:
    print(f"error={type(error).__name__} reason={error}", file=sys.stderr)
    return status


def main(argv=None) -> int:
    """Main execution flow"""
    args = parse_args(argv)
    if args.log_level:
        Config.LOG_LEVEL = args.log_level.upper()

    Config.print_config()

    errors = Config.validate()
    if errors:
        print("\n❌ Configuration Errors:")
        for error in errors:
            print(f"  - {error}")
        return fail(ConfigError(errors), 1)
    setup_logging(Config.LOG_LEVEL)

    print("\n" + "=" * 60)
    print("tumorcal - Tumor Growth Model Calibration")
    print("=" * 60 + "\n")

    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        print("\n❌ Run configuration errors:")
        for message in e.messages:
            print(f"  - {message}")
        return fail(e, 1)

    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    out_dir = Path(args.out) if args.out else Path(cfg.output_dir)

    print(f"📂 Configuration: {args.config}")
    print(f"📝 Output directory: {out_dir}\n")

    print("=" * 60)
    print(f"STEP 1: {STEP_TITLES[args.command]}")
    print("=" * 60)
    try:
        outcome = COMMANDS[args.command](cfg, out_dir)
    except TumorCalError as e:
        print(f"❌ {args.command} failed")
        return fail(e, 2)

    for key, value in outcome.summary.items():
        print(f"  {key}: {value}")

    print("\n" + "=" * 60)
    print("STEP 2: Artifacts")
    print("=" * 60)
    for name, path in outcome.artifacts.items():
        print(f"✓ {name}: {path}")

    if outcome.status != 0:
        print(f"\n⚠️  {args.command} did not converge: {outcome.reason}")
        print(f"error=NotConverged reason={outcome.reason}", file=sys.stderr)
        return outcome.status

    print("\n✓ Done")
    return 0


if __name__ == "__main__":
    sys.exit(main())
