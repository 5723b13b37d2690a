#!/usr/bin/env python3
"""
metaspline CLI

Spline and piecewise-geodesic interpolation of key-frame images in the
metamorphosis model, solved with iPALM on a coarse-to-fine grid schedule.
"""

import argparse
import sys
from typing import Optional, Sequence

from . import __version__
from .command_modules.benchmark_command import add_benchmark_parser, benchmark_command
from .command_modules.solve_command import add_solve_parser, build_run_config, solve_command
from .command_modules.synth_command import add_synth_parser, synth_command
from .config import ConfigError
from .image_core import GridError, ImageFormatError
from .logging_config import configure_logging, logger

# Bad inputs: missing files, invalid configuration, unreadable or mismatched images
INPUT_ERRORS = (FileNotFoundError, ConfigError, ImageFormatError, GridError)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metaspline",
        description=f"metaspline v{__version__}\n"
                    "Time-discrete metamorphosis splines for image sequence interpolation.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  metaspline synth gaussians --out keys                     # Benchmark key frames + run.json
  metaspline solve --config keys/run.json                   # Solve from a run file
  metaspline solve --keyframe 0:a.png --keyframe 8:b.png --K 8 --out result
  metaspline solve --config keys/run.json --mode geodesic   # Piecewise geodesic instead
  metaspline solve --preset faces --keyframe 0:a.png --keyframe 8:b.png --keyframe 16:c.png
  metaspline benchmark circle-square --levels 3             # Spline vs. geodesic comparison
        """,
    )
    parser.add_argument(
        "--version", "-V", action="version", version=f"%(prog)s {__version__}"
    )
    parser.add_argument(
        "--verbose", "-v", action="store_true", help="Enable verbose logging"
    )

    subparsers = parser.add_subparsers(dest="command", help="Available commands")
    add_solve_parser(subparsers)
    add_synth_parser(subparsers)
    add_benchmark_parser(subparsers)
    return parser


# ADC-IMPLEMENTS: <metaspline-cli-feature-01>
def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    """Parse argv, dispatch the command and map its outcome to an exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)

    configure_logging(verbose=args.verbose)

    if not args.command:
        parser.print_help()
        return 0

    try:
        if args.command == "solve":
            run = build_run_config(
                config_path=args.config,
                keyframes=args.keyframe,
                preset=args.preset,
                out_dir=args.out,
                dump_levels=args.dump_levels,
                hermite_path=args.hermite,
                overrides={
                    "K": args.K,
                    "delta": args.delta,
                    "sigma": args.sigma,
                    "theta": args.theta,
                    "levels": args.levels,
                    "iters": args.iters,
                    "beta": args.beta,
                    "mode": args.mode,
                    "bc": args.bc,
                },
            )
            success = solve_command(run)
        elif args.command == "synth":
            success = synth_command(
                benchmark=args.benchmark, out_dir=args.out, size=args.size or 0
            )
        elif args.command == "benchmark":
            success = benchmark_command(
                benchmark=args.benchmark,
                out_dir=args.out,
                size=args.size,
                levels=args.levels,
                iterations=args.iters,
            )
        else:
            logger.error(f"Unknown command: {args.command}")
            parser.print_help()
            return 1

        return 0 if success else 1

    except INPUT_ERRORS as e:
        logger.error(f"Invalid input: {e}")
        return 2
    except KeyboardInterrupt:
        logger.info("Operation cancelled by user")
        return 130
    except Exception as e:
        logger.error(f"Unexpected error: {e}")
        if args.verbose:
            import traceback

            traceback.print_exc()
        return 1


def main():
    """Main entry point for the metaspline CLI."""
    return run_cli()


if __name__ == "__main__":
    sys.exit(main())
