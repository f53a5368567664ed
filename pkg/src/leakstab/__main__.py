"""CLI entrypoint for leakstab."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from leakstab.cli import COMMANDS, EXIT_CONFIG_ERROR, parse_pairs
from leakstab.config import ConfigError, RunConfig

logger = logging.getLogger("leakstab")


def _add_common(parser: argparse.ArgumentParser, *, model_required: bool = True) -> None:
    parser.add_argument(
        "--model", required=model_required, default=None, help="Model file (YAML)"
    )
    parser.add_argument("--out", default="out", help="Output directory")
    parser.add_argument("--format", choices=("csv", "json"), default="csv", help="Table format")
    parser.add_argument(
        "--mu-fraction",
        type=float,
        default=0.5,
        help="Fraction of the largest feasible mu used for the decay constants",
    )


def _add_seeds(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--seed",
        action="append",
        default=[],
        help="Initial history as per-channel expressions, e.g. 'cos,sin' (repeatable)",
    )


def _add_bounds(parser: argparse.ArgumentParser, random_pairs: int) -> None:
    parser.add_argument("--horizon", type=int, default=500, help="Steps M to simulate")
    parser.add_argument(
        "--seed-pair",
        action="append",
        default=[],
        help="Pair of initial histories, e.g. 'cos,sin:exp,-1' (repeatable)",
    )
    parser.add_argument(
        "--random-pairs", type=int, default=random_pairs, help="Extra random initial pairs"
    )
    parser.add_argument("--rng-seed", type=int, default=0, help="Seed for the random pairs")
    parser.add_argument("--workers", type=int, default=1, help="Threads for the pair checks")
    parser.add_argument(
        "--n-max", type=int, default=20, help="Depth n of the per-channel difference estimate"
    )


def _add_orbit(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--tol", type=float, default=1e-10, help="Fixed-point tolerance")
    parser.add_argument(
        "--max-iters", type=int, default=500, help="Poincaré iterations before giving up"
    )
    parser.add_argument(
        "--plot-script", action="store_true", help="Write a companion plotting script"
    )


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    """Parse CLI arguments with subcommand routing.

    Subcommands:
        certify        Certify global exponential stability of a model
        simulate       Simulate trajectories from the configured seeds
        periodic       Find the periodic orbit of a certified periodic model
        verify-bounds  Check the certified envelope on trajectory pairs
        example        Run the whole chain on the bundled two-neuron network
    """
    parser = argparse.ArgumentParser(
        description="leakstab: stability certificates for delay difference equations "
        "with leakage delay"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    certify_parser = subparsers.add_parser("certify", help="Certify a model")
    _add_common(certify_parser)

    simulate_parser = subparsers.add_parser("simulate", help="Simulate trajectories")
    _add_common(simulate_parser)
    _add_seeds(simulate_parser)
    simulate_parser.add_argument("--horizon", type=int, default=500, help="Steps M to simulate")
    simulate_parser.add_argument(
        "--plot-script", action="store_true", help="Write a companion plotting script"
    )

    periodic_parser = subparsers.add_parser("periodic", help="Find the periodic orbit")
    _add_common(periodic_parser)
    _add_seeds(periodic_parser)
    _add_orbit(periodic_parser)
    periodic_parser.add_argument(
        "--force", action="store_true", help="Run even when the model is not certified"
    )

    verify_parser = subparsers.add_parser("verify-bounds", help="Check the certified envelope")
    _add_common(verify_parser)
    _add_seeds(verify_parser)
    _add_bounds(verify_parser, random_pairs=0)
    verify_parser.add_argument(
        "--force", action="store_true", help="Run even when the model is not certified"
    )

    example_parser = subparsers.add_parser("example", help="Run the bundled example")
    _add_common(example_parser, model_required=False)
    _add_seeds(example_parser)
    _add_orbit(example_parser)
    _add_bounds(example_parser, random_pairs=50)

    return parser.parse_args(argv)


def config_from_args(args: argparse.Namespace) -> RunConfig:
    """Collect parsed arguments into a RunConfig."""
    return RunConfig(
        command=args.command,
        model_path=args.model,
        horizon=getattr(args, "horizon", 500),
        tolerance=getattr(args, "tol", 1e-10),
        seeds=list(getattr(args, "seed", [])),
        seed_pairs=parse_pairs(getattr(args, "seed_pair", [])),
        output=args.out,
        format=args.format,
        force=getattr(args, "force", False),
        max_iters=getattr(args, "max_iters", 500),
        workers=getattr(args, "workers", 1),
        mu_fraction=args.mu_fraction,
        n_max=getattr(args, "n_max", 20),
        random_pairs=getattr(args, "random_pairs", 0),
        rng_seed=getattr(args, "rng_seed", 0),
        plot_script=getattr(args, "plot_script", False),
    )


def main(argv: list[str] | None = None) -> None:
    """Synchronous entrypoint for the CLI."""
    log_level = os.environ.get("LOG_LEVEL", "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, log_level, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    args = parse_args(argv)
    try:
        config = config_from_args(args)
    except ConfigError as e:
        logger.error("Configuration error: %s", e)
        sys.exit(EXIT_CONFIG_ERROR)
    sys.exit(COMMANDS[config.command](config))


if __name__ == "__main__":
    main()
