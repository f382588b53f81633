"""Command-line entry point for experiments and probes."""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

import numpy as np
import pandas as pd

from .auction import AuctionInstance, misreport_grid, strategyproofness_probe
from .config import ExperimentConfig, default_config, load_config
from .const import (
    COMPARISON_FILE,
    CONF_KAPPA0,
    CONF_KAPPA2,
    CONF_USERS,
    CSV_FLOAT_FORMAT,
    EXIT_CONFIG_ERROR,
    EXIT_ITERATION_LIMIT,
    EXIT_OK,
    EXIT_RUNTIME_ERROR,
    PROBE_FILE,
    STABILITY_FILE,
)
from .coordinator import RunArtifacts, compare_runs, run_experiment, run_seeds
from .exceptions import ConfigError, StablecoinError
from .taylor import stability_region

_LOGGER = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _grid(text: str) -> np.ndarray:
    """Parse start:stop:num into an inclusive linspace."""
    try:
        start, stop, num = text.split(":")
        grid = np.linspace(float(start), float(stop), int(num))
    except ValueError as err:
        raise argparse.ArgumentTypeError(
            f"expected start:stop:num, got {text!r}"
        ) from err
    if grid.size == 0:
        raise argparse.ArgumentTypeError("grid must contain at least one point")
    return grid


def _load(args: argparse.Namespace) -> ExperimentConfig:
    config = load_config(args.config) if args.config else default_config()
    return config.with_overrides(
        seed=args.seed, output_dir=args.out, threads=args.threads
    )


def _emit(frame: pd.DataFrame, out: str | None, name: str) -> None:
    if out is None:
        frame.to_csv(
            sys.stdout, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n"
        )
        return
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    frame.to_csv(
        path / name, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n"
    )


def _status(runs: Sequence[RunArtifacts]) -> int:
    degraded = {i: run.degraded_epochs for i, run in enumerate(runs) if run.degraded_epochs}
    if degraded:
        _LOGGER.warning("Iteration limit reached in epochs: %s", degraded)
        return EXIT_ITERATION_LIMIT
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    config = _load(args)
    out = Path(config.output_dir)
    if args.seeds <= 1:
        artifacts = run_experiment(config, baseline=args.baseline)
        artifacts.write(out)
        return _status([artifacts])

    seeds = range(config.seed, config.seed + args.seeds)
    runs = run_seeds(config, seeds, baseline=args.baseline, threads=config.threads)
    for seed, artifacts in zip(seeds, runs, strict=True):
        artifacts.write(out / f"seed_{seed}")
    return _status(runs)


def cmd_compare(args: argparse.Namespace) -> int:
    if args.runs:
        first, second = (RunArtifacts.load(path) for path in args.runs)
        runs: list[RunArtifacts] = []
    else:
        config = _load(args)
        first = run_experiment(config)
        second = run_experiment(config, baseline=True)
        runs = [first, second]
    _emit(compare_runs(first, second), args.out, COMPARISON_FILE)
    return _status(runs)


def cmd_stability_region(args: argparse.Namespace) -> int:
    params = _load(args).taylor.params()
    frame = stability_region(params, args.phi_y, args.phi_pi)
    _LOGGER.info("%s of %s grid points are stable", int(frame["stable"].sum()), len(frame))
    _emit(frame, args.out, STABILITY_FILE)
    return EXIT_OK


def cmd_auction_probe(args: argparse.Namespace) -> int:
    if args.instance:
        try:
            instance = AuctionInstance.load(args.instance)
        except (OSError, ValueError, KeyError) as err:
            raise ConfigError({args.instance: str(err)}) from err
    else:
        config = _load(args)
        instance = AuctionInstance.from_dict(
            {
                CONF_USERS: [dict(user) for user in config.auction.users],
                CONF_KAPPA0: config.auction.kappa0,
                CONF_KAPPA2: config.auction.kappa2,
                "y_max": config.supply.auc,
            }
        )
    rows = [
        {
            "user": report.user_id,
            "max_gain": strategyproofness_probe(
                instance, i, misreport_grid(report, args.points)
            ),
        }
        for i, report in enumerate(instance.reports)
    ]
    _emit(pd.DataFrame(rows, columns=["user", "max_gain"]), args.out, PROBE_FILE)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment configuration")
    common.add_argument("--seed", type=int, help="Override the configured seed")
    common.add_argument("--out", help="Output directory")
    common.add_argument("--threads", type=int, help="Worker threads for seed sweeps")
    common.add_argument("--baseline", action="store_true", help="Run without control")
    common.add_argument("-v", "--verbose", action="store_true", help="Debug logging")

    parser = argparse.ArgumentParser(
        prog="stablecoin-admm", description="Stablecoin monetary-policy experiments"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", parents=[common], help="Run a seeded simulation")
    run.add_argument(
        "--seeds", type=int, default=1, help="Number of consecutive seeds to run"
    )
    run.set_defaults(handler=cmd_run)

    compare = commands.add_parser(
        "compare",
        parents=[common],
        help="Compare two run directories, or a controlled run against its baseline",
    )
    compare.add_argument("runs", nargs="*", metavar="RUN_DIR")
    compare.set_defaults(handler=cmd_compare)

    region = commands.add_parser(
        "stability-region", parents=[common], help="Sweep the Taylor-rule gains"
    )
    region.add_argument("--phi-y", type=_grid, default=_grid("0:3:31"))
    region.add_argument("--phi-pi", type=_grid, default=_grid("0:3:31"))
    region.set_defaults(handler=cmd_stability_region)

    probe = commands.add_parser(
        "auction-probe", parents=[common], help="Search for profitable misreports"
    )
    probe.add_argument("--instance", help="Auction instance JSON")
    probe.add_argument("--points", type=int, default=21, help="Grid points per bound")
    probe.set_defaults(handler=cmd_auction_probe)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "compare" and len(args.runs) not in (0, 2):
        parser.error("compare takes either no run directories or exactly two")
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING, format=LOG_FORMAT
    )

    try:
        return int(args.handler(args))
    except ConfigError as err:
        for field, message in err.errors.items():
            _LOGGER.error("Invalid configuration %s: %s", field, message)
        return EXIT_CONFIG_ERROR
    except StablecoinError as err:
        _LOGGER.error("Run failed: %s", err)
        return EXIT_RUNTIME_ERROR
