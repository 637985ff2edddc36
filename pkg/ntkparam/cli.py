from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

import structlog

from ntkparam import __version__
from ntkparam.commands import CommandContext, dispatch, get_all_commands, load_commands
from ntkparam.config import ExperimentConfig
from ntkparam.errors import EXIT_CONFIG_ERROR, ConfigError
from ntkparam.storage import Journal

log = structlog.get_logger().bind(component="cli")

DEFAULT_OUT_DIR = "results"


def configure_logging(verbose: bool = False) -> None:
    """Console logging on stderr; stdout carries command output only."""
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.dev.ConsoleRenderer(colors=False),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(
            logging.DEBUG if verbose else logging.INFO
        ),
        logger_factory=structlog.PrintLoggerFactory(sys.stderr),
        cache_logger_on_first_use=False,
    )


def build_parser() -> argparse.ArgumentParser:
    load_commands()
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Path to the JSON experiment config")
    common.add_argument("--out", help="Output directory (overrides config and NTKPARAM_OUT_DIR)")
    common.add_argument("--seed", type=int, help="Run a single seed instead of the config's seeds")
    common.add_argument("--threads", type=int, help="Parallel sweep points")
    common.add_argument("--ridge", type=float, help="Ridge added to the training kernel")
    common.add_argument("-v", "--verbose", action="store_true", help="Debug logging")

    parser = argparse.ArgumentParser(
        prog="ntkparam",
        description="Infinite-width NNGP/NTK kernels under three parameterizations.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, cmd in sorted(get_all_commands().items()):
        sub.add_parser(name, parents=[common], help=cmd.description, usage=cmd.usage)
    return parser


def load_config(args: argparse.Namespace, needs_config: bool) -> ExperimentConfig | None:
    """File < environment < flags; ``None`` for commands that run without one."""
    if args.config is None:
        if needs_config:
            raise ConfigError(f"{args.command} needs --config PATH")
        return None
    config = (
        ExperimentConfig.from_file(args.config)
        .with_env()
        .with_overrides(out_dir=args.out, threads=args.threads, seed=args.seed, ridge=args.ridge)
    )
    config.check()
    return config


def journal_location(args: argparse.Namespace, config: ExperimentConfig | None) -> tuple[Path, Path]:
    """(out_dir, journal path) with the same precedence as the config fields."""
    if config is not None:
        return Path(config.out_dir), config.journal_path
    out_dir = Path(args.out or os.environ.get("NTKPARAM_OUT_DIR", DEFAULT_OUT_DIR))
    journal = os.environ.get("NTKPARAM_JOURNAL")
    return out_dir, Path(journal) if journal else out_dir / "journal.db"


async def main(argv: Sequence[str] | None = None) -> int:
    """Parse arguments, run one subcommand and return its exit code."""
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    log.info("starting", version=__version__, command=args.command)

    cmd = get_all_commands()[args.command]
    try:
        config = load_config(args, cmd.needs_config)
    except ConfigError as exc:
        log.error("config error", error=str(exc))
        return EXIT_CONFIG_ERROR
    if config is not None:
        config.log_config()

    out_dir, journal_path = journal_location(args, config)
    out_dir.mkdir(parents=True, exist_ok=True)
    journal_path.parent.mkdir(parents=True, exist_ok=True)

    journal = Journal(str(journal_path))
    await journal.connect()
    try:
        code = await dispatch(args.command, CommandContext(config, journal, out_dir))
    finally:
        await journal.close()
    log.info("finished", command=args.command, exit_code=code)
    return code
