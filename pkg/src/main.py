"""Command-line entry point"""

import argparse
import sys
from typing import Optional

from loguru import logger

from src.commands import evaluate, fuse, link, post, simulate, track
from src.commands.common import load_settings
from src.errors import TrackingError

LOG_FORMAT = "{time:HH:mm:ss} | {level: <8} | {message}"


def configure_logging(level: str = "INFO") -> None:
    """Send all log output to a single stderr sink"""
    logger.remove()
    logger.add(sys.stderr, level=level, format=LOG_FORMAT)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tracklink",
        description="Three-stage multi-class multi-object tracking on VisDrone files",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in (track, link, post, fuse, evaluate, simulate):
        command.register(subparsers)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    """
    Run one subcommand

    Args:
        argv: Arguments without the program name; sys.argv when None

    Returns:
        0 on success, 1 on a tracking error
    """
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level or "INFO")
    try:
        settings = load_settings(args)
        configure_logging(settings.LOG_LEVEL)
        return args.handler(args, settings)
    except TrackingError as e:
        logger.error(str(e))
        return 1


if __name__ == "__main__":
    sys.exit(main())
