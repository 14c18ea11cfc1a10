"""Arguments and settings shared by every subcommand"""

import argparse
from pathlib import Path

from pydantic import ValidationError

from src.config import Settings, ensure_directories, get_settings
from src.errors import InputError


def add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--config", type=Path, help="KEY=VALUE configuration file (dotenv syntax)"
    )
    parser.add_argument("--seed", type=int, help="seed of every random draw")
    parser.add_argument("--out", type=Path, help="output file or directory")
    parser.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="stderr log level",
    )


def load_settings(args: argparse.Namespace) -> Settings:
    """
    Build settings from the config file with command-line flags on top

    Args:
        args: Parsed arguments

    Returns:
        Settings object

    Raises:
        InputError: If the configuration is invalid
    """
    if args.config is not None and not args.config.exists():
        raise InputError("configuration file not found", args.config)
    try:
        settings = get_settings(
            args.config,
            SEED=args.seed,
            OUTPUT=args.out,
            LOG_LEVEL=args.log_level,
            DETECTIONS=getattr(args, "detections", None),
            EMBEDDINGS=getattr(args, "embeddings", None),
            TRANSFORMS=getattr(args, "transforms", None),
        )
    except ValidationError as e:
        err = e.errors()[0]
        loc = ".".join(str(p) for p in err["loc"])
        raise InputError(f"invalid configuration {loc}: {err['msg']}", args.config) from e
    ensure_directories(settings)
    return settings


def require_output(settings: Settings) -> Path:
    if settings.OUTPUT is None:
        raise InputError("an output path is required (--out or OUTPUT)")
    return settings.OUTPUT


def require_detections(settings: Settings) -> Path:
    if settings.DETECTIONS is None:
        raise InputError("a detection file is required (--detections or DETECTIONS)")
    return settings.DETECTIONS


def add_vote_argument(parser: argparse.ArgumentParser, default: str | None) -> None:
    parser.add_argument(
        "--vote",
        choices=["none", "hard", "soft"],
        default=default,
        help="class-vote output mode",
    )
