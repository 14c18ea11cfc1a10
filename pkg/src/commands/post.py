"""post: denoise, interpolate and rescore a trajectory file"""

import argparse
from pathlib import Path

from src.commands.common import add_common_arguments, add_vote_argument, require_output
from src.config import Settings
from src.services.pipeline_service import PipelineService
from src.services.storage_service import StorageService


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("post", help="stage 3: trajectory post-processing")
    parser.add_argument("trajectories", type=Path, help="trajectory file from link")
    add_vote_argument(parser, default=None)
    add_common_arguments(parser)
    parser.set_defaults(handler=run_post)


def run_post(args: argparse.Namespace, settings: Settings) -> int:
    """
    Post-process trajectories with POST.steps, then write voted rows

    Args:
        args: Parsed arguments
        settings: Run configuration (vote mode defaults to ONLINE.vote_mode)

    Returns:
        Exit code
    """
    out = require_output(settings)
    trajectories = StorageService.read_results(
        args.trajectories, settings.ONLINE.rough_classes
    )
    vote_mode = args.vote or settings.ONLINE.vote_mode
    processed = PipelineService.post(trajectories, settings, vote_mode)
    StorageService.write_results(out, processed, vote_mode)
    steps = ", ".join(settings.POST.steps) or "none"
    print(f"{len(trajectories)} -> {len(processed)} trajectories ({steps}) -> {out}")
    return 0
