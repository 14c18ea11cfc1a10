"""fuse: TrackNMS over several result files"""

import argparse
from pathlib import Path

from src.commands.common import add_common_arguments, require_output
from src.config import Settings
from src.errors import InputError
from src.services.postprocess_service import PostprocessService
from src.services.storage_service import StorageService


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("fuse", help="fuse result files with TrackNMS")
    parser.add_argument("results", type=Path, nargs="+", help="two or more result files")
    add_common_arguments(parser)
    parser.set_defaults(handler=run_fuse)


def run_fuse(args: argparse.Namespace, settings: Settings) -> int:
    """
    Fuse result files and write the fused set

    Raises:
        InputError: With fewer than two input files
    """
    if len(args.results) < 2:
        raise InputError(f"fuse needs at least 2 result files, got {len(args.results)}")
    out = require_output(settings)
    result_sets = [
        StorageService.read_results(path, settings.ONLINE.rough_classes, True)
        for path in args.results
    ]
    fused = PostprocessService.tracknms(result_sets, settings.POST)
    StorageService.write_results(out, fused)
    print(
        f"{sum(len(s) for s in result_sets)} trajectories from {len(result_sets)} "
        f"files -> {len(fused)} -> {out}"
    )
    return 0
