"""track: online tracking of one detection file"""

import argparse
from pathlib import Path

from src.commands.common import (
    add_common_arguments,
    add_vote_argument,
    require_detections,
    require_output,
)
from src.config import Settings
from src.models import Trajectory
from src.services.appearance_service import AppearanceService
from src.services.camera_service import CameraService
from src.services.storage_service import StorageService
from src.services.tracking_service import TrackingService


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("track", help="stage 1: online tracking")
    parser.add_argument("--detections", type=Path, help="VisDrone detection file")
    parser.add_argument("--embeddings", type=Path, help="embedding sidecar")
    parser.add_argument("--transforms", type=Path, help="camera transform sidecar")
    add_vote_argument(parser, default="none")
    add_common_arguments(parser)
    parser.set_defaults(handler=run_track)


def run_track(args: argparse.Namespace, settings: Settings) -> int:
    """
    Track a detection file and write the tracklets

    Args:
        args: Parsed arguments
        settings: Run configuration

    Returns:
        Exit code
    """
    out = require_output(settings)
    detections = StorageService.read_detections(require_detections(settings))
    store = AppearanceService.load_store(settings.EMBEDDINGS)
    table = CameraService.load_table(settings.TRANSFORMS)

    tracklets = TrackingService.track_sequence(
        detections, store, table, settings.ONLINE, settings.NOISE
    )
    trajectories = TrackingService.rough2fine(
        [Trajectory.from_tracklet(t) for t in tracklets],
        args.vote,
        settings.ONLINE.vote_floor,
    )
    StorageService.write_results(out, trajectories, args.vote)

    if tracklets:
        span = f"frames {min(t.start for t in tracklets)}-{max(t.end for t in tracklets)}"
    else:
        span = "no frames"
    print(f"{len(tracklets)} tracklets, {span} -> {out}")
    return 0
