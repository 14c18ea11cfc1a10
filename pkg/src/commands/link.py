"""link: global link of a tracklet file"""

import argparse
from pathlib import Path

from loguru import logger

from src.commands.common import add_common_arguments, add_vote_argument, require_output
from src.config import Settings
from src.services.appearance_service import AppearanceService
from src.services.camera_service import CameraService
from src.services.link_service import LinkService
from src.services.pipeline_service import PipelineService
from src.services.storage_service import StorageService
from src.services.tracking_service import TrackingService


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("link", help="stage 2: global tracklet link")
    parser.add_argument("tracklets", type=Path, help="tracklet file from track")
    parser.add_argument(
        "--detections", type=Path, help="detection file the tracklets came from"
    )
    parser.add_argument("--embeddings", type=Path, help="embedding sidecar")
    parser.add_argument("--transforms", type=Path, help="camera transform sidecar")
    add_vote_argument(parser, default="none")
    add_common_arguments(parser)
    parser.set_defaults(handler=run_link)


def run_link(args: argparse.Namespace, settings: Settings) -> int:
    """
    Link tracklets into trajectories and write them

    Args:
        args: Parsed arguments
        settings: Run configuration

    Returns:
        Exit code
    """
    out = require_output(settings)
    trajectories = StorageService.read_results(
        args.tracklets, settings.ONLINE.rough_classes
    )
    store = AppearanceService.load_store(settings.EMBEDDINGS)
    table = CameraService.load_table(settings.TRANSFORMS)
    detections = []
    if settings.DETECTIONS is not None:
        detections = StorageService.read_detections(settings.DETECTIONS)
    elif store:
        logger.warning("No detection file given; tracklet entries have no embeddings")

    tracklets = PipelineService.to_tracklets(trajectories, detections)
    linked = LinkService.global_link(
        tracklets, store, settings.LINK, table, settings.ONLINE.vote_floor
    )
    linked = TrackingService.rough2fine(linked, args.vote, settings.ONLINE.vote_floor)
    StorageService.write_results(out, linked, args.vote)
    print(f"{len(tracklets)} tracklets -> {len(linked)} trajectories -> {out}")
    return 0
