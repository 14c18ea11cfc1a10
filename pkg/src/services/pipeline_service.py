"""Stage chaining shared by the commands and the in-memory run"""

from typing import Optional

from loguru import logger

from src.config import Settings
from src.models import Detection, Tracklet, Trajectory
from src.services.appearance_service import EmbeddingStore
from src.services.camera_service import TransformTable
from src.services.link_service import LinkService
from src.services.postprocess_service import PostprocessService
from src.services.storage_service import VoteMode
from src.services.tracking_service import TrackingService


class PipelineService:
    """Run track -> link -> post without touching the filesystem"""

    @staticmethod
    def run(
        detections: list[Detection],
        store: EmbeddingStore,
        table: TransformTable,
        settings: Settings,
        stages: tuple[str, ...] = ("track", "link", "post"),
    ) -> list[Trajectory]:
        """
        Run the requested stages in memory

        Args:
            detections: Sorted detections of one sequence
            store: Embedding sidecar
            table: Camera transform sidecar
            settings: Run configuration
            stages: Prefix of track, link, post to execute

        Returns:
            Trajectories of the last stage, with class votes of the final
            stage's vote mode
        """
        tracklets = TrackingService.track_sequence(
            detections, store, table, settings.ONLINE, settings.NOISE
        )
        trajectories = [Trajectory.from_tracklet(t) for t in tracklets]
        if "link" in stages:
            trajectories = LinkService.global_link(
                tracklets, store, settings.LINK, table, settings.ONLINE.vote_floor
            )
        if "post" in stages:
            trajectories = PipelineService.post(trajectories, settings)
        logger.info(f"Pipeline {'->'.join(stages)}: {len(trajectories)} trajectories")
        return trajectories

    @staticmethod
    def post(
        trajectories: list[Trajectory],
        settings: Settings,
        vote_mode: Optional[VoteMode] = None,
    ) -> list[Trajectory]:
        """Post-process, then vote classes (default: the configured vote mode)"""
        processed = PostprocessService.run(trajectories, settings.POST)
        return TrackingService.rough2fine(
            processed,
            vote_mode or settings.ONLINE.vote_mode,
            settings.ONLINE.vote_floor,
        )

    @staticmethod
    def to_tracklets(
        trajectories: list[Trajectory], detections: list[Detection]
    ) -> list[Tracklet]:
        """
        Rebuild stage-1 tracklets from a result file

        Each entry's det_idx is recovered by matching (frame, box) against the
        detection file; entries without a match keep det_idx None.
        """
        index: dict[tuple[int, tuple[float, ...]], int] = {}
        for det in detections:
            index.setdefault((det.frame, det.box.as_tuple()), det.det_idx)
        tracklets = []
        for traj in trajectories:
            entries = [
                e.model_copy(
                    update={"det_idx": index.get((e.frame, e.box.as_tuple()))}
                )
                for e in traj.entries
            ]
            tracklets.append(
                Tracklet(id=traj.id, entries=entries, rough_class=traj.rough_class)
            )
        return tracklets
