"""Stage 3: trajectory denoising, interpolation, rescoring and fusion"""

import math
from collections import defaultdict
from typing import Callable

import numpy as np
from loguru import logger

from src.config import PostConfig
from src.errors import InputError
from src.models import Box, TrackEntry, Trajectory
from src.services.geometry_service import GeometryService

SortKey = Callable[[Trajectory], float]


class PostprocessService:
    """Set-to-set trajectory transforms"""

    @staticmethod
    def denoise(trajectories: list[Trajectory], cfg: PostConfig) -> list[Trajectory]:
        """
        SoftNMS between trajectories of the same class label, ranked by mean score

        Args:
            trajectories: Input trajectories
            cfg: Post-processing configuration

        Returns:
            Surviving trajectories in input order, scores decayed
        """
        survivors = PostprocessService._soft_nms(
            trajectories, lambda t: t.label, lambda t: t.mean_score, cfg
        )
        logger.info(f"Denoise: {len(trajectories)} -> {len(survivors)} trajectories")
        return survivors

    @staticmethod
    def interpolate(trajectory: Trajectory, max_gap: int) -> Trajectory:
        """
        Fill gaps of fewer than max_gap missing frames linearly

        Box coordinates and scores are blended between the bounding entries;
        an inserted entry takes the class of the nearer one (the earlier on a
        tie).

        Args:
            trajectory: Trajectory with sorted entries
            max_gap: Gaps with this many missing frames or more stay open

        Returns:
            Trajectory with interpolated entries flagged
        """
        known = trajectory.entries
        frames = np.array([e.frame for e in known])
        gaps = np.diff(frames) - 1
        fill = [
            np.arange(frames[i] + 1, frames[i + 1])
            for i in np.flatnonzero((gaps >= 1) & (gaps < max_gap))
        ]
        if not fill:
            return trajectory
        missing = np.concatenate(fill)

        # columns: left, top, width, height, score
        values = np.array([(*e.box.as_tuple(), e.score) for e in known])
        filled = np.column_stack(
            [np.interp(missing, frames, values[:, k]) for k in range(values.shape[1])]
        )
        after = np.searchsorted(frames, missing)
        inserted = []
        for frame, row, nxt in zip(missing.tolist(), filled, after):
            prev_entry, next_entry = known[nxt - 1], known[nxt]
            nearer = (
                prev_entry
                if frame - prev_entry.frame <= next_entry.frame - frame
                else next_entry
            )
            left, top, width, height, score = row.tolist()
            inserted.append(
                TrackEntry(
                    frame=frame,
                    box=Box(left=left, top=top, width=width, height=height),
                    score=score,
                    class_id=nearer.class_id,
                    interpolated=True,
                )
            )
        entries = sorted([*known, *inserted], key=lambda e: e.frame)
        return trajectory.model_copy(update={"entries": entries})

    @staticmethod
    def rescore_weight(length: float, tau: float) -> float:
        """
        Length weight (1 - e^(-l/tau)) / (1 + e^(-l/tau))

        Raises:
            InputError: If length is negative or tau is not positive
        """
        if length < 0:
            raise InputError(f"length must be non-negative, got {length}")
        if tau <= 0:
            raise InputError(f"tau must be positive, got {tau}")
        decay = math.exp(-length / tau)
        return (1.0 - decay) / (1.0 + decay)

    @staticmethod
    def rescore(trajectory: Trajectory, tau: float) -> Trajectory:
        """Scale every frame score by the weight of the trajectory's frame count"""
        weight = PostprocessService.rescore_weight(len(trajectory), tau)
        return trajectory.with_scores(trajectory.scores * weight)

    @staticmethod
    def tracknms(
        result_sets: list[list[Trajectory]], cfg: PostConfig
    ) -> list[Trajectory]:
        """
        Fuse result sets by SoftNMS over the pooled trajectories

        Trajectories are ranked by their summed frame scores and compared per
        class label. Ids are reassigned in pool order; trajectories sharing an
        id within one input set share the new id.

        Args:
            result_sets: Trajectory sets to fuse
            cfg: Post-processing configuration

        Returns:
            Fused trajectories in pool order
        """
        new_ids: dict[tuple[int, int], int] = {}
        pooled = []
        for set_index, trajectories in enumerate(result_sets):
            for traj in trajectories:
                key = (set_index, traj.id)
                if key not in new_ids:
                    new_ids[key] = len(new_ids) + 1
                pooled.append(traj.model_copy(update={"id": new_ids[key]}))
        fused = PostprocessService._soft_nms(
            pooled, lambda t: t.label, lambda t: t.total_score, cfg
        )
        logger.info(
            f"TrackNMS: {len(result_sets)} sets, {len(pooled)} trajectories -> "
            f"{len(fused)}"
        )
        return fused

    @staticmethod
    def run(trajectories: list[Trajectory], cfg: PostConfig) -> list[Trajectory]:
        """Apply the configured steps in order; no steps is the identity"""
        for step in cfg.steps:
            if step == "denoise":
                trajectories = PostprocessService.denoise(trajectories, cfg)
            elif step == "interpolate":
                trajectories = [
                    PostprocessService.interpolate(t, cfg.max_gap) for t in trajectories
                ]
            elif step == "rescore":
                trajectories = [
                    PostprocessService.rescore(t, cfg.tau) for t in trajectories
                ]
        return trajectories

    @staticmethod
    def _soft_nms(
        trajectories: list[Trajectory],
        group_key: Callable[[Trajectory], object],
        sort_key: SortKey,
        cfg: PostConfig,
    ) -> list[Trajectory]:
        groups: dict[object, list[int]] = defaultdict(list)
        for index, traj in enumerate(trajectories):
            groups[group_key(traj)].append(index)

        kept: dict[int, Trajectory] = {}
        for indices in groups.values():
            remaining = {i: trajectories[i] for i in indices}
            while remaining:
                top_index = min(
                    remaining, key=lambda i: (-sort_key(remaining[i]), i)
                )
                top = remaining.pop(top_index)
                kept[top_index] = top
                for i, other in list(remaining.items()):
                    if other.end < top.start or top.end < other.start:
                        continue
                    overlap = GeometryService.tube_iou(top, other)
                    if overlap <= cfg.nms_overlap_floor:
                        continue
                    decayed = other.with_scores(other.scores * (1.0 - overlap))
                    if decayed.mean_score < cfg.score_drop_floor:
                        del remaining[i]
                        logger.debug(
                            f"Trajectory {other.id} suppressed by {top.id} "
                            f"(tube IoU {overlap:.3f})"
                        )
                    else:
                        remaining[i] = decayed
        return [kept[i] for i in sorted(kept)]
