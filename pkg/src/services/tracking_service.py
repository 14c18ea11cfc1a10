"""Stage 1: online tracking and Rough2Fine class voting"""

from collections import defaultdict
from typing import Literal, Optional

import numpy as np
from loguru import logger

from src.config import FilterMode, NoiseConfig, OnlineConfig
from src.errors import InputError, PreconditionError
from src.models import (
    AffineTransform,
    Detection,
    TrackEntry,
    Tracklet,
    TrackStatus,
    Trajectory,
)
from src.services.appearance_service import AppearanceService, EmaBank, EmbeddingStore
from src.services.assignment_service import INFEASIBLE, AssignmentService
from src.services.camera_service import CameraService, TransformTable
from src.services.geometry_service import GeometryService
from src.services.motion_service import MotionService

Match = tuple[int, int]


class TrackRuntime:
    """Mutable per-track state of the online tracker"""

    def __init__(
        self,
        track_id: int,
        detection: Detection,
        rough_class: str,
        mode: FilterMode,
        config: OnlineConfig,
        noise: NoiseConfig,
        embedding: Optional[np.ndarray] = None,
    ):
        self.id = track_id
        self.rough_class = rough_class
        self.mode = mode
        self.state = MotionService.initiate(detection.box.to_xyah(), noise)
        self.bank = EmaBank(config.bank_size, config.momentum)
        self.status = TrackStatus.TENTATIVE
        self.hits = 1
        self.misses = 0
        self.entries: list[TrackEntry] = []
        self._n_init = config.n_init
        self._max_age = config.max_age
        self._record(detection, embedding)
        if self.hits >= self._n_init:
            self.status = TrackStatus.CONFIRMED
        self.ever_confirmed = self.status == TrackStatus.CONFIRMED

    def predict(self, noise: NoiseConfig) -> None:
        if self.mode.estimator == "ukf":
            self.state = MotionService.ukf_step(self.state, self.mode.motion, noise)
        else:
            self.state = MotionService.predict(self.state, self.mode.motion, noise)

    def compensate(self, transform: AffineTransform) -> None:
        self.state = CameraService.compensate(self.state, transform)

    def update(
        self,
        detection: Detection,
        noise: NoiseConfig,
        embedding: Optional[np.ndarray] = None,
    ) -> None:
        z = detection.box.to_xyah()
        if self.mode.estimator == "ukf":
            self.state = MotionService.ukf_update(
                self.state,
                z,
                detection.score,
                self.mode.update,
                self.mode.motion,
                noise,
            )
        else:
            self.state = MotionService.update(
                self.state,
                z,
                detection.score,
                self.mode.update,
                noise,
                frame=detection.frame,
                track_id=self.id,
            )
        self._record(detection, embedding)
        self.hits += 1
        self.misses = 0
        if self.status == TrackStatus.TENTATIVE and self.hits >= self._n_init:
            self.status = TrackStatus.CONFIRMED
            self.ever_confirmed = True

    def mark_missed(self) -> None:
        self.misses += 1
        if self.status == TrackStatus.TENTATIVE or self.misses > self._max_age:
            self.status = TrackStatus.DELETED

    def predicted_box(self) -> Optional[np.ndarray]:
        """(left, top, width, height) of the state, None if degenerate"""
        cx, cy, a, h = self.state.mean[:4]
        if not (a > 0 and h > 0):
            return None
        w = a * h
        return np.array([cx - w / 2, cy - h / 2, w, h])

    def to_tracklet(self) -> Tracklet:
        return Tracklet(id=self.id, entries=self.entries, rough_class=self.rough_class)

    @property
    def is_confirmed(self) -> bool:
        return self.status == TrackStatus.CONFIRMED

    @property
    def is_tentative(self) -> bool:
        return self.status == TrackStatus.TENTATIVE

    @property
    def is_deleted(self) -> bool:
        return self.status == TrackStatus.DELETED

    def _record(self, detection: Detection, embedding: Optional[np.ndarray]) -> None:
        self.entries.append(
            TrackEntry(
                frame=detection.frame,
                box=detection.box,
                score=detection.score,
                class_id=detection.class_id,
                det_idx=detection.det_idx,
            )
        )
        if embedding is not None:
            AppearanceService.bank_push(self.bank, embedding)


class TrackingService:
    """Online association, track lifecycle and class voting"""

    @staticmethod
    def associate_frame(
        tracks: list[TrackRuntime],
        detections: list[Detection],
        embeddings: list[Optional[np.ndarray]],
        config: OnlineConfig,
        noise: NoiseConfig,
    ) -> tuple[list[Match], list[int], list[int]]:
        """
        Match predicted tracks to one frame's detections

        Confirmed tracks are matched first in a cascade ordered by consecutive
        misses, on appearance cost gated by Mahalanobis distance. Remaining
        tentative tracks and confirmed tracks missed for no frame are then
        matched by 1 - IoU. Only pairs of the same rough class are feasible.

        Args:
            tracks: Tracks already predicted and compensated for this frame
            detections: Detections of the frame
            embeddings: Embedding per detection, None where unavailable
            config: Online tracking configuration
            noise: Kalman noise configuration

        Returns:
            (matches as (track index, detection index), unmatched track
            indices, unmatched detection indices)

        Raises:
            InputError: On dimension mismatch between embeddings and banks
        """
        rough = [config.rough_classes[d.class_id] for d in detections]
        unmatched_dets = list(range(len(detections)))
        matches: list[Match] = []

        confirmed = [i for i, t in enumerate(tracks) if t.is_confirmed]
        tentative = [i for i, t in enumerate(tracks) if not t.is_confirmed]
        for level in range(config.max_age + 1):
            if not unmatched_dets:
                break
            level_tracks = [i for i in confirmed if tracks[i].misses == level]
            if not level_tracks:
                continue
            cost = TrackingService._appearance_cost(
                [tracks[i] for i in level_tracks],
                [detections[j] for j in unmatched_dets],
                [embeddings[j] for j in unmatched_dets],
                [rough[j] for j in unmatched_dets],
                config,
                noise,
            )
            level_matches = AssignmentService.solve_assignment(cost)
            matches += [(level_tracks[r], unmatched_dets[c]) for r, c in level_matches]
            taken = {unmatched_dets[c] for _, c in level_matches}
            unmatched_dets = [j for j in unmatched_dets if j not in taken]

        matched_tracks = {i for i, _ in matches}
        leftover = [i for i in confirmed if i not in matched_tracks]
        candidates = tentative + [i for i in leftover if tracks[i].misses == 0]
        unmatched_tracks = [i for i in leftover if tracks[i].misses != 0]

        cost = TrackingService._iou_cost(
            [tracks[i] for i in candidates],
            [detections[j] for j in unmatched_dets],
            [rough[j] for j in unmatched_dets],
            config,
        )
        iou_matches = AssignmentService.solve_assignment(cost)
        matches += [(candidates[r], unmatched_dets[c]) for r, c in iou_matches]
        rows_left, cols_left = AssignmentService.unmatched(
            iou_matches, len(candidates), len(unmatched_dets)
        )
        unmatched_tracks = sorted(unmatched_tracks + [candidates[r] for r in rows_left])
        unmatched_dets = [unmatched_dets[c] for c in cols_left]
        return sorted(matches), unmatched_tracks, unmatched_dets

    @staticmethod
    def _appearance_cost(
        tracks: list[TrackRuntime],
        detections: list[Detection],
        embeddings: list[Optional[np.ndarray]],
        rough: list[str],
        config: OnlineConfig,
        noise: NoiseConfig,
    ) -> np.ndarray:
        cost = np.full((len(tracks), len(detections)), INFEASIBLE)
        if not detections:
            return cost
        measurements = np.array([d.box.to_xyah() for d in detections])
        with_features = [j for j, f in enumerate(embeddings) if f is not None]
        features = (
            np.vstack([embeddings[j] for j in with_features]) if with_features else None
        )
        for row, track in enumerate(tracks):
            gate = np.atleast_1d(
                MotionService.gating_distance(track.state, measurements, noise)
            )
            # motion-only cost in appearance units
            row_cost = config.appearance_threshold * gate / config.gate_threshold
            if features is not None and len(track.bank):
                row_cost[with_features] = AppearanceService.cosine_cost_matrix(
                    [track.bank], features
                )[0]
            feasible = (
                (gate <= config.gate_threshold)
                & (row_cost <= config.appearance_threshold)
                & np.array([r == track.rough_class for r in rough])
            )
            cost[row] = np.where(feasible, row_cost, INFEASIBLE)
        return cost

    @staticmethod
    def _iou_cost(
        tracks: list[TrackRuntime],
        detections: list[Detection],
        rough: list[str],
        config: OnlineConfig,
    ) -> np.ndarray:
        cost = np.full((len(tracks), len(detections)), INFEASIBLE)
        if not tracks or not detections:
            return cost
        det_boxes = np.array([d.box.as_tuple() for d in detections])
        for row, track in enumerate(tracks):
            box = track.predicted_box()
            if box is None:
                continue
            row_cost = 1.0 - GeometryService.iou_matrix(box[None, :], det_boxes)[0]
            feasible = (row_cost <= config.iou_fallback_threshold) & np.array(
                [r == track.rough_class for r in rough]
            )
            cost[row] = np.where(feasible, row_cost, INFEASIBLE)
        return cost

    @staticmethod
    def track_sequence(
        detections: list[Detection],
        store: EmbeddingStore,
        table: TransformTable,
        config: OnlineConfig,
        noise: NoiseConfig,
    ) -> list[Tracklet]:
        """
        Run online tracking over one sequence

        Per frame: predict, compensate camera motion, associate, update
        (confidence-scaled in nsa mode), then apply the lifecycle.

        Args:
            detections: Detections sorted by (frame, det_idx)
            store: Embedding sidecar (may be empty)
            table: Camera transform sidecar (may be empty)
            config: Online tracking configuration
            noise: Kalman noise configuration

        Returns:
            Tracklets of confirmed tracks, ordered by id

        Raises:
            InputError: On unsorted or duplicate (frame, det_idx) keys
        """
        by_frame = TrackingService._group_frames(detections, config)
        if not by_frame:
            logger.info("No trackable detections; no tracklets produced")
            return []
        if not store:
            logger.warning("No embeddings available; association is motion-only")
        warned_missing = not store

        tracks: list[TrackRuntime] = []
        finished: list[TrackRuntime] = []
        next_id = 1
        first, last = min(by_frame), max(by_frame)
        for frame in range(first, last + 1):
            frame_dets = by_frame.get(frame, [])
            embeddings = [store.get(frame, d.det_idx) for d in frame_dets]
            if not warned_missing and any(f is None for f in embeddings):
                logger.warning(
                    f"Frame {frame}: detections without embeddings fall back to "
                    "motion cost"
                )
                warned_missing = True

            transform = table.get(frame)
            for track in tracks:
                track.predict(noise)
                if transform is not None:
                    track.compensate(transform)

            matches, unmatched_tracks, unmatched_dets = TrackingService.associate_frame(
                tracks, frame_dets, embeddings, config, noise
            )
            for t, d in matches:
                tracks[t].update(frame_dets[d], noise, embeddings[d])
            for t in unmatched_tracks:
                tracks[t].mark_missed()
            for d in unmatched_dets:
                det = frame_dets[d]
                rough_class = config.rough_classes[det.class_id]
                tracks.append(
                    TrackRuntime(
                        next_id,
                        det,
                        rough_class,
                        config.filter_for(rough_class),
                        config,
                        noise,
                        embeddings[d],
                    )
                )
                next_id += 1
            finished += [t for t in tracks if t.is_deleted]
            tracks = [t for t in tracks if not t.is_deleted]
            logger.debug(
                f"Frame {frame}: {len(frame_dets)} detections, {len(matches)} matches, "
                f"{len(tracks)} live tracks"
            )

        tracklets = [
            t.to_tracklet()
            for t in sorted(finished + tracks, key=lambda t: t.id)
            if t.ever_confirmed and len(t.entries) >= config.min_len
        ]
        logger.info(
            f"Online tracking: {len(detections)} detections over frames "
            f"{first}-{last} -> {len(tracklets)} tracklets"
        )
        return tracklets

    @staticmethod
    def _group_frames(
        detections: list[Detection], config: OnlineConfig
    ) -> dict[int, list[Detection]]:
        by_frame: dict[int, list[Detection]] = defaultdict(list)
        unknown: dict[int, int] = defaultdict(int)
        last_key = (0, -1)
        for det in detections:
            key = (det.frame, det.det_idx)
            if key == last_key:
                raise InputError(f"duplicate detection key (frame, det_idx) = {key}")
            if key < last_key:
                raise InputError(
                    f"detections are not sorted: {key} follows {last_key}"
                )
            last_key = key
            if det.class_id not in config.rough_classes:
                unknown[det.class_id] += 1
                continue
            by_frame[det.frame].append(det)
        if unknown:
            counts = ", ".join(f"class {c}: {n}" for c, n in sorted(unknown.items()))
            logger.info(f"Dropped detections of unmapped classes ({counts})")
        return dict(by_frame)

    @staticmethod
    def rough2fine(
        trajectories: list[Trajectory],
        mode: Literal["none", "hard", "soft"],
        vote_floor: float = 0.2,
    ) -> list[Trajectory]:
        """
        Assign fine-class votes to each trajectory

        Votes are the per-class sums of detection scores, normalized. Hard
        mode keeps the argmax (ties go to the lower class id); soft mode keeps
        every class at or above vote_floor, renormalized. Interpolated entries
        do not vote.

        Args:
            trajectories: Trajectories whose entries carry fine classes
            mode: none (votes cleared), hard or soft
            vote_floor: Minimum normalized weight kept by soft mode

        Returns:
            Trajectories with class_votes set

        Raises:
            PreconditionError: If a trajectory has no entries
        """
        if mode == "none":
            return [t.model_copy(update={"class_votes": []}) for t in trajectories]
        voted = []
        for traj in trajectories:
            weights = TrackingService.vote_weights(traj)
            best = min(weights.items(), key=lambda cw: (-cw[1], cw[0]))[0]
            if mode == "hard":
                votes = [(best, 1.0)]
            else:
                kept = {c: w for c, w in weights.items() if w >= vote_floor or c == best}
                total = sum(kept.values())
                votes = [(c, kept[c] / total) for c in sorted(kept)]
            voted.append(traj.model_copy(update={"class_votes": votes}))
        return voted

    @staticmethod
    def vote_weights(traj: Trajectory) -> dict[int, float]:
        """Normalized per-class score sums; entry counts when every score is 0"""
        entries = [e for e in traj.entries if not e.interpolated] or traj.entries
        if not entries:
            raise PreconditionError(f"trajectory {traj.id} has no entries")
        totals: dict[int, float] = defaultdict(float)
        for e in entries:
            totals[e.class_id] += e.score
        norm = sum(totals.values())
        if norm <= 0:
            totals = defaultdict(float)
            for e in entries:
                totals[e.class_id] += 1.0
            norm = float(len(entries))
        return {c: totals[c] / norm for c in sorted(totals)}
