"""Stage 2: global link of tracklets into trajectories"""

from itertools import groupby
from typing import Optional

import numpy as np
from loguru import logger

from src.config import LinkConfig
from src.errors import InputError, PreconditionError
from src.models import Tracklet, Trajectory
from src.services.appearance_service import EmbeddingStore, normalize
from src.services.assignment_service import INFEASIBLE, AssignmentService
from src.services.camera_service import TransformTable
from src.services.tracking_service import TrackingService


class ClipFeatureBank:
    """Normalized clip-level appearance features of one tracklet"""

    def __init__(self, clips: list[np.ndarray], clip_len: int):
        self.clips = clips
        self.clip_len = clip_len

    def matrix(self) -> np.ndarray:
        return np.vstack(self.clips)

    def merge(self, other: "ClipFeatureBank") -> "ClipFeatureBank":
        return ClipFeatureBank(self.clips + other.clips, self.clip_len)

    def __len__(self) -> int:
        return len(self.clips)


class LinkService:
    """Clip features, link costs and multi-round Hungarian linking"""

    @staticmethod
    def clip_features(
        tracklet: Tracklet, store: EmbeddingStore, clip_len: int
    ) -> ClipFeatureBank:
        """
        Average embeddings over consecutive clips of clip_len entries

        Args:
            tracklet: Tracklet whose entries carry det_idx keys
            store: Embedding sidecar
            clip_len: Entries per clip

        Returns:
            Bank with one normalized mean per clip that has any embedding

        Raises:
            InputError: If no entry of the tracklet has an embedding
        """
        clips = []
        for start in range(0, len(tracklet.entries), clip_len):
            window = tracklet.entries[start : start + clip_len]
            features = [
                f
                for f in (store.get(e.frame, e.det_idx) for e in window)
                if f is not None
            ]
            if features:
                clips.append(normalize(np.mean(features, axis=0)))
        if not clips:
            raise InputError(f"tracklet {tracklet.id} has no embeddings")
        return ClipFeatureBank(clips, clip_len)

    @staticmethod
    def appearance_cost(bi: ClipFeatureBank, bj: ClipFeatureBank) -> float:
        """
        Smallest cosine distance between any clip of bi and any clip of bj

        Raises:
            PreconditionError: If either bank is empty
        """
        if not len(bi) or not len(bj):
            raise PreconditionError("appearance cost against an empty clip bank")
        return float(np.min(1.0 - bi.matrix() @ bj.matrix().T))

    @staticmethod
    def combine_costs(c_a: float, c_t: float, c_s: float, cfg: LinkConfig) -> float:
        """Weighted link cost, infeasible unless every cost is under its threshold"""
        if not (c_a < cfg.th_a and 0 < c_t < cfg.th_t and c_s < cfg.th_s):
            return INFEASIBLE
        return cfg.lambda_a * c_a + cfg.lambda_t * c_t + cfg.lambda_s * c_s

    @staticmethod
    def space_cost(
        tli: Tracklet,
        tlj: Tracklet,
        table: Optional[TransformTable] = None,
        camera_aligned: bool = True,
    ) -> float:
        """Distance from the tail centre of tli to the head centre of tlj

        With camera alignment the tail centre is carried through the frame
        transforms between the two tracklets first.
        """
        tail = np.array([tli.entries[-1].box.center])
        if camera_aligned and table:
            tail = table.between(tli.end, tlj.start).apply(tail)
        head = np.array(tlj.entries[0].box.center)
        return float(np.linalg.norm(tail[0] - head))

    @staticmethod
    def link_cost(
        tli: Tracklet,
        tlj: Tracklet,
        cfg: LinkConfig,
        bank_i: Optional[ClipFeatureBank] = None,
        bank_j: Optional[ClipFeatureBank] = None,
        table: Optional[TransformTable] = None,
    ) -> float:
        """
        Cost of appending tlj after tli

        Args:
            tli: Earlier tracklet
            tlj: Later tracklet
            cfg: Link configuration
            bank_i: Clip bank of tli; without both banks C_a is 0
            bank_j: Clip bank of tlj
            table: Camera transforms for the aligned space cost

        Returns:
            lambda_a C_a + lambda_t C_t + lambda_s C_s, or INFEASIBLE
        """
        if tli.rough_class != tlj.rough_class or tlj.start <= tli.end:
            return INFEASIBLE
        c_a = (
            LinkService.appearance_cost(bank_i, bank_j)
            if bank_i is not None and bank_j is not None
            else 0.0
        )
        c_t = float(tlj.start - tli.end)
        c_s = LinkService.space_cost(tli, tlj, table, cfg.camera_aligned)
        return LinkService.combine_costs(c_a, c_t, c_s, cfg)

    @staticmethod
    def global_link(
        tracklets: list[Tracklet],
        store: EmbeddingStore,
        cfg: LinkConfig,
        table: Optional[TransformTable] = None,
        vote_floor: float = 0.2,
    ) -> list[Trajectory]:
        """
        Link tracklets of each rough class into trajectories

        Rows are tracklet tails and columns tracklet heads; matched pairs are
        concatenated and the assignment is repeated until no feasible pair is
        left, so chains of any length form. A merged trajectory takes the id
        of its earliest component.

        Args:
            tracklets: Stage-1 tracklets with det_idx on their entries
            store: Embedding sidecar; when empty, C_a is 0 for every pair
            cfg: Link configuration
            table: Camera transforms for the aligned space cost
            vote_floor: Soft-vote floor for the recomputed class votes

        Returns:
            Trajectories ordered by id, with soft class votes
        """
        if not store and tracklets:
            logger.warning("No embeddings available; linking on space and time only")

        linked: list[Tracklet] = []
        ordered = sorted(tracklets, key=lambda t: t.rough_class)
        for rough_class, group in groupby(ordered, key=lambda t: t.rough_class):
            members = sorted(group, key=lambda t: t.id)
            chains = LinkService._link_class(members, store, cfg, table)
            logger.info(
                f"Global link ({rough_class}): {len(members)} tracklets -> "
                f"{len(chains)} trajectories"
            )
            linked += chains

        trajectories = [
            Trajectory.from_tracklet(t) for t in sorted(linked, key=lambda t: t.id)
        ]
        return TrackingService.rough2fine(trajectories, "soft", vote_floor)

    @staticmethod
    def _link_class(
        tracklets: list[Tracklet],
        store: EmbeddingStore,
        cfg: LinkConfig,
        table: Optional[TransformTable],
    ) -> list[Tracklet]:
        chains = list(tracklets)
        banks: dict[int, Optional[ClipFeatureBank]] = {
            t.id: LinkService._bank_or_none(t, store, cfg) for t in chains
        }
        while len(chains) > 1:
            cost = np.full((len(chains), len(chains)), INFEASIBLE)
            for i, tli in enumerate(chains):
                for j, tlj in enumerate(chains):
                    if i == j:
                        continue
                    if store and (banks[tli.id] is None or banks[tlj.id] is None):
                        continue
                    cost[i, j] = LinkService.link_cost(
                        tli, tlj, cfg, banks[tli.id], banks[tlj.id], table
                    )
            matches = AssignmentService.solve_assignment(cost)
            if not matches:
                break
            successor = dict(matches)
            has_predecessor = set(successor.values())
            merged = []
            for i in range(len(chains)):
                if i in has_predecessor:
                    continue
                path = [i]
                while path[-1] in successor:
                    path.append(successor[path[-1]])
                merged.append(LinkService._concatenate([chains[k] for k in path], banks))
                logger.debug(
                    "Linked tracklets " + " -> ".join(str(chains[k].id) for k in path)
                )
            chains = sorted(merged, key=lambda t: t.id)
        return chains

    @staticmethod
    def _concatenate(
        parts: list[Tracklet], banks: dict[int, Optional[ClipFeatureBank]]
    ) -> Tracklet:
        """Join time-ordered tracklets under the first one's id; banks are unioned"""
        head = parts[0]
        if len(parts) == 1:
            return head
        bank = banks[head.id]
        for part in parts[1:]:
            other = banks.pop(part.id)
            if bank is not None and other is not None:
                bank = bank.merge(other)
        banks[head.id] = bank
        entries = [e for part in parts for e in part.entries]
        return Tracklet(id=head.id, entries=entries, rough_class=head.rough_class)

    @staticmethod
    def _bank_or_none(
        tracklet: Tracklet, store: EmbeddingStore, cfg: LinkConfig
    ) -> Optional[ClipFeatureBank]:
        if not store:
            return None
        try:
            return LinkService.clip_features(tracklet, store, cfg.clip_len)
        except InputError:
            logger.debug(f"Tracklet {tracklet.id} has no embeddings; it cannot be linked")
            return None
