"""Data models shared by every tracking stage"""

import math
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class Box(BaseModel):
    """Axis-aligned box in pixels, stored as in VisDrone files"""

    model_config = ConfigDict(frozen=True)

    left: float
    top: float
    width: float
    height: float

    @model_validator(mode="after")
    def _check_geometry(self) -> "Box":
        values = (self.left, self.top, self.width, self.height)
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"box coordinates must be finite: {values}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError(
                f"box size must be positive: width={self.width}, height={self.height}"
            )
        return self

    @property
    def right(self) -> float:
        return self.left + self.width

    @property
    def bottom(self) -> float:
        return self.top + self.height

    @property
    def center(self) -> tuple[float, float]:
        return self.left + self.width / 2, self.top + self.height / 2

    @property
    def area(self) -> float:
        return self.width * self.height

    def to_xyah(self) -> np.ndarray:
        """Return the Kalman measurement (cx, cy, aspect, height)"""
        cx, cy = self.center
        return np.array([cx, cy, self.width / self.height, self.height])

    @classmethod
    def from_xyah(cls, xyah: np.ndarray) -> "Box":
        cx, cy, a, h = (float(v) for v in xyah[:4])
        w = a * h
        return cls(left=cx - w / 2, top=cy - h / 2, width=w, height=h)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return self.left, self.top, self.width, self.height


class Detection(BaseModel):
    """One per-frame detector observation"""

    model_config = ConfigDict(frozen=True)

    frame: int = Field(ge=1)
    box: Box
    score: float = Field(ge=0.0, le=1.0)
    class_id: int
    det_idx: int = Field(ge=0)  # per-frame ordinal, key into the embedding sidecar


class TrackEntry(BaseModel):
    """One frame of a tracklet or trajectory"""

    model_config = ConfigDict(frozen=True)

    frame: int = Field(ge=1)
    box: Box
    score: float = Field(ge=0.0)
    class_id: int
    det_idx: Optional[int] = None
    interpolated: bool = False


def _check_frames(entries: list[TrackEntry]) -> None:
    if not entries:
        raise ValueError("entries must not be empty")
    frames = [e.frame for e in entries]
    if any(b <= a for a, b in zip(frames, frames[1:])):
        raise ValueError("entry frames must be strictly increasing")


class Tracklet(BaseModel):
    """Identity-consistent detection chain produced by online tracking"""

    model_config = ConfigDict(frozen=True)

    id: int
    entries: list[TrackEntry]
    rough_class: str

    @field_validator("entries")
    @classmethod
    def _entries_ordered(cls, v: list[TrackEntry]) -> list[TrackEntry]:
        _check_frames(v)
        return v

    @property
    def start(self) -> int:
        return self.entries[0].frame

    @property
    def end(self) -> int:
        return self.entries[-1].frame

    def __len__(self) -> int:
        return len(self.entries)


class Trajectory(BaseModel):
    """Final output unit: per-frame boxes, scores and class votes"""

    model_config = ConfigDict(frozen=True)

    id: int
    entries: list[TrackEntry]
    rough_class: str
    class_votes: list[tuple[int, float]] = []

    @field_validator("entries")
    @classmethod
    def _entries_ordered(cls, v: list[TrackEntry]) -> list[TrackEntry]:
        _check_frames(v)
        return v

    @field_validator("class_votes")
    @classmethod
    def _votes_bounded(cls, v: list[tuple[int, float]]) -> list[tuple[int, float]]:
        if any(w < 0 or w > 1 for _, w in v):
            raise ValueError("vote weights must lie in [0, 1]")
        if sum(w for _, w in v) > 1 + 1e-9:
            raise ValueError("vote weights must sum to at most 1")
        return v

    @classmethod
    def from_tracklet(cls, tracklet: Tracklet) -> "Trajectory":
        return cls(
            id=tracklet.id,
            entries=list(tracklet.entries),
            rough_class=tracklet.rough_class,
        )

    @property
    def start(self) -> int:
        return self.entries[0].frame

    @property
    def end(self) -> int:
        return self.entries[-1].frame

    @property
    def scores(self) -> np.ndarray:
        return np.array([e.score for e in self.entries])

    @property
    def mean_score(self) -> float:
        return float(np.mean(self.scores))

    @property
    def total_score(self) -> float:
        return float(np.sum(self.scores))

    @property
    def label(self) -> int:
        """Class with the largest vote weight; ties go to the lower class id"""
        if self.class_votes:
            return min(self.class_votes, key=lambda cw: (-cw[1], cw[0]))[0]
        counts: dict[int, int] = {}
        for e in self.entries:
            counts[e.class_id] = counts.get(e.class_id, 0) + 1
        return min(counts.items(), key=lambda cc: (-cc[1], cc[0]))[0]

    def with_scores(self, scores: np.ndarray) -> "Trajectory":
        entries = [
            e.model_copy(update={"score": float(s)})
            for e, s in zip(self.entries, scores)
        ]
        return self.model_copy(update={"entries": entries})

    def __len__(self) -> int:
        return len(self.entries)


class TrackState(BaseModel):
    """Kalman state over (cx, cy, a, h) and their per-frame velocities"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    mean: np.ndarray
    cov: np.ndarray

    @model_validator(mode="after")
    def _check_state(self) -> "TrackState":
        if self.mean.shape != (8,) or self.cov.shape != (8, 8):
            raise ValueError(
                f"state must be 8-vector and 8x8 matrix, got {self.mean.shape} "
                f"and {self.cov.shape}"
            )
        if not (np.all(np.isfinite(self.mean)) and np.all(np.isfinite(self.cov))):
            raise ValueError("state must be finite")
        scale = max(1.0, float(np.max(np.abs(self.cov))))
        if np.max(np.abs(self.cov - self.cov.T)) > 1e-9 * scale:
            raise ValueError("covariance must be symmetric")
        if np.any(np.diag(self.cov) < 0):
            raise ValueError("covariance diagonal must be non-negative")
        return self

    def to_box(self) -> Box:
        return Box.from_xyah(self.mean[:4])


class TrackStatus(str, Enum):
    """Online track lifecycle status"""

    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"
    DELETED = "deleted"


class AffineTransform(BaseModel):
    """2x3 matrix mapping frame t-1 coordinates into frame t coordinates"""

    model_config = ConfigDict(frozen=True)

    a11: float = 1.0
    a12: float = 0.0
    a21: float = 0.0
    a22: float = 1.0
    tx: float = 0.0
    ty: float = 0.0

    @model_validator(mode="after")
    def _check_invertible(self) -> "AffineTransform":
        values = (self.a11, self.a12, self.a21, self.a22, self.tx, self.ty)
        if not all(math.isfinite(v) for v in values):
            raise ValueError("transform entries must be finite")
        if abs(self.det) <= 1e-9:
            raise ValueError(f"transform linear part is singular (det={self.det})")
        return self

    @classmethod
    def identity(cls) -> "AffineTransform":
        return cls()

    @property
    def det(self) -> float:
        return self.a11 * self.a22 - self.a12 * self.a21

    @property
    def linear(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a21, self.a22]])

    @property
    def translation(self) -> np.ndarray:
        return np.array([self.tx, self.ty])

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map an (N, 2) array of points"""
        return points @ self.linear.T + self.translation

    def inverse(self) -> "AffineTransform":
        inv = np.linalg.inv(self.linear)
        t = -inv @ self.translation
        return AffineTransform(
            a11=inv[0, 0], a12=inv[0, 1], a21=inv[1, 0], a22=inv[1, 1],
            tx=t[0], ty=t[1],
        )  # fmt: skip

    def then(self, other: "AffineTransform") -> "AffineTransform":
        """Compose: apply self first, then other"""
        lin = other.linear @ self.linear
        t = other.linear @ self.translation + other.translation
        return AffineTransform(
            a11=lin[0, 0], a12=lin[0, 1], a21=lin[1, 0], a22=lin[1, 1],
            tx=t[0], ty=t[1],
        )  # fmt: skip


class EvalReport(BaseModel):
    """Trajectory mAP table per (class, IoU threshold)"""

    thresholds: list[float]
    ap: dict[int, dict[float, float]]
    matched: dict[int, dict[float, int]]
    missed: dict[int, dict[float, int]]
    mAP: float

    @property
    def class_map(self) -> dict[int, float]:
        """Per-class mAP averaged over thresholds"""
        return {
            c: float(np.mean([row[t] for t in self.thresholds]))
            for c, row in self.ap.items()
        }


class ScenarioObject(BaseModel):
    """One simulated object with constant-velocity motion"""

    class_id: int
    spawn: int = Field(ge=1)
    despawn: int
    box: Box  # initial box in world coordinates
    velocity: tuple[float, float]  # px/frame
    process_sigma: float = Field(default=0.0, ge=0.0)
    occlusions: list[tuple[int, int]] = []  # inclusive frame ranges

    @model_validator(mode="after")
    def _check_span(self) -> "ScenarioObject":
        if self.spawn >= self.despawn:
            raise ValueError(f"spawn {self.spawn} must precede despawn {self.despawn}")
        for start, end in self.occlusions:
            if start > end:
                raise ValueError(f"occlusion window {start}-{end} is inverted")
        return self


class DetectorModel(BaseModel):
    """Noise model of the simulated detector"""

    miss_prob: float = Field(default=0.1, ge=0.0, le=1.0)
    duplicate_prob: float = Field(default=0.05, ge=0.0, le=1.0)
    loc_sigma: float = Field(default=0.05, ge=0.0)  # fraction of box height
    conf_base: float = 1.0
    conf_kappa: float = 2.0
    conf_noise: float = Field(default=0.05, ge=0.0)
    # fine class -> (sibling fine class, flip probability)
    class_flip: dict[int, tuple[int, float]] = {}

    @field_validator("class_flip")
    @classmethod
    def _flip_probabilities(
        cls, v: dict[int, tuple[int, float]]
    ) -> dict[int, tuple[int, float]]:
        for src, (_, p) in v.items():
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"flip probability for class {src} must be in [0, 1]")
        return v


class EmbeddingModel(BaseModel):
    """Identity embeddings: normalize(identity mean + Gaussian noise)"""

    dim: int = Field(default=32, ge=2)
    sigma: float = Field(default=0.05, ge=0.0)
    means: Optional[list[list[float]]] = None  # one per object, drawn if absent


class CameraDrift(BaseModel):
    """Per-frame camera motion applied to every rendered box"""

    dx: float = 1.0  # px/frame
    dy: float = 0.0
    rotation: float = 0.0  # rad/frame
    scale: float = 0.0  # relative zoom per frame
    jitter: float = Field(default=0.0, ge=0.0)  # px, per-frame shake


class ScenarioSpec(BaseModel):
    """Complete description of a synthetic tracking scenario"""

    num_frames: int = Field(ge=1)
    objects: list[ScenarioObject]
    detector: DetectorModel = DetectorModel()
    embedding: EmbeddingModel = EmbeddingModel()
    camera: CameraDrift = CameraDrift()
    seed: int = 7

    @model_validator(mode="after")
    def _check_objects(self) -> "ScenarioSpec":
        for i, obj in enumerate(self.objects):
            if obj.despawn > self.num_frames:
                raise ValueError(
                    f"object {i} despawns at {obj.despawn} after the last frame "
                    f"{self.num_frames}"
                )
        means = self.embedding.means
        if means is not None:
            if len(means) != len(self.objects):
                raise ValueError("one embedding mean is required per object")
            if any(len(m) != self.embedding.dim for m in means):
                raise ValueError("embedding means must match the embedding dim")
        return self


class SimulationResult(BaseModel):
    """Everything a simulated scenario renders"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    ground_truth: list[Trajectory]
    detections: list[Detection]
    embeddings: dict[tuple[int, int], np.ndarray]  # (frame, det_idx) -> unit vector
    embedding_dim: int
    transforms: dict[int, AffineTransform]  # frame t-1 -> frame t
