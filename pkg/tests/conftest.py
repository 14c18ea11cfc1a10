"""Shared fixtures"""

import os
from pathlib import Path
from typing import Callable, Optional

import pytest

from src.config import NoiseConfig, OnlineConfig, PostConfig, SimConfig
from src.models import Box, Detection, TrackEntry, Tracklet, Trajectory
from src.services.simulation_service import SimulationService

BoxTuple = tuple[float, float, float, float]

GOLDEN_DIR = Path(__file__).parent / "golden"


@pytest.fixture
def noise() -> NoiseConfig:
    return NoiseConfig()


@pytest.fixture
def online_config() -> OnlineConfig:
    return OnlineConfig()


@pytest.fixture
def post_config() -> PostConfig:
    return PostConfig()


@pytest.fixture
def make_box() -> Callable[..., Box]:
    def _make(left: float, top: float, width: float, height: float) -> Box:
        return Box(left=left, top=top, width=width, height=height)

    return _make


@pytest.fixture
def make_detection() -> Callable[..., Detection]:
    def _make(
        frame: int,
        box: BoxTuple,
        score: float = 0.9,
        class_id: int = 1,
        det_idx: int = 0,
    ) -> Detection:
        return Detection(
            frame=frame,
            box=Box(left=box[0], top=box[1], width=box[2], height=box[3]),
            score=score,
            class_id=class_id,
            det_idx=det_idx,
        )

    return _make


def _entries(
    frames: list[int],
    box: BoxTuple | Callable[[int], BoxTuple],
    score: float | Callable[[int], float],
    class_id: int | Callable[[int], int],
    det_idx: Optional[int],
) -> list[TrackEntry]:
    entries = []
    for f in frames:
        b = box(f) if callable(box) else box
        entries.append(
            TrackEntry(
                frame=f,
                box=Box(left=b[0], top=b[1], width=b[2], height=b[3]),
                score=score(f) if callable(score) else score,
                class_id=class_id(f) if callable(class_id) else class_id,
                det_idx=det_idx,
            )
        )
    return entries


@pytest.fixture
def make_trajectory() -> Callable[..., Trajectory]:
    """Trajectory over frames; box, score and class may be per-frame callables"""

    def _make(
        track_id: int,
        frames: list[int],
        box: BoxTuple | Callable[[int], BoxTuple] = (0.0, 0.0, 10.0, 10.0),
        score: float | Callable[[int], float] = 0.9,
        class_id: int | Callable[[int], int] = 1,
        rough_class: str = "person",
    ) -> Trajectory:
        return Trajectory(
            id=track_id,
            entries=_entries(frames, box, score, class_id, None),
            rough_class=rough_class,
        )

    return _make


@pytest.fixture
def make_tracklet() -> Callable[..., Tracklet]:
    """Tracklet whose entries all carry det_idx 0"""

    def _make(
        track_id: int,
        frames: list[int],
        box: BoxTuple | Callable[[int], BoxTuple] = (0.0, 0.0, 10.0, 10.0),
        score: float = 0.9,
        class_id: int = 1,
        rough_class: str = "person",
    ) -> Tracklet:
        return Tracklet(
            id=track_id,
            entries=_entries(frames, box, score, class_id, 0),
            rough_class=rough_class,
        )

    return _make


@pytest.fixture(scope="session")
def scenario():
    """Default scenario: 10 slow objects, pedestrians and cars, 300 frames"""
    spec = SimulationService.build_scenario(SimConfig(), seed=7)
    return SimulationService.simulate(spec)


@pytest.fixture(scope="session")
def occluded_scenario():
    """Default scenario where every object gets one long occlusion"""
    spec = SimulationService.build_scenario(SimConfig(occlusion_prob=1.0), seed=7)
    return SimulationService.simulate(spec)


@pytest.fixture
def golden() -> Callable[[str, dict[str, float | int]], None]:
    """Compare a key=value report with tests/golden/<name>.txt

    A missing file, or TRACKLINK_UPDATE_GOLDEN=1, writes the report and skips.
    """

    def _check(name: str, values: dict[str, float | int]) -> None:
        text = "".join(f"{key}={value}\n" for key, value in values.items())
        path = GOLDEN_DIR / f"{name}.txt"
        if not path.exists() or os.environ.get("TRACKLINK_UPDATE_GOLDEN") == "1":
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
            pytest.skip(f"golden report {path.name} written")
        assert text == path.read_text(encoding="utf-8")

    return _check
