"""Synthetic scenarios: ground truth, noisy detections, embeddings, camera drift"""

import math
from pathlib import Path

import numpy as np
from loguru import logger
from pydantic import ValidationError

from src.config import (
    BUS,
    CAR,
    DEFAULT_ROUGH_CLASSES,
    PEDESTRIAN,
    TRUCK,
    VAN,
    SimConfig,
)
from src.errors import InputError
from src.models import (
    AffineTransform,
    Box,
    CameraDrift,
    Detection,
    DetectorModel,
    EmbeddingModel,
    ScenarioObject,
    ScenarioSpec,
    SimulationResult,
    TrackEntry,
    Trajectory,
)
from src.services.appearance_service import normalize
from src.services.camera_service import CameraService
from src.services.storage_service import StorageService

# Nominal (width, height) in pixels
OBJECT_SIZES: dict[int, tuple[float, float]] = {
    PEDESTRIAN: (12.0, 30.0),
    CAR: (40.0, 24.0),
    VAN: (44.0, 28.0),
    TRUCK: (60.0, 30.0),
    BUS: (70.0, 32.0),
}
DEFAULT_SIZE = (40.0, 24.0)
FRAME_WIDTH, FRAME_HEIGHT = 1280.0, 720.0
MIN_VISIBLE = 20  # frames kept visible on each side of an occlusion

GT_FILE = "gt.txt"
DET_FILE = "det.txt"
EMB_FILE = "emb.txt"
TRANSFORM_FILE = "transforms.txt"


class SimulationService:
    """Build, render and store synthetic tracking scenarios"""

    @staticmethod
    def build_scenario(sim: SimConfig, seed: int) -> ScenarioSpec:
        """
        Draw a scenario from the simulation settings

        Objects cycle through the configured classes, spawn in the first fifth
        of the sequence and despawn in the last fifth. With occlusion_prob > 0
        an object may receive one occlusion window.

        Args:
            sim: Simulation settings
            seed: Seed of every random draw

        Returns:
            ScenarioSpec

        Raises:
            InputError: If the settings describe an invalid scenario
        """
        if sim.occlusion_min > sim.occlusion_max:
            raise InputError(
                f"occlusion_min {sim.occlusion_min} exceeds occlusion_max "
                f"{sim.occlusion_max}"
            )
        rng = np.random.default_rng(seed)
        n = sim.num_frames
        edge = max(1, n // 5)
        objects = []
        for i in range(sim.num_objects):
            class_id = sim.classes[i % len(sim.classes)]
            base_w, base_h = OBJECT_SIZES.get(class_id, DEFAULT_SIZE)
            width = base_w * rng.uniform(0.8, 1.2)
            height = base_h * rng.uniform(0.8, 1.2)
            left = rng.uniform(50.0, FRAME_WIDTH - 50.0 - width)
            top = rng.uniform(50.0, FRAME_HEIGHT - 50.0 - height)
            speed = rng.uniform(0.0, sim.max_speed)
            heading = rng.uniform(0.0, 2 * math.pi)
            spawn = int(rng.integers(1, edge + 1))
            despawn = n - int(rng.integers(0, edge))
            if despawn <= spawn:
                despawn = min(n, spawn + 1)
            occlusions = []
            if sim.occlusion_prob > 0 and rng.random() < sim.occlusion_prob:
                length = int(rng.integers(sim.occlusion_min, sim.occlusion_max + 1))
                room = despawn - spawn + 1 - 2 * MIN_VISIBLE
                length = min(length, room)
                if length >= sim.occlusion_min:
                    start = spawn + MIN_VISIBLE + int(rng.integers(0, room - length + 1))
                    occlusions.append((start, start + length - 1))
            objects.append(
                ScenarioObject(
                    class_id=class_id,
                    spawn=spawn,
                    despawn=despawn,
                    box=Box(left=left, top=top, width=width, height=height),
                    velocity=(speed * math.cos(heading), speed * math.sin(heading)),
                    process_sigma=sim.process_sigma,
                    occlusions=occlusions,
                )
            )
        try:
            return ScenarioSpec(
                num_frames=n,
                objects=objects,
                detector=DetectorModel(
                    miss_prob=sim.miss_prob,
                    duplicate_prob=sim.duplicate_prob,
                    loc_sigma=sim.loc_sigma,
                    conf_kappa=sim.conf_kappa,
                    conf_noise=sim.conf_noise,
                    class_flip=sim.class_flip,
                ),
                embedding=EmbeddingModel(
                    dim=sim.embedding_dim, sigma=sim.embedding_sigma
                ),
                camera=CameraDrift(
                    dx=sim.drift_x, dy=sim.drift_y, jitter=sim.camera_jitter
                ),
                seed=seed,
            )
        except ValidationError as e:
            raise InputError(f"invalid scenario: {e.errors()[0]['msg']}") from e

    @staticmethod
    def simulate(spec: ScenarioSpec) -> SimulationResult:
        """
        Render a scenario

        Objects move at constant velocity plus Gaussian process noise in world
        coordinates; each frame's camera transform maps the previous frame
        into the current one. Detection confidence falls with localization
        error so that it tracks measurement quality.

        Args:
            spec: Scenario description

        Returns:
            Ground truth, detections, embeddings and camera transforms
        """
        rng = np.random.default_rng(spec.seed)
        means = SimulationService._embedding_means(spec, rng)
        transforms, world_to_image = SimulationService._camera_path(spec, rng)

        world = [SimulationService._world_path(obj, rng) for obj in spec.objects]
        visible: list[dict[int, Box]] = []
        for obj, path in zip(spec.objects, world):
            boxes = {}
            for frame, box in path.items():
                if any(start <= frame <= end for start, end in obj.occlusions):
                    continue
                boxes[frame] = CameraService.warp_box(world_to_image[frame], box)
            visible.append(boxes)

        ground_truth = [
            Trajectory(
                id=i + 1,
                entries=[
                    TrackEntry(frame=f, box=b, score=1.0, class_id=obj.class_id)
                    for f, b in sorted(boxes.items())
                ],
                rough_class=DEFAULT_ROUGH_CLASSES.get(obj.class_id, str(obj.class_id)),
            )
            for i, (obj, boxes) in enumerate(zip(spec.objects, visible))
            if boxes
        ]

        detections: list[Detection] = []
        embeddings: dict[tuple[int, int], np.ndarray] = {}
        detector = spec.detector
        for frame in range(1, spec.num_frames + 1):
            det_idx = 0
            for i, obj in enumerate(spec.objects):
                gt_box = visible[i].get(frame)
                if gt_box is None or rng.random() < detector.miss_prob:
                    continue
                copies = 2 if rng.random() < detector.duplicate_prob else 1
                for _ in range(copies):
                    box, score = SimulationService._observe(gt_box, detector, rng)
                    class_id = SimulationService._observed_class(
                        obj.class_id, detector, rng
                    )
                    detections.append(
                        Detection(
                            frame=frame,
                            box=box,
                            score=score,
                            class_id=class_id,
                            det_idx=det_idx,
                        )
                    )
                    noise = rng.normal(0.0, spec.embedding.sigma, spec.embedding.dim)
                    embeddings[(frame, det_idx)] = normalize(
                        means[i] + noise
                    )
                    det_idx += 1

        logger.info(
            f"Simulated {len(spec.objects)} objects over {spec.num_frames} frames: "
            f"{len(detections)} detections"
        )
        return SimulationResult(
            ground_truth=ground_truth,
            detections=detections,
            embeddings=embeddings,
            embedding_dim=spec.embedding.dim,
            transforms=transforms,
        )

    @staticmethod
    def write(result: SimulationResult, out_dir: Path) -> dict[str, str]:
        """
        Write the four scenario files into out_dir

        Returns:
            Mapping of gt, det, emb and transforms to file paths
        """
        out_dir = Path(out_dir)
        return {
            "gt": StorageService.write_ground_truth(
                out_dir / GT_FILE, result.ground_truth
            ),
            "det": StorageService.write_detections(
                out_dir / DET_FILE, result.detections
            ),
            "emb": StorageService.write_embeddings(
                out_dir / EMB_FILE, result.embedding_dim, result.embeddings
            ),
            "transforms": StorageService.write_transforms(
                out_dir / TRANSFORM_FILE, result.transforms
            ),
        }

    @staticmethod
    def camera_step(camera: CameraDrift) -> AffineTransform:
        """Transform from one frame into the next for a drifting camera"""
        s = 1.0 + camera.scale
        cos, sin = math.cos(camera.rotation), math.sin(camera.rotation)
        return AffineTransform(
            a11=s * cos, a12=-s * sin, a21=s * sin, a22=s * cos,
            tx=-camera.dx, ty=-camera.dy,
        )  # fmt: skip

    @staticmethod
    def _camera_path(
        spec: ScenarioSpec, rng: np.random.Generator
    ) -> tuple[dict[int, AffineTransform], dict[int, AffineTransform]]:
        drift = SimulationService.camera_step(spec.camera)
        transforms: dict[int, AffineTransform] = {}
        world_to_image = {1: AffineTransform.identity()}
        for frame in range(2, spec.num_frames + 1):
            step = drift
            if spec.camera.jitter > 0:
                shake = rng.normal(0.0, spec.camera.jitter, 2)
                step = drift.model_copy(
                    update={
                        "tx": drift.tx + float(shake[0]),
                        "ty": drift.ty + float(shake[1]),
                    }
                )
            transforms[frame] = step
            world_to_image[frame] = world_to_image[frame - 1].then(step)
        return transforms, world_to_image

    @staticmethod
    def _world_path(obj: ScenarioObject, rng: np.random.Generator) -> dict[int, Box]:
        left, top = obj.box.left, obj.box.top
        vx, vy = obj.velocity
        path = {}
        for frame in range(obj.spawn, obj.despawn + 1):
            if frame > obj.spawn:
                left += vx
                top += vy
                if obj.process_sigma > 0:
                    jitter = rng.normal(0.0, obj.process_sigma, 2)
                    left += jitter[0]
                    top += jitter[1]
            path[frame] = Box(
                left=left, top=top, width=obj.box.width, height=obj.box.height
            )
        return path

    @staticmethod
    def _observe(
        gt_box: Box, detector: DetectorModel, rng: np.random.Generator
    ) -> tuple[Box, float]:
        """Perturbed box and a confidence that drops with the perturbation"""
        h = gt_box.height
        noise = rng.normal(0.0, detector.loc_sigma * h, 4)
        width = max(gt_box.width + noise[2], 0.1 * gt_box.width)
        height = max(gt_box.height + noise[3], 0.1 * gt_box.height)
        box = Box(
            left=gt_box.left + noise[0],
            top=gt_box.top + noise[1],
            width=width,
            height=height,
        )
        error = float(np.linalg.norm(noise)) / h
        jitter = rng.normal(0.0, detector.conf_noise) if detector.conf_noise > 0 else 0.0
        score = detector.conf_base - detector.conf_kappa * error + jitter
        return box, float(min(1.0, max(0.0, score)))

    @staticmethod
    def _observed_class(
        class_id: int, detector: DetectorModel, rng: np.random.Generator
    ) -> int:
        flip = detector.class_flip.get(class_id)
        if flip is None:
            return class_id
        sibling, probability = flip
        return sibling if rng.random() < probability else class_id

    @staticmethod
    def _embedding_means(spec: ScenarioSpec, rng: np.random.Generator) -> np.ndarray:
        """Given means, or orthonormal ones when the dimension allows it"""
        count, dim = len(spec.objects), spec.embedding.dim
        if spec.embedding.means is not None:
            return np.array(
                [normalize(np.asarray(m)) for m in spec.embedding.means]
            )
        draws = rng.normal(size=(dim, max(count, 1)))
        if count <= dim:
            q, _ = np.linalg.qr(draws)
            return q.T[:count]
        return np.array([normalize(v) for v in draws.T])
