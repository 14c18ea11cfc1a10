"""Camera-motion compensation from precomputed per-frame affine transforms"""

import math
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
from loguru import logger
from pydantic import ValidationError

from src.errors import InputError, NumericalError
from src.models import AffineTransform, Box, TrackState
from src.services.motion_service import build_state


class TransformTable:
    """Per-frame transforms; absent frames are the identity"""

    def __init__(self, transforms: Optional[dict[int, AffineTransform]] = None):
        self.transforms = transforms or {}

    def get(self, frame: int) -> Optional[AffineTransform]:
        return self.transforms.get(frame)

    def between(self, start: int, end: int) -> AffineTransform:
        """Accumulated transform from frame `start` coordinates into frame `end`"""
        total = AffineTransform.identity()
        for frame in range(start + 1, end + 1):
            step = self.transforms.get(frame)
            if step is not None:
                total = total.then(step)
        return total

    def __len__(self) -> int:
        return len(self.transforms)

    def __bool__(self) -> bool:
        return bool(self.transforms)


class CameraService:
    """Warp boxes and track states between frame coordinate systems"""

    @staticmethod
    def warp_box(t: AffineTransform, b: Box) -> Box:
        """
        Axis-aligned bounding box of the four warped corners

        Args:
            t: Transform
            b: Box in source coordinates

        Returns:
            Box in target coordinates

        Raises:
            NumericalError: If the warped box is degenerate
        """
        corners = np.array(
            [[b.left, b.top], [b.right, b.top], [b.left, b.bottom], [b.right, b.bottom]]
        )
        warped = t.apply(corners)
        left, top = warped.min(axis=0)
        right, bottom = warped.max(axis=0)
        width, height = right - left, bottom - top
        if not (width > 0 and height > 0):
            raise NumericalError("warped box is degenerate", width=width, height=height)
        return Box(left=left, top=top, width=width, height=height)

    @staticmethod
    def aspect_scale(linear: np.ndarray) -> float:
        """Geometric mean of the column-norm and row-norm ratios of the linear part

        Equals the column-norm ratio for diagonal and similarity transforms and
        inverts exactly under the inverse transform.
        """
        col1, col2 = np.linalg.norm(linear[:, 0]), np.linalg.norm(linear[:, 1])
        row1, row2 = np.linalg.norm(linear[0, :]), np.linalg.norm(linear[1, :])
        return math.sqrt((col1 * row1) / (col2 * row2))

    @staticmethod
    def jacobian(t: AffineTransform) -> np.ndarray:
        """8x8 Jacobian of the state map: blocks A, r, s for position and velocity"""
        linear = t.linear
        size_scale = math.sqrt(abs(t.det))
        aspect_scale = CameraService.aspect_scale(linear)
        jac = np.zeros((8, 8))
        for offset in (0, 4):
            jac[offset : offset + 2, offset : offset + 2] = linear
            jac[offset + 2, offset + 2] = aspect_scale
            jac[offset + 3, offset + 3] = size_scale
        return jac

    @staticmethod
    def compensate(state: TrackState, t: AffineTransform) -> TrackState:
        """
        Map a predicted state into the next frame's coordinates

        Args:
            state: Predicted state in frame t-1 coordinates
            t: Transform from frame t-1 into frame t

        Returns:
            State in frame t coordinates

        Raises:
            NumericalError: If the warped box is degenerate or the state overflows
        """
        jac = CameraService.jacobian(t)
        mean = jac @ state.mean
        mean[:2] += t.translation
        if not (mean[2] > 0 and mean[3] > 0):
            raise NumericalError(
                "compensated box is degenerate", aspect=mean[2], height=mean[3]
            )
        cov = np.linalg.multi_dot((jac, state.cov, jac.T))
        return build_state(mean, (cov + cov.T) / 2)

    @staticmethod
    def load_table(path: Optional[Path]) -> TransformTable:
        """
        Load a transform sidecar: `frame,a11,a12,a21,a22,tx,ty` per line

        Args:
            path: Sidecar path; None or a missing file gives an empty table

        Returns:
            TransformTable

        Raises:
            InputError: On a malformed line (with its line number)
        """
        if path is None:
            return TransformTable()
        path = Path(path)
        if not path.exists():
            logger.warning(f"Transform sidecar {path} not found; no camera compensation")
            return TransformTable()
        with open(path, "r", encoding="utf-8") as f:
            return CameraService.parse_table(f, path)

    @staticmethod
    def parse_table(lines: Iterable[str], path: Optional[Path] = None) -> TransformTable:
        transforms: dict[int, AffineTransform] = {}
        for lineno, raw in enumerate(lines, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) != 7:
                raise InputError(f"expected 7 fields, got {len(fields)}", path, lineno)
            try:
                frame = int(fields[0])
                a11, a12, a21, a22, tx, ty = (float(v) for v in fields[1:])
                transform = AffineTransform(
                    a11=a11, a12=a12, a21=a21, a22=a22, tx=tx, ty=ty
                )
            except ValueError as e:
                # ValidationError is a ValueError subclass
                detail = e.errors()[0]["msg"] if isinstance(e, ValidationError) else e
                raise InputError(f"invalid transform: {detail}", path, lineno) from e
            if frame in transforms:
                raise InputError(f"duplicate transform for frame {frame}", path, lineno)
            transforms[frame] = transform
        return TransformTable(transforms)
