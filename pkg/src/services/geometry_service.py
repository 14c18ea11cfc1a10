"""Box and tube overlap"""

import numpy as np

from src.models import Box, Trajectory


class GeometryService:
    """Spatial IoU between boxes and volume IoU between trajectories"""

    @staticmethod
    def box_iou(a: Box, b: Box) -> float:
        """
        Intersection over union of two boxes

        Args:
            a: First box
            b: Second box

        Returns:
            Ratio in [0, 1]
        """
        iw = min(a.right, b.right) - max(a.left, b.left)
        ih = min(a.bottom, b.bottom) - max(a.top, b.top)
        if iw <= 0 or ih <= 0:
            return 0.0
        inter = iw * ih
        return inter / (a.area + b.area - inter)

    @staticmethod
    def iou_matrix(boxes_a: np.ndarray, boxes_b: np.ndarray) -> np.ndarray:
        """
        Pairwise IoU of (N, 4) and (M, 4) arrays in (left, top, width, height)

        Returns:
            (N, M) IoU matrix
        """
        if len(boxes_a) == 0 or len(boxes_b) == 0:
            return np.zeros((len(boxes_a), len(boxes_b)))
        a_tl, a_br = boxes_a[:, None, :2], boxes_a[:, None, :2] + boxes_a[:, None, 2:]
        b_tl, b_br = boxes_b[None, :, :2], boxes_b[None, :, :2] + boxes_b[None, :, 2:]
        wh = np.clip(np.minimum(a_br, b_br) - np.maximum(a_tl, b_tl), 0.0, None)
        inter = wh[..., 0] * wh[..., 1]
        area_a = boxes_a[:, 2] * boxes_a[:, 3]
        area_b = boxes_b[:, 2] * boxes_b[:, 3]
        return inter / (area_a[:, None] + area_b[None, :] - inter)

    @staticmethod
    def tube_iou(ti: Trajectory, tj: Trajectory) -> float:
        """
        Temporal IoU: summed intersection over summed union across the frame union

        A frame covered by only one trajectory adds that box's area to the
        denominator and nothing to the numerator.

        Args:
            ti: First trajectory
            tj: Second trajectory

        Returns:
            Ratio in [0, 1]
        """
        boxes_i = {e.frame: e.box for e in ti.entries}
        boxes_j = {e.frame: e.box for e in tj.entries}
        inter_total = 0.0
        union_total = 0.0
        for frame in sorted(boxes_i.keys() | boxes_j.keys()):
            a, b = boxes_i.get(frame), boxes_j.get(frame)
            if a is None or b is None:
                union_total += (a or b).area
                continue
            inter = GeometryService._intersection(a, b)
            inter_total += inter
            union_total += a.area + b.area - inter
        if union_total <= 0:
            return 0.0
        return inter_total / union_total

    @staticmethod
    def _intersection(a: Box, b: Box) -> float:
        iw = min(a.right, b.right) - max(a.left, b.left)
        ih = min(a.bottom, b.bottom) - max(a.top, b.top)
        if iw <= 0 or ih <= 0:
            return 0.0
        return iw * ih
