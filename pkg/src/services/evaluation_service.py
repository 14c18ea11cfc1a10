"""Trajectory-level mAP evaluation"""

from typing import Optional

import numpy as np
from loguru import logger

from src.errors import InputError
from src.models import EvalReport, Trajectory
from src.services.geometry_service import GeometryService
from src.services.storage_service import format_number

DEFAULT_THRESHOLDS = [0.25, 0.5, 0.75]


class EvaluationService:
    """Average precision of trajectories over tube-IoU thresholds"""

    @staticmethod
    def evaluate(
        predictions: list[Trajectory],
        ground_truth: list[Trajectory],
        thresholds: Optional[list[float]] = None,
        classes: Optional[list[int]] = None,
    ) -> EvalReport:
        """
        Evaluate predicted trajectories against ground truth

        Per class and threshold, predictions are ranked by mean frame score
        and greedily matched to the unmatched ground-truth trajectory with
        the highest tube IoU; a match counts when the IoU reaches the
        threshold. AP integrates the full precision envelope.

        Args:
            predictions: Predicted trajectories, one class each (label)
            ground_truth: Annotated trajectories
            thresholds: Tube-IoU thresholds, default 0.25, 0.5 and 0.75
            classes: Classes to evaluate; other trajectories are ignored

        Returns:
            EvalReport with mAP over ground-truth classes and thresholds

        Raises:
            InputError: If no ground-truth trajectory remains
        """
        thresholds = [float(t) for t in (thresholds or DEFAULT_THRESHOLDS)]
        gt_by_class = EvaluationService._by_class(ground_truth, classes)
        if not gt_by_class:
            raise InputError("ground truth has no trajectories of evaluated classes")
        pred_by_class = EvaluationService._by_class(predictions, classes)

        ap: dict[int, dict[float, float]] = {}
        matched: dict[int, dict[float, int]] = {}
        missed: dict[int, dict[float, int]] = {}
        for class_id, gts in sorted(gt_by_class.items()):
            preds = sorted(
                pred_by_class.get(class_id, []), key=lambda t: (-t.mean_score, t.id)
            )
            overlaps = np.array(
                [[GeometryService.tube_iou(p, g) for g in gts] for p in preds]
            ).reshape(len(preds), len(gts))
            ap[class_id], matched[class_id], missed[class_id] = {}, {}, {}
            for threshold in thresholds:
                hits = EvaluationService._greedy_match(overlaps, threshold)
                ap[class_id][threshold] = EvaluationService.average_precision(
                    hits, len(gts)
                )
                matched[class_id][threshold] = int(hits.sum())
                missed[class_id][threshold] = len(gts) - int(hits.sum())

        values = [ap[c][t] for c in ap for t in thresholds]
        report = EvalReport(
            thresholds=thresholds,
            ap=ap,
            matched=matched,
            missed=missed,
            mAP=float(np.mean(values)),
        )
        logger.info(
            f"Evaluated {len(predictions)} predictions against "
            f"{sum(len(g) for g in gt_by_class.values())} ground-truth trajectories: "
            f"mAP {report.mAP:.4f}"
        )
        return report

    @staticmethod
    def average_precision(hits: np.ndarray, num_gt: int) -> float:
        """
        All-points AP of a ranked hit list

        Every true positive adds 1/num_gt recall at the best precision
        reachable from its rank onward.
        """
        if num_gt == 0 or len(hits) == 0:
            return 0.0
        tp = np.cumsum(hits)
        precision = tp / np.arange(1, len(hits) + 1)
        envelope = np.maximum.accumulate(precision[::-1])[::-1]
        return float(np.sum(envelope[hits.astype(bool)]) / num_gt)

    @staticmethod
    def _greedy_match(overlaps: np.ndarray, threshold: float) -> np.ndarray:
        num_preds, num_gt = overlaps.shape
        hits = np.zeros(num_preds)
        taken = np.zeros(num_gt, dtype=bool)
        for row in range(num_preds):
            if taken.all():
                break
            candidates = np.where(taken, -1.0, overlaps[row])
            best = int(np.argmax(candidates))
            if candidates[best] >= threshold:
                taken[best] = True
                hits[row] = 1.0
        return hits

    @staticmethod
    def _by_class(
        trajectories: list[Trajectory], classes: Optional[list[int]]
    ) -> dict[int, list[Trajectory]]:
        grouped: dict[int, list[Trajectory]] = {}
        for traj in trajectories:
            label = traj.label
            if classes is not None and label not in classes:
                continue
            grouped.setdefault(label, []).append(traj)
        return grouped

    @staticmethod
    def format_table(report: EvalReport) -> str:
        """Human-readable AP table, one row per class"""
        header = ["class"] + [f"AP@{t:g}" for t in report.thresholds] + ["mAP"]
        rows = [header]
        class_map = report.class_map
        for class_id in sorted(report.ap):
            rows.append(
                [str(class_id)]
                + [f"{report.ap[class_id][t]:.4f}" for t in report.thresholds]
                + [f"{class_map[class_id]:.4f}"]
            )
        rows.append(["all"] + [""] * len(report.thresholds) + [f"{report.mAP:.4f}"])
        widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
        return "\n".join(
            "  ".join(cell.rjust(w) for cell, w in zip(row, widths)) for row in rows
        )

    @staticmethod
    def report_values(report: EvalReport) -> dict[str, float | int]:
        """Flat key=value view: mAP, mAP.<class>, AP/matched/missed.<class>.<thr>"""
        values: dict[str, float | int] = {"mAP": report.mAP}
        for class_id, value in sorted(report.class_map.items()):
            values[f"mAP.{class_id}"] = value
        for class_id in sorted(report.ap):
            for t in report.thresholds:
                suffix = f"{class_id}.{format_number(t)}"
                values[f"AP.{suffix}"] = report.ap[class_id][t]
                values[f"matched.{suffix}"] = report.matched[class_id][t]
                values[f"missed.{suffix}"] = report.missed[class_id][t]
        return values
