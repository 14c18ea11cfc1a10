"""VisDrone MOT text files and sidecar storage"""

from collections import defaultdict
from pathlib import Path
from typing import Iterable, Literal, Optional

import numpy as np
from pydantic import ValidationError

from src.errors import InputError
from src.models import AffineTransform, Box, Detection, TrackEntry, Trajectory

VoteMode = Literal["none", "hard", "soft"]


def format_number(value: float) -> str:
    """Lossless text: integral values without decimals, others via repr"""
    value = float(value)
    if value.is_integer():
        return str(int(value))
    return repr(value)


def _validation_detail(e: ValidationError) -> str:
    err = e.errors()[0]
    loc = ".".join(str(p) for p in err["loc"])
    return f"{loc}: {err['msg']}" if loc else err["msg"]


class StorageService:
    """Read and write detection, result and sidecar files"""

    @staticmethod
    def read_detections(path: Path) -> list[Detection]:
        """
        Read a VisDrone detection file

        Rows are `frame,target_id,left,top,width,height,score,category,
        truncation,occlusion`; target_id is ignored. det_idx is the row's
        ordinal within its frame.

        Args:
            path: Detection file

        Returns:
            Detections in file order

        Raises:
            InputError: On a malformed line or decreasing frame numbers
        """
        path = Path(path)
        if not path.exists():
            raise InputError("detection file not found", path)
        with open(path, "r", encoding="utf-8") as f:
            return StorageService.parse_detections(f, path)

    @staticmethod
    def parse_detections(
        lines: Iterable[str], path: Optional[Path] = None
    ) -> list[Detection]:
        detections: list[Detection] = []
        per_frame: dict[int, int] = defaultdict(int)
        last_frame = 0
        for lineno, raw in enumerate(lines, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = StorageService._split_row(line, path, lineno)
            try:
                frame = int(fields[0])
                box = Box(
                    left=float(fields[2]),
                    top=float(fields[3]),
                    width=float(fields[4]),
                    height=float(fields[5]),
                )
                detection = Detection(
                    frame=frame,
                    box=box,
                    score=float(fields[6]),
                    class_id=int(fields[7]),
                    det_idx=per_frame[frame],
                )
            except ValidationError as e:
                raise InputError(_validation_detail(e), path, lineno) from e
            except ValueError as e:
                raise InputError(f"malformed number: {e}", path, lineno) from e
            if frame < last_frame:
                raise InputError(
                    f"frame {frame} follows frame {last_frame}; rows must be sorted",
                    path,
                    lineno,
                )
            last_frame = frame
            per_frame[frame] += 1
            detections.append(detection)
        return detections

    @staticmethod
    def read_results(
        path: Path,
        rough_classes: dict[int, str],
        split_classes: bool = False,
    ) -> list[Trajectory]:
        """
        Read a result or ground-truth file into trajectories

        Args:
            path: VisDrone result file
            rough_classes: Fine -> rough class map
            split_classes: Group rows by (id, category) instead of id

        Returns:
            Trajectories ordered by (id, category)

        Raises:
            InputError: On a malformed line
        """
        path = Path(path)
        if not path.exists():
            raise InputError("result file not found", path)
        with open(path, "r", encoding="utf-8") as f:
            return StorageService.parse_results(f, rough_classes, split_classes, path)

    @staticmethod
    def parse_results(
        lines: Iterable[str],
        rough_classes: dict[int, str],
        split_classes: bool = False,
        path: Optional[Path] = None,
    ) -> list[Trajectory]:
        groups: dict[tuple[int, int], dict[int, list[TrackEntry]]] = defaultdict(
            lambda: defaultdict(list)
        )
        for lineno, raw in enumerate(lines, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = StorageService._split_row(line, path, lineno)
            try:
                track_id = int(fields[1])
                entry = TrackEntry(
                    frame=int(fields[0]),
                    box=Box(
                        left=float(fields[2]),
                        top=float(fields[3]),
                        width=float(fields[4]),
                        height=float(fields[5]),
                    ),
                    score=float(fields[6]),
                    class_id=int(fields[7]),
                )
            except ValidationError as e:
                raise InputError(_validation_detail(e), path, lineno) from e
            except ValueError as e:
                raise InputError(f"malformed number: {e}", path, lineno) from e
            key = (track_id, entry.class_id if split_classes else 0)
            rows = groups[key][entry.frame]
            if split_classes and rows:
                raise InputError(
                    f"duplicate row for id {track_id}, class {entry.class_id}, "
                    f"frame {entry.frame}",
                    path,
                    lineno,
                )
            rows.append(entry)

        trajectories = []
        for (track_id, _), frames in sorted(groups.items()):
            entries = [
                StorageService._merge_rows(rows) for _, rows in sorted(frames.items())
            ]
            votes = StorageService._row_votes(frames) if not split_classes else []
            label = entries[0].class_id
            trajectories.append(
                Trajectory(
                    id=track_id,
                    entries=entries,
                    rough_class=rough_classes.get(label, str(label)),
                    class_votes=votes,
                )
            )
        return trajectories

    @staticmethod
    def _merge_rows(rows: list[TrackEntry]) -> TrackEntry:
        """Collapse per-class rows of one frame back into one entry"""
        if len(rows) == 1:
            return rows[0]
        best = min(rows, key=lambda e: (-e.score, e.class_id))
        return best.model_copy(update={"score": float(sum(e.score for e in rows))})

    @staticmethod
    def _row_votes(frames: dict[int, list[TrackEntry]]) -> list[tuple[int, float]]:
        """Votes implied by per-class rows; empty when every frame has one row"""
        if all(len(rows) == 1 for rows in frames.values()):
            return []
        totals: dict[int, float] = defaultdict(float)
        for rows in frames.values():
            for e in rows:
                totals[e.class_id] += e.score
        norm = sum(totals.values())
        if norm <= 0:
            return []
        return [(c, totals[c] / norm) for c in sorted(totals)]

    @staticmethod
    def result_rows(
        trajectories: list[Trajectory], vote_mode: VoteMode = "none"
    ) -> list[tuple]:
        """
        Expand trajectories into sortable result rows

        With vote_mode none every entry is one row with its own class and raw
        score; otherwise each voted class is emitted as its own rows with
        score * weight.
        """
        rows = []
        for traj in trajectories:
            if vote_mode == "none" or not traj.class_votes:
                for e in traj.entries:
                    rows.append((e.frame, traj.id, e.class_id, e.box, e.score))
                continue
            for class_id, weight in traj.class_votes:
                for e in traj.entries:
                    rows.append((e.frame, traj.id, class_id, e.box, e.score * weight))
        rows.sort(key=lambda r: (r[0], r[1], r[2]))
        return rows

    @staticmethod
    def format_results(
        trajectories: list[Trajectory], vote_mode: VoteMode = "none"
    ) -> str:
        lines = []
        for frame, track_id, class_id, box, score in StorageService.result_rows(
            trajectories, vote_mode
        ):
            lines.append(
                ",".join(
                    [
                        str(frame),
                        str(track_id),
                        *(format_number(v) for v in box.as_tuple()),
                        format_number(score),
                        str(class_id),
                        "-1",
                        "-1",
                    ]
                )
            )
        return "".join(line + "\n" for line in lines)

    @staticmethod
    def write_results(
        path: Path, trajectories: list[Trajectory], vote_mode: VoteMode = "none"
    ) -> str:
        """
        Write trajectories in the VisDrone result format

        Args:
            path: Output file
            trajectories: Trajectories to write
            vote_mode: none, hard or soft class-vote expansion

        Returns:
            File path as string
        """
        return StorageService._write_text(
            path, StorageService.format_results(trajectories, vote_mode)
        )

    @staticmethod
    def write_ground_truth(path: Path, trajectories: list[Trajectory]) -> str:
        """Write annotations: score column 1, truncation and occlusion 0"""
        lines = []
        for frame, track_id, class_id, box, _ in StorageService.result_rows(
            trajectories
        ):
            values = ",".join(format_number(v) for v in box.as_tuple())
            lines.append(f"{frame},{track_id},{values},1,{class_id},0,0\n")
        return StorageService._write_text(path, "".join(lines))

    @staticmethod
    def write_detections(path: Path, detections: list[Detection]) -> str:
        """Write detections in frame order with target_id -1"""
        lines = []
        for d in sorted(detections, key=lambda d: (d.frame, d.det_idx)):
            values = ",".join(format_number(v) for v in d.box.as_tuple())
            lines.append(
                f"{d.frame},-1,{values},{format_number(d.score)},{d.class_id},-1,-1\n"
            )
        return StorageService._write_text(path, "".join(lines))

    @staticmethod
    def write_embeddings(
        path: Path, dim: int, vectors: dict[tuple[int, int], np.ndarray]
    ) -> str:
        """Write the embedding sidecar: `dim=D` header then one line per key"""
        lines = [f"dim={dim}\n"]
        for (frame, det_idx), values in sorted(vectors.items()):
            numbers = ",".join(format_number(v) for v in values)
            lines.append(f"{frame},{det_idx},{numbers}\n")
        return StorageService._write_text(path, "".join(lines))

    @staticmethod
    def write_transforms(path: Path, transforms: dict[int, AffineTransform]) -> str:
        """Write the transform sidecar: `frame,a11,a12,a21,a22,tx,ty`"""
        lines = []
        for frame, t in sorted(transforms.items()):
            numbers = ",".join(
                format_number(v) for v in (t.a11, t.a12, t.a21, t.a22, t.tx, t.ty)
            )
            lines.append(f"{frame},{numbers}\n")
        return StorageService._write_text(path, "".join(lines))

    @staticmethod
    def write_report(path: Path, values: dict[str, float | int]) -> str:
        """Write a machine-readable key=value report"""
        lines = [f"{key}={value}\n" for key, value in values.items()]
        return StorageService._write_text(path, "".join(lines))

    @staticmethod
    def _split_row(line: str, path: Optional[Path], lineno: int) -> list[str]:
        fields = [f.strip() for f in line.split(",")]
        if len(fields) < 8:
            raise InputError(
                f"expected at least 8 comma-separated fields, got {len(fields)}",
                path,
                lineno,
            )
        return fields

    @staticmethod
    def _write_text(path: Path, text: str) -> str:
        path = Path(path)
        # Ensure directory exists
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        return str(path)
