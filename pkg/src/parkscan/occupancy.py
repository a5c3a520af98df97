"""Per-slot occupancy classification through a pluggable classifier contract."""

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import IO, Iterable, Mapping, Sequence, Union

from .errors import ValidationError
from .geometry import Box, box_iou
from .slots import ParkingSlot

DEFAULT_DECISION_THRESHOLD = 0.5
DEFAULT_IOU_THRESHOLD = 0.3


class MissingGroundTruthError(LookupError):
    """The oracle has no ground truth for the queried frame."""


class MissingScoreError(LookupError):
    """The score table has no entry for the queried (frame, slot)."""


class DuplicateRecordError(ValueError):
    """Two occupancy records share the same (frame, slot) key."""


class OccupancyStatus(str, Enum):
    OCCUPIED = "OCCUPIED"
    VACANT = "VACANT"
    ERROR = "ERROR"


@dataclass(frozen=True)
class CropSpec:
    """The image region a classifier should judge: a slot's area in one frame."""

    slot_id: int
    frame_id: str
    region: Box


class ClassifierAdapter:
    """Contract: deterministic probability-of-occupied in [0, 1] per crop."""

    def classify(self, crop: CropSpec) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class OccupancyRecord:
    slot_id: int
    frame_id: str
    score: Union[float, None]
    status: OccupancyStatus
    error: Union[str, None] = None


def classify_frame(
    slots: Sequence[ParkingSlot],
    frame_id: str,
    classifier: ClassifierAdapter,
    threshold: float = DEFAULT_DECISION_THRESHOLD,
) -> list[OccupancyRecord]:
    """One record per slot, in slot order. OCCUPIED iff score >= threshold.

    A classifier failure on one crop yields an ERROR record for that slot
    and leaves the others untouched.
    """
    if not slots:
        raise ValueError("slots must be non-empty")
    if not (0.0 < threshold < 1.0):
        raise ValueError(f"threshold must be in (0, 1), got {threshold!r}")
    records = []
    for slot in slots:
        crop = CropSpec(slot_id=slot.slot_id, frame_id=frame_id, region=slot.area)
        try:
            score = float(classifier.classify(crop))
            if not (math.isfinite(score) and 0.0 <= score <= 1.0):
                raise ValidationError("score", f"classifier returned {score!r}, outside [0, 1]")
        except Exception as exc:
            records.append(
                OccupancyRecord(
                    slot_id=slot.slot_id,
                    frame_id=frame_id,
                    score=None,
                    status=OccupancyStatus.ERROR,
                    error=str(exc),
                )
            )
            continue
        status = OccupancyStatus.OCCUPIED if score >= threshold else OccupancyStatus.VACANT
        records.append(
            OccupancyRecord(slot_id=slot.slot_id, frame_id=frame_id, score=score, status=status)
        )
    return records


class GeometricOracleClassifier(ClassifierAdapter):
    """Scores a crop by its best IoU against the frame's true vehicle boxes.

    Stand-in for an image classifier on simulated data: the score is the raw
    max IoU, and the recommended decision threshold binarizes it.
    """

    def __init__(
        self,
        vehicles_by_frame: Mapping[str, Sequence[Box]],
        iou_threshold: float = DEFAULT_IOU_THRESHOLD,
    ):
        if not (0.0 < iou_threshold < 1.0):
            raise ValueError(f"iou_threshold must be in (0, 1), got {iou_threshold!r}")
        self._vehicles = {k: tuple(v) for k, v in vehicles_by_frame.items()}
        self.decision_threshold = iou_threshold

    def classify(self, crop: CropSpec) -> float:
        try:
            vehicles = self._vehicles[crop.frame_id]
        except KeyError:
            raise MissingGroundTruthError(
                f"no ground truth for frame {crop.frame_id!r}"
            ) from None
        if not vehicles:
            return 0.0
        return max(box_iou(crop.region, v) for v in vehicles)


class FileScoreClassifier(ClassifierAdapter):
    """Replays externally computed scores keyed by (frame, slot)."""

    def __init__(self, table: Mapping[tuple[str, int], float]):
        for key, score in table.items():
            if not (isinstance(score, (int, float)) and 0.0 <= score <= 1.0):
                raise ValidationError(
                    "score", f"score for {key!r} must be in [0, 1], got {score!r}"
                )
        self._table = dict(table)

    @classmethod
    def from_stream(cls, stream: IO[str]) -> "FileScoreClassifier":
        """Load a line-delimited table: {"frame": str, "slot": int, "score": num}."""
        table = {}
        for line_no, line in enumerate(stream.read().splitlines(), start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                key = (str(record["frame"]), int(record["slot"]))
                score = record["score"]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValidationError("score_table", f"line {line_no}: bad record ({exc})") from exc
            table[key] = score
        return cls(table)

    def frames(self) -> list[str]:
        return sorted({frame for frame, _ in self._table})

    def classify(self, crop: CropSpec) -> float:
        try:
            return float(self._table[(crop.frame_id, crop.slot_id)])
        except KeyError:
            raise MissingScoreError(
                f"no score for frame {crop.frame_id!r}, slot {crop.slot_id}"
            ) from None


@dataclass(frozen=True)
class FrameReport:
    occupied: int
    vacant: int
    vacant_slots: tuple[int, ...]
    error_slots: tuple[int, ...] = ()


def aggregate_report(records: Iterable[OccupancyRecord]) -> dict[str, FrameReport]:
    """Per-frame occupancy summary; occupied + vacant + errors cover every slot."""
    seen: set[tuple[str, int]] = set()
    by_frame: dict[str, list[OccupancyRecord]] = {}
    for rec in records:
        key = (rec.frame_id, rec.slot_id)
        if key in seen:
            raise DuplicateRecordError(f"duplicate record for frame {rec.frame_id!r}, slot {rec.slot_id}")
        seen.add(key)
        by_frame.setdefault(rec.frame_id, []).append(rec)

    report = {}
    for frame_id, recs in by_frame.items():
        occupied = sum(1 for r in recs if r.status is OccupancyStatus.OCCUPIED)
        vacant = tuple(sorted(r.slot_id for r in recs if r.status is OccupancyStatus.VACANT))
        errors = tuple(sorted(r.slot_id for r in recs if r.status is OccupancyStatus.ERROR))
        report[frame_id] = FrameReport(
            occupied=occupied, vacant=len(vacant), vacant_slots=vacant, error_slots=errors
        )
    return report


def write_records(stream: IO[str], records: Iterable[OccupancyRecord]) -> None:
    for rec in records:
        stream.write(
            json.dumps(
                {
                    "frame": rec.frame_id,
                    "slot": rec.slot_id,
                    "score": rec.score,
                    "status": rec.status.value,
                },
                sort_keys=True,
            )
        )
        stream.write("\n")


def read_records(stream: IO[str]) -> list[OccupancyRecord]:
    records = []
    for line_no, line in enumerate(stream.read().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
            records.append(
                OccupancyRecord(
                    slot_id=int(raw["slot"]),
                    frame_id=str(raw["frame"]),
                    score=None if raw["score"] is None else float(raw["score"]),
                    status=OccupancyStatus(raw["status"]),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ValidationError("records", f"line {line_no}: bad record ({exc})") from exc
    return records
