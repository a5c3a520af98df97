"""Detection-log ingestion: parse, validate, and filter per-frame vehicle detections.

Log format is line-delimited JSON, one frame per line:

    {"frame": "f000001", "ts": "2026-01-01T08:00:00", "dets":
        [{"cx": 10.0, "cy": 20.0, "w": 5.0, "h": 5.0, "cls": "car", "conf": 0.9}]}

``ts`` is optional.  All coordinates are original-image pixels.
"""

import json
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Union

from .errors import ValidationError
from .geometry import Point2


class DetectionLogParseError(ValueError):
    """Malformed detection-log record; ``line`` is the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Detection:
    """One vehicle bounding box: center, size, class label, confidence."""

    center: Point2
    width: float
    height: float
    class_label: str
    confidence: float

    def __post_init__(self):
        if not (math.isfinite(self.width) and self.width > 0):
            raise ValidationError("width", f"width must be > 0, got {self.width!r}")
        if not (math.isfinite(self.height) and self.height > 0):
            raise ValidationError("height", f"height must be > 0, got {self.height!r}")
        if not (math.isfinite(self.confidence) and 0.0 <= self.confidence <= 1.0):
            raise ValidationError(
                "confidence", f"confidence must be in [0, 1], got {self.confidence!r}"
            )


@dataclass(frozen=True)
class FrameDetections:
    frame_id: str
    detections: tuple[Detection, ...] = ()
    timestamp: Union[str, None] = None

    def __post_init__(self):
        if not self.frame_id:
            raise ValidationError("frame_id", "frame_id must be non-empty")
        object.__setattr__(self, "detections", tuple(self.detections))


@dataclass(frozen=True)
class DetectionFilter:
    """Class allow-list plus confidence floor. The confidence test is inclusive."""

    allowed_classes: frozenset = field(default_factory=lambda: frozenset({"car", "truck"}))
    min_confidence: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "allowed_classes", frozenset(self.allowed_classes))
        if not self.allowed_classes:
            raise ValidationError("allowed_classes", "allowed_classes must be non-empty")
        if not (math.isfinite(self.min_confidence) and 0.0 <= self.min_confidence <= 1.0):
            raise ValidationError(
                "min_confidence", f"min_confidence must be in [0, 1], got {self.min_confidence!r}"
            )

    def keeps(self, det: Detection) -> bool:
        return det.class_label in self.allowed_classes and det.confidence >= self.min_confidence


def _number(record: dict, key: str, line: int) -> float:
    try:
        value = record[key]
    except KeyError:
        raise DetectionLogParseError(line, f'missing detection field "{key}"') from None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DetectionLogParseError(line, f'detection field "{key}" must be a number')
    return float(value)


def parse_detections(source: Union[IO[str], IO[bytes], str, bytes]) -> list[FrameDetections]:
    """Parse a detection log into frames, preserving record and detection order.

    Malformed records raise :class:`DetectionLogParseError` with the line
    number; invariant violations raise :class:`ValidationError` naming the
    field.  Blank lines are ignored.
    """
    if isinstance(source, (str, bytes)):
        data = source
    else:
        data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")

    frames = []
    for line_no, line in enumerate(data.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DetectionLogParseError(line_no, f"invalid JSON ({exc.msg})") from exc
        if not isinstance(record, dict):
            raise DetectionLogParseError(line_no, "record must be a JSON object")
        frame_id = record.get("frame")
        if not isinstance(frame_id, str) or not frame_id:
            raise DetectionLogParseError(line_no, '"frame" must be a non-empty string')
        ts = record.get("ts")
        if ts is not None and not isinstance(ts, str):
            raise DetectionLogParseError(line_no, '"ts" must be a string when present')
        dets_raw = record.get("dets", [])
        if not isinstance(dets_raw, list):
            raise DetectionLogParseError(line_no, '"dets" must be a list')
        dets = []
        for entry in dets_raw:
            if not isinstance(entry, dict):
                raise DetectionLogParseError(line_no, "detection entries must be objects")
            cls = entry.get("cls")
            if not isinstance(cls, str):
                raise DetectionLogParseError(line_no, '"cls" must be a string')
            cx = _number(entry, "cx", line_no)
            cy = _number(entry, "cy", line_no)
            try:
                dets.append(
                    Detection(
                        center=Point2(cx, cy),
                        width=_number(entry, "w", line_no),
                        height=_number(entry, "h", line_no),
                        class_label=cls,
                        confidence=_number(entry, "conf", line_no),
                    )
                )
            except ValidationError as exc:
                raise ValidationError(exc.field, f"line {line_no}: {exc}") from exc
        frames.append(FrameDetections(frame_id=frame_id, detections=tuple(dets), timestamp=ts))
    return frames


def serialize_detections(frames: Iterable[FrameDetections]) -> str:
    """Inverse of :func:`parse_detections` for valid frame lists."""
    lines = []
    for frame in frames:
        record = {
            "frame": frame.frame_id,
            "dets": [
                {
                    "cx": d.center.x,
                    "cy": d.center.y,
                    "w": d.width,
                    "h": d.height,
                    "cls": d.class_label,
                    "conf": d.confidence,
                }
                for d in frame.detections
            ],
        }
        if frame.timestamp is not None:
            record["ts"] = frame.timestamp
        lines.append(json.dumps(record, sort_keys=True))
    return "\n".join(lines) + ("\n" if lines else "")


def filter_detections(
    frames: Iterable[FrameDetections], det_filter: DetectionFilter
) -> list[FrameDetections]:
    """Keep detections passing the class/confidence filter.

    Frames that end up empty are retained: the frame count feeds the
    clustering min-points default and must reflect elapsed capture time.
    """
    return [
        FrameDetections(
            frame_id=f.frame_id,
            detections=tuple(d for d in f.detections if det_filter.keeps(d)),
            timestamp=f.timestamp,
        )
        for f in frames
    ]
