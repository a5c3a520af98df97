"""Slot detection: bird's-eye transform, clustering, spread filtering, back-projection.

Pipeline order: pool all detection centers, map them through the configured
homography, normalize the cloud, run DBSCAN, compute per-cluster stats,
drop spread outliers with the IQR rule, keep the ``n_bottom``
smallest-spread candidates, and back-project each surviving cluster mean
with the inverse homography.  Slot areas are the mean member bounding-box
sizes in original-view pixels.
"""

import json
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence, Union

import numpy as np

from .clustering import NOISE, DbscanParams, cluster_stats, dbscan
from .detections import FrameDetections
from .errors import ValidationError
from .geometry import (
    Box,
    Homography,
    Point2,
    apply_homography,
    apply_homography_array,
    invert_homography,
    normalize_point_cloud,
)

# Defaults used when the config leaves DBSCAN parameters unset.  eps is in
# normalized bird's-eye units (cloud longest side = 1000); min_points scales
# with the frame count because a slot must be occupied in enough frames to
# form a dense cluster.
DEFAULT_EPS = 15.0
MIN_POINTS_FLOOR = 3
MIN_POINTS_FRAME_FRACTION = 0.10


class EmptyInputError(ValueError):
    """No detections at all across the input frames."""


@dataclass(frozen=True)
class SlotDetectionConfig:
    n_bottom: int
    homography: Homography = field(default_factory=Homography.identity)
    eps: Union[float, None] = None
    min_points: Union[int, None] = None
    iqr_one_sided: bool = False

    def __post_init__(self):
        if int(self.n_bottom) != self.n_bottom or self.n_bottom < 1:
            raise ValidationError("n_bottom", f"n_bottom must be >= 1, got {self.n_bottom!r}")
        if self.eps is not None and not (math.isfinite(self.eps) and self.eps > 0):
            raise ValidationError("eps", f"eps must be finite and > 0, got {self.eps!r}")
        if self.min_points is not None and self.min_points < 1:
            raise ValidationError("min_points", f"min_points must be >= 1, got {self.min_points!r}")


@dataclass(frozen=True)
class SlotCandidate:
    cluster_id: int
    center_birdseye: Point2
    spread: float
    member_count: int
    mean_width: float
    mean_height: float


@dataclass(frozen=True)
class ParkingSlot:
    slot_id: int
    center: Point2
    area: Box
    source_candidate: SlotCandidate


@dataclass(frozen=True, eq=False)
class SlotDetectionOutcome:
    """Slots plus the diagnostics and plot-ready intermediates the CLI reports."""

    slots: tuple[ParkingSlot, ...]
    cluster_count: int
    noise_points: int
    iqr_discarded: int
    shortfall: bool
    eps: float
    min_points: int
    normalized_points: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))
    labels: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    candidates: tuple[SlotCandidate, ...] = ()
    kept_by_iqr: frozenset = frozenset()


def default_min_points(frame_count: int) -> int:
    return max(MIN_POINTS_FLOOR, math.ceil(MIN_POINTS_FRAME_FRACTION * frame_count))


def _quantile(sorted_values: Sequence[float], q: float) -> float:
    # Linear interpolation at fractional position q * (n - 1).
    pos = q * (len(sorted_values) - 1)
    lo = math.floor(pos)
    frac = pos - lo
    if frac == 0.0:
        return float(sorted_values[lo])
    return float(sorted_values[lo] + (sorted_values[lo + 1] - sorted_values[lo]) * frac)


def iqr_filter(values: Sequence[float], one_sided: bool = False) -> set[int]:
    """Indices of values inside [Q1 - 1.5*IQR, Q3 + 1.5*IQR] (closed interval).

    With ``one_sided`` only the upper fence applies, so unusually small
    values survive.
    """
    if len(values) == 0:
        raise ValueError("values must be non-empty")
    ordered = sorted(values)
    q1 = _quantile(ordered, 0.25)
    q3 = _quantile(ordered, 0.75)
    iqr = q3 - q1
    lo = q1 - 1.5 * iqr
    hi = q3 + 1.5 * iqr
    return {
        i
        for i, v in enumerate(values)
        if v <= hi and (one_sided or v >= lo)
    }


def select_n_bottom(
    candidates: Sequence[SlotCandidate], n_bottom: int
) -> tuple[list[SlotCandidate], bool]:
    """The ``n_bottom`` smallest-spread candidates, plus a shortfall flag.

    Ties on spread are broken by larger member count, then smaller cluster
    id, so the ranking is a strict order.
    """
    ranked = sorted(candidates, key=lambda c: (c.spread, -c.member_count, c.cluster_id))
    return ranked[:n_bottom], len(candidates) < n_bottom


def run_slot_detection(
    frames: Sequence[FrameDetections], config: SlotDetectionConfig
) -> SlotDetectionOutcome:
    pooled = [
        (d.center.x, d.center.y, d.width, d.height)
        for f in frames
        for d in f.detections
    ]
    if not pooled:
        raise EmptyInputError("no detections in any input frame")
    # Canonical point order: downstream means and cluster ids then depend
    # only on the multiset of detections, not on frame ordering.
    pooled.sort()
    arr = np.array(pooled, dtype=float)
    centers, widths, heights = arr[:, :2], arr[:, 2], arr[:, 3]

    birdseye = apply_homography_array(config.homography, centers)
    normalized, scale, offset = normalize_point_cloud(birdseye)

    eps = DEFAULT_EPS if config.eps is None else float(config.eps)
    min_points = (
        default_min_points(len(frames)) if config.min_points is None else int(config.min_points)
    )
    assignment = dbscan(normalized, DbscanParams(eps=eps, min_points=min_points))
    noise_points = int((assignment.labels == NOISE).sum())

    if assignment.k == 0:
        return SlotDetectionOutcome(
            slots=(),
            cluster_count=0,
            noise_points=noise_points,
            iqr_discarded=0,
            shortfall=True,
            eps=eps,
            min_points=min_points,
            normalized_points=normalized,
            labels=assignment.labels,
        )

    candidates = []
    for st in cluster_stats(normalized, assignment):
        members = np.array(st.member_indices)
        candidates.append(
            SlotCandidate(
                cluster_id=st.cluster_id,
                center_birdseye=Point2(
                    st.mean.x / scale + offset.x, st.mean.y / scale + offset.y
                ),
                spread=st.spread,
                member_count=len(members),
                mean_width=float(widths[members].mean()),
                mean_height=float(heights[members].mean()),
            )
        )

    kept = iqr_filter([c.spread for c in candidates], one_sided=config.iqr_one_sided)
    survivors = [c for i, c in enumerate(candidates) if i in kept]
    selected, shortfall = select_n_bottom(survivors, config.n_bottom)

    inverse = invert_homography(config.homography)
    slots = []
    for slot_id, cand in enumerate(selected):
        if cand.member_count < min_points:
            raise AssertionError(
                f"cluster {cand.cluster_id} has {cand.member_count} members < min_points {min_points}"
            )
        center = apply_homography(inverse, cand.center_birdseye)
        slots.append(
            ParkingSlot(
                slot_id=slot_id,
                center=center,
                area=Box(center.x, center.y, cand.mean_width, cand.mean_height),
                source_candidate=cand,
            )
        )
    return SlotDetectionOutcome(
        slots=tuple(slots),
        cluster_count=assignment.k,
        noise_points=noise_points,
        iqr_discarded=len(candidates) - len(survivors),
        shortfall=shortfall,
        eps=eps,
        min_points=min_points,
        normalized_points=normalized,
        labels=assignment.labels,
        candidates=tuple(candidates),
        kept_by_iqr=frozenset(kept),
    )


def detect_slots(
    frames: Sequence[FrameDetections], config: SlotDetectionConfig
) -> list[ParkingSlot]:
    return list(run_slot_detection(frames, config).slots)


# --- slot registry file --------------------------------------------------

def slot_registry_document(slots: Iterable[ParkingSlot], config_echo: dict) -> dict:
    return {
        "slots": [
            {
                "id": s.slot_id,
                "cx": s.center.x,
                "cy": s.center.y,
                "w": s.area.w,
                "h": s.area.h,
                "spread": s.source_candidate.spread,
                "members": s.source_candidate.member_count,
            }
            for s in slots
        ],
        "config_echo": config_echo,
    }


def write_slot_registry(stream: IO[str], slots: Iterable[ParkingSlot], config_echo: dict) -> None:
    json.dump(slot_registry_document(slots, config_echo), stream, sort_keys=True, indent=2)
    stream.write("\n")


@dataclass(frozen=True)
class RegistrySlot:
    """One slot as stored in a registry file."""

    slot_id: int
    area: Box
    spread: float
    members: int

    @property
    def center(self) -> Point2:
        return Point2(self.area.cx, self.area.cy)


def read_slot_registry(stream: IO[str]) -> list[RegistrySlot]:
    doc = json.load(stream)
    if not isinstance(doc, dict) or "slots" not in doc:
        raise ValidationError("slots", 'slot registry must be an object with a "slots" list')
    out = []
    for entry in doc["slots"]:
        out.append(
            RegistrySlot(
                slot_id=int(entry["id"]),
                area=Box(float(entry["cx"]), float(entry["cy"]), float(entry["w"]), float(entry["h"])),
                spread=float(entry.get("spread", 0.0)),
                members=int(entry.get("members", 0)),
            )
        )
    return out
