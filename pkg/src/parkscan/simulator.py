"""Deterministic synthetic parking-lot scenarios for end-to-end verification.

A scenario is a rows x cols grid of slots on the ground plane, observed
through a camera homography.  Per frame, each slot is independently
occupied; occupied slots carry a vehicle whose center and size are jittered
by Gaussian noise in ground units before projection to image pixels.
Passing vehicles appear along a lane, and violation sites emit detections
with a much larger positional spread than parked vehicles.

Randomness contract
-------------------
Every random decision comes from a named substream derived with
``numpy.random.SeedSequence((seed, frame_index, stream, *key))``:

* ``(STREAM_SLOT, row, col)`` per slot per frame, drawn in this order:
  occupancy uniform; if occupied: center noise (2 normals), size noise
  (2 normals), miss uniform, then confidence uniform if emitted;
* ``(STREAM_PASSING,)`` per frame: Poisson count, then per vehicle one
  position uniform and one confidence uniform;
* ``(STREAM_VIOLATION, site_index)`` per site per frame: emission uniform;
  if emitted: offset (2 normals) and confidence uniform.

Keying slot streams by (row, col) means growing the grid or adding sites
never perturbs the draws of existing slots, so regression fixtures stay
stable.  Identical seed and config give byte-identical logs.
"""

import json
import math
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import IO, Mapping, Sequence, Union

import numpy as np

from .detections import Detection, FrameDetections
from .errors import ConfigError, ValidationError
from .geometry import Box, Homography, Point2, apply_homography

STREAM_SLOT = 0
STREAM_PASSING = 1
STREAM_VIOLATION = 2

_BASE_TIMESTAMP = datetime(2026, 1, 1, 8, 0, 0)
_SAMPLE_INTERVAL = timedelta(minutes=5)

# Fixed camera presets (ground plane -> image pixels).  The third row's y
# coefficient produces perspective foreshortening: rows farther from the
# camera are compressed, which is exactly the distortion the bird's-eye
# transform must undo.
CAMERA_PRESETS: Mapping[str, tuple[float, ...]] = {
    "identity": (1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0),
    "mild-tilt": (1.0, 0.2, 50.0, 0.0, 1.1, 30.0, 0.0, 0.0008, 1.0),
    "strong-tilt": (1.0, 0.45, 80.0, 0.0, 1.6, 60.0, 0.0, 0.0022, 1.0),
}


@dataclass(frozen=True)
class ViolationSite:
    """A spot where vehicles stop illegally, scattered wider than a slot."""

    x: float
    y: float
    center_spread_sigma: float
    emit_prob: float = 0.5

    def __post_init__(self):
        if self.center_spread_sigma < 0:
            raise ValidationError("center_spread_sigma", "sigma must be >= 0")
        if not 0.0 <= self.emit_prob <= 1.0:
            raise ValidationError("emit_prob", "emit_prob must be in [0, 1]")


@dataclass(frozen=True)
class ScenarioConfig:
    rows: int
    cols: int
    slot_pitch: float
    slot_size: tuple[float, float]
    frame_count: int
    occupancy_prob: float
    center_noise_sigma: float = 0.0
    size_noise_sigma: float = 0.0
    miss_prob: float = 0.0
    passing_rate: float = 0.0
    violation_sites: tuple[ViolationSite, ...] = ()
    camera: Union[str, tuple[float, ...]] = "identity"
    seed: int = 0
    lane_y: Union[float, None] = None

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValidationError("rows", "rows and cols must be >= 1")
        if self.frame_count < 1:
            raise ValidationError("frame_count", "frame_count must be >= 1")
        w, h = self.slot_size
        if w <= 0 or h <= 0:
            raise ValidationError("slot_size", "slot dimensions must be > 0")
        if self.slot_pitch <= max(w, h):
            raise ValidationError(
                "slot_pitch", "pitch must exceed both slot dimensions (no overlap)"
            )
        for name in ("occupancy_prob", "miss_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(name, f"{name} must be in [0, 1]")
        for name in ("center_noise_sigma", "size_noise_sigma", "passing_rate"):
            if getattr(self, name) < 0:
                raise ValidationError(name, f"{name} must be >= 0")
        object.__setattr__(self, "slot_size", (float(w), float(h)))
        object.__setattr__(self, "violation_sites", tuple(self.violation_sites))

    @property
    def slot_count(self) -> int:
        return self.rows * self.cols

    def slot_center_ground(self, row: int, col: int) -> tuple[float, float]:
        return ((col + 0.5) * self.slot_pitch, (row + 0.5) * self.slot_pitch)

    @property
    def effective_lane_y(self) -> float:
        # Default lane runs one pitch below the last slot row.
        if self.lane_y is not None:
            return self.lane_y
        return (self.rows + 1.5) * self.slot_pitch


@dataclass(frozen=True)
class GroundTruth:
    """Slot layout in image coordinates plus per-frame occupancy and vehicles."""

    frame_ids: tuple[str, ...]
    slots: tuple[Box, ...]
    occupancy: tuple[tuple[bool, ...], ...]
    vehicles: tuple[tuple[tuple[Box, str], ...], ...]

    def vehicles_by_frame(self) -> dict[str, list[Box]]:
        return {
            fid: [box for box, _ in frame_vehicles]
            for fid, frame_vehicles in zip(self.frame_ids, self.vehicles)
        }

    def occupancy_by_frame(self) -> dict[str, tuple[bool, ...]]:
        return dict(zip(self.frame_ids, self.occupancy))


def camera_homography(camera: Union[str, Sequence[float]]) -> Homography:
    if isinstance(camera, str):
        try:
            flat = CAMERA_PRESETS[camera]
        except KeyError:
            raise ConfigError(
                f"unknown camera preset {camera!r}; known: {sorted(CAMERA_PRESETS)}"
            ) from None
        return Homography.from_flat(flat)
    return Homography.from_flat(tuple(camera))


def _stream(seed: int, frame_index: int, stream: int, *key: int) -> np.random.Generator:
    entropy = (seed & 0xFFFFFFFFFFFFFFFF, frame_index, stream, *key)
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _project_box(cam: Homography, box: Box) -> Box:
    """Project a ground box to image pixels.

    The center maps exactly; width and height are the distances between the
    projected midpoints of the box's opposite edges, which keeps sizes
    positive and reflects the local perspective scale.
    """
    c = apply_homography(cam, Point2(box.cx, box.cy))
    left = apply_homography(cam, Point2(box.cx - box.w / 2.0, box.cy))
    right = apply_homography(cam, Point2(box.cx + box.w / 2.0, box.cy))
    top = apply_homography(cam, Point2(box.cx, box.cy - box.h / 2.0))
    bottom = apply_homography(cam, Point2(box.cx, box.cy + box.h / 2.0))
    w = math.hypot(right.x - left.x, right.y - left.y)
    h = math.hypot(bottom.x - top.x, bottom.y - top.y)
    return Box(c.x, c.y, w, h)


def _noisy_size(nominal: float, rng_delta: float, floor_fraction: float = 0.2) -> float:
    # Sizes stay positive; the clamp never binds for realistic sigmas.
    return max(nominal + rng_delta, floor_fraction * nominal)


def generate_scenario(config: ScenarioConfig) -> tuple[list[FrameDetections], GroundTruth]:
    cam = camera_homography(config.camera)
    slot_w, slot_h = config.slot_size

    slot_boxes_image = []
    for row in range(config.rows):
        for col in range(config.cols):
            cx, cy = config.slot_center_ground(row, col)
            slot_boxes_image.append(_project_box(cam, Box(cx, cy, slot_w, slot_h)))

    lane_y = config.effective_lane_y
    lane_x_max = config.cols * config.slot_pitch

    frame_ids = []
    frames = []
    occupancy = []
    vehicles_all = []
    for f in range(config.frame_count):
        frame_id = f"f{f:06d}"
        ts = (_BASE_TIMESTAMP + f * _SAMPLE_INTERVAL).isoformat()
        dets: list[Detection] = []
        vehicles: list[tuple[Box, str]] = []
        bits = []

        for row in range(config.rows):
            for col in range(config.cols):
                rng = _stream(config.seed, f, STREAM_SLOT, row, col)
                occupied = rng.random() < config.occupancy_prob
                bits.append(occupied)
                if not occupied:
                    continue
                dx, dy = rng.normal(0.0, config.center_noise_sigma, 2)
                dw, dh = rng.normal(0.0, config.size_noise_sigma, 2)
                cx, cy = config.slot_center_ground(row, col)
                ground_box = Box(
                    cx + dx,
                    cy + dy,
                    _noisy_size(slot_w, dw),
                    _noisy_size(slot_h, dh),
                )
                image_box = _project_box(cam, ground_box)
                vehicles.append((image_box, "parked"))
                missed = rng.random() < config.miss_prob
                if missed:
                    continue
                conf = 0.5 + 0.5 * rng.random()
                dets.append(_detection_from_box(image_box, conf))

        rng_pass = _stream(config.seed, f, STREAM_PASSING)
        for _ in range(rng_pass.poisson(config.passing_rate)):
            x = rng_pass.uniform(0.0, lane_x_max)
            image_box = _project_box(cam, Box(x, lane_y, slot_w, slot_h))
            vehicles.append((image_box, "passing"))
            conf = 0.5 + 0.5 * rng_pass.random()
            dets.append(_detection_from_box(image_box, conf))

        for site_idx, site in enumerate(config.violation_sites):
            rng_v = _stream(config.seed, f, STREAM_VIOLATION, site_idx)
            if rng_v.random() >= site.emit_prob:
                continue
            dx, dy = rng_v.normal(0.0, site.center_spread_sigma, 2)
            image_box = _project_box(cam, Box(site.x + dx, site.y + dy, slot_w, slot_h))
            vehicles.append((image_box, "violation"))
            conf = 0.5 + 0.5 * rng_v.random()
            dets.append(_detection_from_box(image_box, conf))

        frame_ids.append(frame_id)
        frames.append(
            FrameDetections(frame_id=frame_id, detections=tuple(dets), timestamp=ts)
        )
        occupancy.append(tuple(bits))
        vehicles_all.append(tuple(vehicles))

    truth = GroundTruth(
        frame_ids=tuple(frame_ids),
        slots=tuple(slot_boxes_image),
        occupancy=tuple(occupancy),
        vehicles=tuple(vehicles_all),
    )
    return frames, truth


def _detection_from_box(box: Box, confidence: float) -> Detection:
    return Detection(
        center=Point2(box.cx, box.cy),
        width=box.w,
        height=box.h,
        class_label="car",
        confidence=confidence,
    )


# --- ground truth files ---------------------------------------------------

def write_ground_truth_slots(stream: IO[str], truth: GroundTruth) -> None:
    """Slot layout in the slot-registry schema (spread 0, members = frames occupied)."""
    occupied_counts = [0] * len(truth.slots)
    for bits in truth.occupancy:
        for i, bit in enumerate(bits):
            occupied_counts[i] += int(bit)
    doc = {
        "slots": [
            {
                "id": i,
                "cx": box.cx,
                "cy": box.cy,
                "w": box.w,
                "h": box.h,
                "spread": 0.0,
                "members": occupied_counts[i],
            }
            for i, box in enumerate(truth.slots)
        ],
        "config_echo": {"source": "simulator-ground-truth"},
    }
    json.dump(doc, stream, sort_keys=True, indent=2)
    stream.write("\n")


def write_ground_truth_occupancy(stream: IO[str], truth: GroundTruth) -> None:
    """Per-frame record: occupancy bits keyed by slot id plus true vehicle boxes."""
    for fid, bits, vehicles in zip(truth.frame_ids, truth.occupancy, truth.vehicles):
        record = {
            "frame": fid,
            "occupancy": {str(i): bool(b) for i, b in enumerate(bits)},
            "vehicles": [
                {"cx": box.cx, "cy": box.cy, "w": box.w, "h": box.h, "kind": kind}
                for box, kind in vehicles
            ],
        }
        stream.write(json.dumps(record, sort_keys=True))
        stream.write("\n")


def read_ground_truth(slots_stream: IO[str], occupancy_stream: IO[str]) -> GroundTruth:
    slots_doc = json.load(slots_stream)
    slot_entries = sorted(slots_doc["slots"], key=lambda e: int(e["id"]))
    slots = tuple(
        Box(float(e["cx"]), float(e["cy"]), float(e["w"]), float(e["h"]))
        for e in slot_entries
    )
    partial = read_ground_truth_occupancy(occupancy_stream)
    return GroundTruth(
        frame_ids=partial.frame_ids,
        slots=slots,
        occupancy=partial.occupancy,
        vehicles=partial.vehicles,
    )


def read_ground_truth_occupancy(occupancy_stream: IO[str]) -> GroundTruth:
    """Ground truth from the per-frame occupancy file alone (empty slot layout)."""
    frame_ids = []
    occupancy = []
    vehicles = []
    for line_no, line in enumerate(occupancy_stream.read().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            frame_ids.append(str(record["frame"]))
            bits = record["occupancy"]
            occupancy.append(
                tuple(bool(bits[str(i)]) for i in range(len(bits)))
            )
            vehicles.append(
                tuple(
                    (
                        Box(float(v["cx"]), float(v["cy"]), float(v["w"]), float(v["h"])),
                        str(v["kind"]),
                    )
                    for v in record["vehicles"]
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ValidationError("occupancy", f"line {line_no}: bad record ({exc})") from exc
    return GroundTruth(
        frame_ids=tuple(frame_ids),
        slots=(),
        occupancy=tuple(occupancy),
        vehicles=tuple(vehicles),
    )


# --- scenario config file ---------------------------------------------------

def scenario_from_document(doc: Mapping) -> ScenarioConfig:
    """Build a ScenarioConfig from its JSON document (field names mirror the class)."""
    if not isinstance(doc, Mapping):
        raise ConfigError("scenario config must be a JSON object")
    try:
        sites = tuple(
            ViolationSite(
                x=float(s["x"]),
                y=float(s["y"]),
                center_spread_sigma=float(s["center_spread_sigma"]),
                emit_prob=float(s.get("emit_prob", 0.5)),
            )
            for s in doc.get("violation_sites", [])
        )
        camera = doc.get("camera", "identity")
        if isinstance(camera, Mapping):
            camera = tuple(float(v) for v in camera["matrix"])
        elif not isinstance(camera, str):
            camera = tuple(float(v) for v in camera)
        return ScenarioConfig(
            rows=int(doc["rows"]),
            cols=int(doc["cols"]),
            slot_pitch=float(doc["slot_pitch"]),
            slot_size=(float(doc["slot_size"][0]), float(doc["slot_size"][1])),
            frame_count=int(doc["frame_count"]),
            occupancy_prob=float(doc["occupancy_prob"]),
            center_noise_sigma=float(doc.get("center_noise_sigma", 0.0)),
            size_noise_sigma=float(doc.get("size_noise_sigma", 0.0)),
            miss_prob=float(doc.get("miss_prob", 0.0)),
            passing_rate=float(doc.get("passing_rate", 0.0)),
            violation_sites=sites,
            camera=camera,
            seed=int(doc.get("seed", 0)),
            lane_y=None if doc.get("lane_y") is None else float(doc["lane_y"]),
        )
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise ConfigError(f"invalid scenario config: {exc}") from exc
        raise ConfigError(f"bad or missing scenario field: {exc}") from exc
