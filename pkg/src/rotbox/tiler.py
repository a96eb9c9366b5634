"""Sliding-window tiling of large scenes and merging of per-tile detections.

Windows are tile_h x tile_w with stride ``round(tile * (1 - overlap))`` in
each axis; the final row/column window is clamped flush with the scene edge
so the scene is fully covered.  Coordinates are x = column, y = row with the
origin at the top-left.  Merging translates per-tile detections into scene
coordinates, concatenates them and runs one global rotated NMS.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError, ValidationError
from .evaluator import Detection
from .geom import HRect, RotatedBox
from .nms import ScoredBox, rotated_nms

# Per-channel means subtracted from BGR image tensors before inference.
CHANNEL_MEANS = (103.939, 116.779, 123.68)


@dataclass(frozen=True)
class PreprocessConfig:
    """Documented preprocessing constants (mean subtraction, flip augmentation)."""

    channel_means: tuple[float, float, float] = CHANNEL_MEANS
    random_flip: bool = False

    def __post_init__(self):
        if len(self.channel_means) != 3:
            raise ConfigError(f"expected 3 channel means, got {len(self.channel_means)}")


@dataclass(frozen=True)
class TileSpec:
    scene_h: int
    scene_w: int
    tile_h: int = 600
    tile_w: int = 1000
    overlap_fraction: float = 0.1

    def __post_init__(self):
        if self.scene_h <= 0 or self.scene_w <= 0:
            raise ConfigError(f"non-positive scene {self.scene_h}x{self.scene_w}")
        if self.tile_h <= 0 or self.tile_w <= 0:
            raise ConfigError(f"non-positive tile {self.tile_h}x{self.tile_w}")
        if not (0.0 <= self.overlap_fraction < 1.0):
            raise ConfigError(f"overlap_fraction {self.overlap_fraction} outside [0, 1)")


def _axis_origins(scene: int, tile: int, overlap: float) -> list[int]:
    if scene <= tile:
        return [0]
    stride = max(1, round(tile * (1.0 - overlap)))
    origins = []
    pos = 0
    while True:
        if pos + tile >= scene:
            origins.append(scene - tile)
            break
        origins.append(pos)
        pos += stride
    return origins


def plan_tiles(spec: TileSpec) -> list[HRect]:
    """Tile windows in row-major order (rows outer, columns inner)."""
    tile_h = min(spec.tile_h, spec.scene_h)
    tile_w = min(spec.tile_w, spec.scene_w)
    ys = _axis_origins(spec.scene_h, tile_h, spec.overlap_fraction)
    xs = _axis_origins(spec.scene_w, tile_w, spec.overlap_fraction)
    return [HRect(x, y, x + tile_w, y + tile_h) for y in ys for x in xs]


def to_scene_coords(det: Detection, window: HRect) -> Detection:
    """Translate a tile-local detection into scene coordinates."""
    b = det.box
    return Detection(
        RotatedBox(b.x + window.xmin, b.y + window.ymin, b.w, b.h, b.theta),
        det.score,
        det.image_id,
    )


def merge_scene(
    per_tile_detections: list[list[Detection]],
    windows: list[HRect],
    nms_iou: float = 0.3,
) -> list[Detection]:
    """Scene-level detections after translation and one global rotated NMS."""
    if len(per_tile_detections) != len(windows):
        raise ValidationError(
            f"{len(per_tile_detections)} detection lists for {len(windows)} windows"
        )
    translated: list[Detection] = []
    for dets, window in zip(per_tile_detections, windows):
        translated.extend(to_scene_coords(d, window) for d in dets)
    scored = [ScoredBox(d.box, d.score, i) for i, d in enumerate(translated)]
    keep = rotated_nms(scored, nms_iou, pre_topk=None, post_topk=None)
    return [translated[i] for i in keep]
