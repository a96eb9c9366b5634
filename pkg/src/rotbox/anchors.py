"""Rotation-anchor lattice over a feature pyramid.

Each feature-map cell carries one anchor per (aspect ratio, angle) pair.  A
ratio ``p:q`` at scale ``s`` gives sides ``w = s * sqrt(p/q)`` and
``h = s * sqrt(q/p)`` so the area is always ``s**2``.  Anchor centers sit at
``((col + 0.5) * stride, (row + 0.5) * stride)``.  Enumeration order is
level (ascending), then row, then column, then ratio, then angle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .geom import RotatedBox, canonicalize_array

DEFAULT_SCALES = ((2, 50.0), (3, 150.0), (4, 250.0), (5, 350.0), (6, 500.0))
DEFAULT_RATIOS = ((1, 3), (3, 1), (1, 5), (5, 1), (1, 7), (7, 1), (1, 9), (9, 1))
DEFAULT_ANGLES = (-15.0, -30.0, -45.0, -60.0, -75.0, -90.0)
DEFAULT_STRIDES = ((2, 4), (3, 8), (4, 16), (5, 32), (6, 64))


@dataclass(frozen=True)
class AnchorConfig:
    """Scales/ratios/angles/strides of the anchor lattice, keyed by pyramid level."""

    scales: tuple[tuple[int, float], ...] = DEFAULT_SCALES
    ratios: tuple[tuple[float, float], ...] = DEFAULT_RATIOS
    angles: tuple[float, ...] = DEFAULT_ANGLES
    strides: tuple[tuple[int, int], ...] = DEFAULT_STRIDES

    def __post_init__(self):
        scale_levels = [lvl for lvl, _ in self.scales]
        stride_levels = [lvl for lvl, _ in self.strides]
        if len(set(scale_levels)) != len(scale_levels):
            raise ConfigError("duplicate level in scales")
        if sorted(scale_levels) != sorted(stride_levels):
            raise ConfigError("scales and strides configure different levels")
        if not self.ratios or not self.angles:
            raise ConfigError("ratios and angles must be non-empty")
        for lvl, s in self.scales:
            if s <= 0:
                raise ConfigError(f"non-positive scale {s} at level {lvl}")
        for p, q in self.ratios:
            if p <= 0 or q <= 0:
                raise ConfigError(f"non-positive ratio {p}:{q}")
        for lvl, s in self.strides:
            if s <= 0:
                raise ConfigError(f"non-positive stride {s} at level {lvl}")

    @property
    def levels(self) -> tuple[int, ...]:
        return tuple(sorted(lvl for lvl, _ in self.scales))

    @property
    def anchors_per_location(self) -> int:
        return len(self.ratios) * len(self.angles)

    def scale_for(self, level: int) -> float:
        for lvl, s in self.scales:
            if lvl == level:
                return float(s)
        raise ConfigError(f"no scale configured for level {level}")

    def stride_for(self, level: int) -> int:
        for lvl, s in self.strides:
            if lvl == level:
                return int(s)
        raise ConfigError(f"no stride configured for level {level}")

    def to_dict(self) -> dict:
        return {
            "scales": [[lvl, s] for lvl, s in self.scales],
            "ratios": [[p, q] for p, q in self.ratios],
            "angles": list(self.angles),
            "strides": [[lvl, s] for lvl, s in self.strides],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AnchorConfig":
        kwargs = {}
        if "scales" in data:
            kwargs["scales"] = tuple((int(l), float(s)) for l, s in data["scales"])
        if "ratios" in data:
            kwargs["ratios"] = tuple((float(p), float(q)) for p, q in data["ratios"])
        if "angles" in data:
            kwargs["angles"] = tuple(float(a) for a in data["angles"])
        if "strides" in data:
            kwargs["strides"] = tuple((int(l), int(s)) for l, s in data["strides"])
        return cls(**kwargs)


@dataclass(frozen=True)
class Anchor:
    """One lattice anchor: its box, pyramid level and (row, col) cell."""

    box: RotatedBox
    level: int
    cell: tuple[int, int]


def regression_head_width(config: AnchorConfig) -> int:
    """Per-location output width of a 5-parameter regression head."""
    return 5 * config.anchors_per_location


def classification_head_width(config: AnchorConfig) -> int:
    """Per-location output width of a 2-class (object/background) head."""
    return 2 * config.anchors_per_location


def _base_boxes(config: AnchorConfig, level: int) -> np.ndarray:
    # (ratios * angles, 3) -> w, h, theta in ratio-major, angle-minor order
    s = config.scale_for(level)
    out = np.empty((config.anchors_per_location, 3), dtype=np.float64)
    i = 0
    for p, q in config.ratios:
        w = s * np.sqrt(p / q)
        h = s * np.sqrt(q / p)
        for ang in config.angles:
            out[i] = (w, h, ang)
            i += 1
    return out


def generate_level_array(config: AnchorConfig, level: int, grid_h: int, grid_w: int) -> np.ndarray:
    """Anchor parameters for one level as an (grid_h*grid_w*A, 5) array."""
    if grid_h < 0 or grid_w < 0:
        raise ConfigError(f"negative grid {grid_h}x{grid_w}")
    stride = config.stride_for(level)
    base = _base_boxes(config, level)
    a = base.shape[0]
    cols = (np.arange(grid_w, dtype=np.float64) + 0.5) * stride
    rows = (np.arange(grid_h, dtype=np.float64) + 0.5) * stride
    out = np.empty((grid_h, grid_w, a, 5), dtype=np.float64)
    out[:, :, :, 0] = cols[None, :, None]
    out[:, :, :, 1] = rows[:, None, None]
    out[:, :, :, 2:5] = base[None, None, :, :]
    flat = out.reshape(-1, 5)
    return canonicalize_array(flat)


def generate_level(config: AnchorConfig, level: int, grid_h: int, grid_w: int) -> list[Anchor]:
    """Anchors for one level in row -> col -> ratio -> angle order."""
    arr = generate_level_array(config, level, grid_h, grid_w)
    a = config.anchors_per_location
    anchors = []
    for i, (x, y, w, h, theta) in enumerate(arr):
        cell_index = i // a
        cell = (cell_index // grid_w, cell_index % grid_w) if grid_w else (0, 0)
        anchors.append(Anchor(RotatedBox(x, y, w, h, theta), level, cell))
    return anchors


def _check_grids(config: AnchorConfig, grids: Sequence[tuple[int, tuple[int, int]]]):
    seen = set()
    for level, _ in grids:
        if level in seen:
            raise ConfigError(f"duplicate grid for level {level}")
        seen.add(level)
        config.scale_for(level)  # raises for unknown levels


def generate_pyramid_array(config: AnchorConfig, grids: Sequence[tuple[int, tuple[int, int]]]) -> np.ndarray:
    """Concatenated anchor parameters over levels, ascending level order."""
    _check_grids(config, grids)
    parts = [
        generate_level_array(config, level, gh, gw)
        for level, (gh, gw) in sorted(grids, key=lambda g: g[0])
    ]
    if not parts:
        return np.zeros((0, 5), dtype=np.float64)
    return np.concatenate(parts, axis=0)


def generate_pyramid(config: AnchorConfig, grids: Sequence[tuple[int, tuple[int, int]]]) -> list[Anchor]:
    """Anchor objects over levels, ascending level order."""
    _check_grids(config, grids)
    anchors: list[Anchor] = []
    for level, (gh, gw) in sorted(grids, key=lambda g: g[0]):
        anchors.extend(generate_level(config, level, gh, gw))
    return anchors


def grids_for_image(config: AnchorConfig, image_h: int, image_w: int) -> list[tuple[int, tuple[int, int]]]:
    """Per-level grid sizes covering an image (ceil division by stride)."""
    if image_h <= 0 or image_w <= 0:
        raise ConfigError(f"non-positive image size {image_h}x{image_w}")
    return [
        (level, (-(-image_h // config.stride_for(level)), -(-image_w // config.stride_for(level))))
        for level in config.levels
    ]
