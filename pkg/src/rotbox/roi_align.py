"""ROI Align pooling and the multi-size pooling used on elongated proposals.

Regions are given in image pixels and mapped to feature coordinates by
dividing by the stride (no rounding).  Each output bin averages
``samples_per_bin ** 2`` bilinear samples placed at fractions
``(i + 0.5) / samples_per_bin`` of the bin; feature pixel centers sit at
integer coordinates, and samples outside the map read 0.

``multiscale_pool`` pools the circumscribed rectangle of a rotated proposal
at 7x7, 3x16 and 16x3 (rows x cols) so thin, elongated regions keep
resolution along their long axis; the flattened vector is ``145 * C`` long.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, ShapeError, ValidationError
from .geom import HRect, RotatedBox, hrect

POOL_SIZES = ((7, 7), (3, 16), (16, 3))
FLATTENED_BINS = sum(h * w for h, w in POOL_SIZES)  # 145


@dataclass(frozen=True)
class PooledFeature:
    """The three pooled parts of one proposal, in POOL_SIZES order."""

    parts: tuple[np.ndarray, np.ndarray, np.ndarray]

    @property
    def flattened(self) -> np.ndarray:
        return np.concatenate([np.ravel(p) for p in self.parts])


def bilinear_sample(feature: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Bilinear samples of a (C, H, W) map at float coords; out of bounds reads 0."""
    c, h, w = feature.shape
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    fx = xs - x0
    fy = ys - y0
    out = np.zeros((c,) + xs.shape, dtype=np.float64)
    fmap = feature.astype(np.float64)
    for dy, wy in ((0, 1.0 - fy), (1, fy)):
        yi = y0 + dy
        iny = (yi >= 0) & (yi < h)
        for dx, wx in ((0, 1.0 - fx), (1, fx)):
            xi = x0 + dx
            ok = iny & (xi >= 0) & (xi < w)
            if not ok.any():
                continue
            vals = fmap[:, np.clip(yi, 0, h - 1), np.clip(xi, 0, w - 1)]
            out += np.where(ok, wy * wx, 0.0)[None] * vals
    return out


def roi_align(
    feature: np.ndarray,
    roi: HRect,
    stride: float,
    out_h: int,
    out_w: int,
    samples_per_bin: int = 2,
) -> np.ndarray:
    """Average-pooled bilinear samples of ``roi`` -> (C, out_h, out_w) float32."""
    feature = np.asarray(feature)
    if feature.ndim != 3:
        raise ShapeError(f"expected (C, H, W) feature map, got shape {feature.shape}")
    if stride <= 0:
        raise ValidationError(f"non-positive stride {stride}")
    if out_h < 1 or out_w < 1 or samples_per_bin < 1:
        raise ValidationError(
            f"output grid {out_h}x{out_w} with {samples_per_bin} samples/bin must be >= 1"
        )
    x0 = roi.xmin / stride
    y0 = roi.ymin / stride
    bin_w = (roi.xmax - roi.xmin) / stride / out_w
    bin_h = (roi.ymax - roi.ymin) / stride / out_h
    s = samples_per_bin
    xs = x0 + (np.arange(out_w * s, dtype=np.float64) + 0.5) * (bin_w / s)
    ys = y0 + (np.arange(out_h * s, dtype=np.float64) + 0.5) * (bin_h / s)
    grid_x = np.broadcast_to(xs[None, :], (out_h * s, out_w * s))
    grid_y = np.broadcast_to(ys[:, None], (out_h * s, out_w * s))
    samples = bilinear_sample(feature, grid_x, grid_y)
    c = feature.shape[0]
    pooled = samples.reshape(c, out_h, s, out_w, s).mean(axis=(2, 4))
    return pooled.astype(np.float32)


def multiscale_pool(
    feature: np.ndarray,
    proposal: RotatedBox,
    stride: float,
    samples_per_bin: int = 2,
) -> PooledFeature:
    """Pool the circumscribed rectangle of ``proposal`` at all three grid sizes."""
    roi = hrect(proposal)
    parts = tuple(
        roi_align(feature, roi, stride, ph, pw, samples_per_bin) for ph, pw in POOL_SIZES
    )
    return PooledFeature(parts)  # type: ignore[arg-type]


def assign_level(
    proposal: RotatedBox, scales: Sequence[tuple[int, float]] | None = None
) -> int:
    """Pyramid level whose scale is nearest sqrt(w*h); ties pick the finer level."""
    if scales is None:
        from .anchors import DEFAULT_SCALES

        scales = DEFAULT_SCALES
    if not scales:
        raise ConfigError("empty scale table")
    size = float(np.sqrt(proposal.w * proposal.h))
    best_level = None
    best_key = None
    for level, scale in sorted(scales, key=lambda t: t[0]):
        key = abs(scale - size)
        if best_key is None or key < best_key:
            best_level, best_key = level, key
    return int(best_level)
