"""Densely connected feature pyramid forward pass.

Levels 2..5 each get a 1x1 lateral projection to the common channel width.
The merge at level i concatenates its own lateral first, then the laterals of
every coarser level j > i upsampled by 2**(j - i) (nearest neighbor), in
ascending j.  A 3x3 smoothing convolution maps the concatenation back to the
common width; level 6 is a stride-2 max downsample of level 5.  With
``reuse="smoothed"`` the coarser contributions are the already-smoothed
outputs instead of the raw laterals.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .tensor import conv2d, max_downsample2, read_tensor, upsample_nearest, write_tensor

CHANNELS = 256
LEVELS = (2, 3, 4, 5)


@dataclass(frozen=True)
class DfpnWeights:
    """Per-level lateral (1x1) and smoothing (3x3) kernels and biases."""

    lateral_kernels: dict[int, np.ndarray]  # level -> (C, Cin_level)
    lateral_biases: dict[int, np.ndarray]  # level -> (C,)
    smooth_kernels: dict[int, np.ndarray]  # level -> (C, C * (6 - level), 3, 3)
    smooth_biases: dict[int, np.ndarray]  # level -> (C,)

    def __post_init__(self):
        for level in LEVELS:
            for table, name in (
                (self.lateral_kernels, "lateral kernel"),
                (self.lateral_biases, "lateral bias"),
                (self.smooth_kernels, "smooth kernel"),
                (self.smooth_biases, "smooth bias"),
            ):
                if level not in table:
                    raise ConfigError(f"missing {name} for level {level}")
        c = self.channels
        for level in LEVELS:
            lk = self.lateral_kernels[level]
            if lk.ndim != 2 or lk.shape[0] != c:
                raise ShapeError(f"lateral kernel level {level}: shape {lk.shape}")
            sk = self.smooth_kernels[level]
            expect_in = c * (6 - level)
            if sk.shape != (c, expect_in, 3, 3):
                raise ShapeError(
                    f"smooth kernel level {level}: shape {sk.shape}, expected {(c, expect_in, 3, 3)}"
                )
            for b in (self.lateral_biases[level], self.smooth_biases[level]):
                if b.shape != (c,):
                    raise ShapeError(f"bias level {level}: shape {b.shape} != ({c},)")

    @property
    def channels(self) -> int:
        return int(self.lateral_kernels[2].shape[0])

    def in_channels(self, level: int) -> int:
        return int(self.lateral_kernels[level].shape[1])


def random_weights(
    in_channels: dict[int, int] | int, channels: int = CHANNELS, seed: int = 0
) -> DfpnWeights:
    """He-scaled random weights for the given backbone channel counts.

    ``in_channels`` maps pyramid level to backbone channel count; a bare int
    uses that count at every level.
    """
    if isinstance(in_channels, int):
        in_channels = {level: in_channels for level in LEVELS}
    rng = np.random.default_rng(seed)
    lk, lb, sk, sb = {}, {}, {}, {}
    for level in LEVELS:
        cin = in_channels[level]
        lk[level] = (rng.standard_normal((channels, cin)) / np.sqrt(cin)).astype(np.float32)
        lb[level] = rng.standard_normal(channels).astype(np.float32) * 0.01
        merged = channels * (6 - level)
        sk[level] = (
            rng.standard_normal((channels, merged, 3, 3)) / np.sqrt(merged * 9.0)
        ).astype(np.float32)
        sb[level] = rng.standard_normal(channels).astype(np.float32) * 0.01
    return DfpnWeights(lk, lb, sk, sb)


def _check_features(features: dict[int, np.ndarray], weights: DfpnWeights):
    for level in LEVELS:
        if level not in features:
            raise ShapeError(f"missing backbone feature for level {level}")
        f = np.asarray(features[level])
        if f.ndim != 3:
            raise ShapeError(f"feature level {level}: expected (C, H, W), got {f.shape}")
        if f.shape[0] != weights.in_channels(level):
            raise ShapeError(
                f"feature level {level} has {f.shape[0]} channels, "
                f"weights expect {weights.in_channels(level)}"
            )
    for level in (3, 4, 5):
        fine = np.asarray(features[level - 1])
        coarse = np.asarray(features[level])
        if fine.shape[1] != 2 * coarse.shape[1] or fine.shape[2] != 2 * coarse.shape[2]:
            raise ShapeError(
                f"levels {level - 1}/{level}: spatial dims {fine.shape[1:]} vs "
                f"{coarse.shape[1:]} are not a 2x halving chain"
            )


def dfpn_forward(
    features: dict[int, np.ndarray],
    weights: DfpnWeights,
    reuse: str = "lateral",
) -> dict[int, np.ndarray]:
    """Pyramid outputs {2..6: (C, H_i, W_i)} from backbone features {2..5}."""
    if reuse not in ("lateral", "smoothed"):
        raise ConfigError(f"unknown reuse mode {reuse!r}")
    _check_features(features, weights)
    laterals = {}
    for level in LEVELS:
        k = weights.lateral_kernels[level][:, :, None, None]
        laterals[level] = conv2d(features[level], k, weights.lateral_biases[level])
    outputs: dict[int, np.ndarray] = {}
    for level in sorted(LEVELS, reverse=True):
        parts = [laterals[level]]
        for j in range(level + 1, 6):
            source = outputs[j] if reuse == "smoothed" else laterals[j]
            parts.append(upsample_nearest(source, 2 ** (j - level)))
        merged = np.concatenate(parts, axis=0)
        outputs[level] = conv2d(
            merged, weights.smooth_kernels[level], weights.smooth_biases[level]
        )
    outputs[6] = max_downsample2(outputs[5])
    return outputs


_WEIGHT_FILES = (
    ("lateral_kernels", "lateral{level}.kernel.rbt"),
    ("lateral_biases", "lateral{level}.bias.rbt"),
    ("smooth_kernels", "smooth{level}.kernel.rbt"),
    ("smooth_biases", "smooth{level}.bias.rbt"),
)


def save_weights(directory, weights: DfpnWeights) -> None:
    os.makedirs(directory, exist_ok=True)
    for attr, pattern in _WEIGHT_FILES:
        table = getattr(weights, attr)
        for level in LEVELS:
            write_tensor(os.path.join(directory, pattern.format(level=level)), table[level])


def load_weights(directory) -> DfpnWeights:
    tables: dict[str, dict[int, np.ndarray]] = {attr: {} for attr, _ in _WEIGHT_FILES}
    for attr, pattern in _WEIGHT_FILES:
        for level in LEVELS:
            tables[attr][level] = read_tensor(os.path.join(directory, pattern.format(level=level)))
    return DfpnWeights(**tables)
