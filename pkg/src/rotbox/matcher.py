"""Anchor-to-ground-truth assignment and minibatch sampling.

An anchor is positive when its best IoU exceeds ``pos_iou`` with an angular
difference below ``max_angle_diff`` to that ground truth, or when it is the
argmax-IoU anchor of some ground truth (the argmax rule overrides a negative
or ignore verdict and needs no angle check).  An anchor is negative when its
best IoU falls below ``neg_iou``, or exceeds ``pos_iou`` with the angle gate
failed.  Everything else is ignored.  Angular differences use the same
90-degree-wrapped residual as the delta coder.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .geom import as_box_array, pairwise_skew_iou

log = logging.getLogger(__name__)

POSITIVE = "positive"
NEGATIVE = "negative"
IGNORE = "ignore"


@dataclass(frozen=True)
class AssignerConfig:
    pos_iou: float = 0.5
    neg_iou: float = 0.2
    max_angle_diff: float = 15.0

    def __post_init__(self):
        if not (0.0 <= self.neg_iou <= self.pos_iou <= 1.0):
            raise ConfigError(
                f"need 0 <= neg_iou <= pos_iou <= 1, got {self.neg_iou}, {self.pos_iou}"
            )
        if self.max_angle_diff <= 0.0:
            raise ConfigError(f"non-positive max_angle_diff {self.max_angle_diff}")


@dataclass(frozen=True)
class SamplerConfig:
    batch_size: int = 512
    pos_fraction: float = 0.5

    def __post_init__(self):
        if self.batch_size <= 0:
            raise ConfigError(f"non-positive batch_size {self.batch_size}")
        if not (0.0 <= self.pos_fraction <= 1.0):
            raise ConfigError(f"pos_fraction {self.pos_fraction} outside [0, 1]")


@dataclass(frozen=True)
class Assignment:
    label: str
    matched_gt: int | None
    iou: float


def _wrapped_angle_diff(theta_a: np.ndarray, theta_g: np.ndarray) -> np.ndarray:
    diff = theta_g[None, :] - theta_a[:, None]
    return np.abs(((diff + 45.0) % 90.0) - 45.0)


def assign(anchors, gts, config: AssignerConfig = AssignerConfig()) -> list[Assignment]:
    """Label every anchor positive/negative/ignore against the ground truths."""
    anchor_arr = as_box_array(anchors)
    gt_arr = as_box_array(gts)
    n, g = anchor_arr.shape[0], gt_arr.shape[0]
    if g == 0:
        return [Assignment(NEGATIVE, None, 0.0)] * n
    iou = pairwise_skew_iou(anchor_arr, gt_arr)
    angle_diff = _wrapped_angle_diff(anchor_arr[:, 4], gt_arr[:, 4])

    best_gt = iou.argmax(axis=1)
    rows = np.arange(n)
    best_iou = iou[rows, best_gt]
    best_angle_ok = angle_diff[rows, best_gt] < config.max_angle_diff

    rule_pos = (best_iou > config.pos_iou) & best_angle_ok
    rule_neg = (best_iou < config.neg_iou) | (
        (best_iou > config.pos_iou) & ~best_angle_ok
    )

    gt_best = iou.max(axis=0)
    forced = (iou == gt_best[None, :]) & (gt_best[None, :] > 0.0)
    forced_any = forced.any(axis=1)
    forced_gt = forced.argmax(axis=1)  # lowest tying gt index

    out: list[Assignment] = []
    for i in range(n):
        if rule_pos[i]:
            j = int(best_gt[i])
            out.append(Assignment(POSITIVE, j, float(iou[i, j])))
        elif forced_any[i]:
            j = int(forced_gt[i])
            out.append(Assignment(POSITIVE, j, float(iou[i, j])))
        elif rule_neg[i]:
            out.append(Assignment(NEGATIVE, None, float(best_iou[i])))
        else:
            out.append(Assignment(IGNORE, None, float(best_iou[i])))
    return out


def sample(
    assignments: Sequence[Assignment],
    config: SamplerConfig = SamplerConfig(),
    seed: int = 0,
) -> tuple[list[int], list[int]]:
    """Draw a minibatch of anchor indices at the configured positive fraction.

    Positives are drawn uniformly without replacement up to
    ``round(batch_size * pos_fraction)``; negatives fill the remainder.  When
    supply cannot fill the batch a warning is logged and the result is short.
    """
    pos_pool = np.array(
        [i for i, a in enumerate(assignments) if a.label == POSITIVE], dtype=np.int64
    )
    neg_pool = np.array(
        [i for i, a in enumerate(assignments) if a.label == NEGATIVE], dtype=np.int64
    )
    rng = np.random.default_rng(seed)
    want_pos = int(round(config.batch_size * config.pos_fraction))
    n_pos = min(want_pos, pos_pool.size)
    pos = rng.choice(pos_pool, size=n_pos, replace=False) if n_pos else np.empty(0, np.int64)
    n_neg = min(config.batch_size - n_pos, neg_pool.size)
    neg = rng.choice(neg_pool, size=n_neg, replace=False) if n_neg else np.empty(0, np.int64)
    if n_pos + n_neg < config.batch_size:
        log.warning(
            "sampled %d anchors for a batch of %d (pool: %d positive, %d negative)",
            n_pos + n_neg,
            config.batch_size,
            pos_pool.size,
            neg_pool.size,
        )
    return sorted(int(i) for i in pos), sorted(int(i) for i in neg)
