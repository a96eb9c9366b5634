"""Detection-vs-ground-truth scoring: recall, precision, F-measure, PR curves.

Matching is greedy and one-to-one per image: detections at or above the score
threshold are visited in descending score (ties by input order); each claims
the unmatched ground truth of highest IoU at or above the IoU threshold.
Duplicates of an already-matched ground truth count as false positives.  The
criterion is either skew IoU on the rotated boxes or IoU of their
circumscribed rectangles.  Optional per-image ignore regions absorb unmatched
detections (no reward, no penalty).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, ValidationError
from .geom import (
    RotatedBox,
    as_box_array,
    hrect_bounds_array,
    hrect_iou_pairs,
    pairwise_skew_iou,
)

ROTATED = "rotated"
CIRCUMSCRIBED = "circumscribed"


@dataclass(frozen=True)
class Detection:
    """A scored box attributed to an image."""

    box: RotatedBox
    score: float
    image_id: str = "0"

    def __post_init__(self):
        s = float(self.score)
        object.__setattr__(self, "score", s)
        if not (math.isfinite(s) and 0.0 <= s <= 1.0):
            raise ValidationError(f"score {self.score!r} outside [0, 1]")
        object.__setattr__(self, "image_id", str(self.image_id))


@dataclass(frozen=True)
class EvalConfig:
    iou_threshold: float = 0.5
    score_threshold: float = 0.5
    criterion: str = ROTATED

    def __post_init__(self):
        if not (0.0 < self.iou_threshold <= 1.0):
            raise ConfigError(f"iou_threshold {self.iou_threshold} outside (0, 1]")
        if not (0.0 <= self.score_threshold <= 1.0):
            raise ConfigError(f"score_threshold {self.score_threshold} outside [0, 1]")
        if self.criterion not in (ROTATED, CIRCUMSCRIBED):
            raise ConfigError(f"unknown criterion {self.criterion!r}")


@dataclass(frozen=True)
class EvalResult:
    recall: float
    precision: float
    f_measure: float
    tp: int
    fp: int
    fn: int
    pr_curve: tuple[tuple[float, float, float], ...] = field(default_factory=tuple)


def _iou_matrix(dets: Sequence[RotatedBox], gts: Sequence[RotatedBox], criterion: str) -> np.ndarray:
    d = as_box_array(dets)
    g = as_box_array(gts)
    if criterion == ROTATED:
        return pairwise_skew_iou(d, g)
    db = hrect_bounds_array(d)
    gb = hrect_bounds_array(g)
    out = np.zeros((d.shape[0], g.shape[0]), dtype=np.float64)
    for i in range(d.shape[0]):
        out[i] = hrect_iou_pairs(np.broadcast_to(db[i], (g.shape[0], 4)), gb)
    return out


def _match_image(
    dets: list[tuple[int, Detection]],
    gts: Sequence[RotatedBox],
    ignores: Sequence[RotatedBox],
    config: EvalConfig,
    score_threshold: float,
) -> tuple[int, int, int]:
    kept = [(i, d) for i, d in dets if d.score >= score_threshold]
    kept.sort(key=lambda t: (-t[1].score, t[0]))
    if not kept:
        return 0, 0, len(gts)
    boxes = [d.box for _, d in kept]
    iou = _iou_matrix(boxes, gts, config.criterion) if gts else np.zeros((len(kept), 0))
    ig_iou = (
        _iou_matrix(boxes, ignores, config.criterion)
        if ignores
        else np.zeros((len(kept), 0))
    )
    matched = np.zeros(len(gts), dtype=bool)
    tp = fp = 0
    for row in range(len(kept)):
        best_j = -1
        best = -1.0
        for j in range(len(gts)):
            if matched[j]:
                continue
            if iou[row, j] > best:
                best, best_j = iou[row, j], j
        if best_j >= 0 and best >= config.iou_threshold:
            matched[best_j] = True
            tp += 1
        elif ig_iou.shape[1] and (ig_iou[row] >= config.iou_threshold).any():
            continue  # overlaps an ignore region: neither reward nor penalty
        else:
            fp += 1
    fn = int((~matched).sum())
    return tp, fp, fn


def _counts(
    detections: Sequence[Detection],
    gts: Mapping[str, Sequence[RotatedBox]],
    config: EvalConfig,
    score_threshold: float,
    ignores: Mapping[str, Sequence[RotatedBox]] | None,
) -> tuple[int, int, int]:
    by_image: dict[str, list[tuple[int, Detection]]] = {str(k): [] for k in gts}
    for i, det in enumerate(detections):
        by_image.setdefault(det.image_id, []).append((i, det))
    tp = fp = fn = 0
    ignores = ignores or {}
    for image_id, dets in by_image.items():
        image_gts = list(gts.get(image_id, ()))
        image_ign = list(ignores.get(image_id, ()))
        t, f, n = _match_image(dets, image_gts, image_ign, config, score_threshold)
        tp += t
        fp += f
        fn += n
    return tp, fp, fn


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f_measure = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return recall, precision, f_measure


def evaluate(
    detections: Sequence[Detection],
    gts: Mapping[str, Sequence[RotatedBox]],
    config: EvalConfig = EvalConfig(),
    ignores: Mapping[str, Sequence[RotatedBox]] | None = None,
    thresholds: Sequence[float] | None = None,
) -> EvalResult:
    """Aggregate counts and measures at the operating score threshold.

    When ``thresholds`` is given the result also carries the PR curve as
    (threshold, precision, recall) triples in the given order.
    """
    tp, fp, fn = _counts(detections, gts, config, config.score_threshold, ignores)
    recall, precision, f_measure = _prf(tp, fp, fn)
    curve = []
    for t in thresholds or ():
        ctp, cfp, cfn = _counts(detections, gts, config, float(t), ignores)
        crec, cprec, _ = _prf(ctp, cfp, cfn)
        curve.append((float(t), cprec, crec))
    return EvalResult(recall, precision, f_measure, tp, fp, fn, tuple(curve))


def pr_curve(
    detections: Sequence[Detection],
    gts: Mapping[str, Sequence[RotatedBox]],
    config: EvalConfig = EvalConfig(),
    thresholds: Sequence[float] = (),
    ignores: Mapping[str, Sequence[RotatedBox]] | None = None,
) -> list[tuple[float, float, float]]:
    """(threshold, precision, recall) at each score threshold."""
    return list(
        evaluate(detections, gts, config, ignores=ignores, thresholds=thresholds).pr_curve
    )
