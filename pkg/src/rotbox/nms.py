"""Score ranking and greedy non-maximum suppression on rotated boxes.

Candidates are visited in descending score (ties broken by ascending index);
a surviving candidate suppresses every remaining box whose IoU with it is
strictly above the threshold.  ``rotated_nms`` measures skew IoU, with a
circumscribed-rectangle overlap prefilter (disjoint circumscribed rectangles
imply skew IoU 0, so the prefilter cannot change results); ``hrect_nms``
measures IoU on the circumscribed rectangles themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .geom import RotatedBox, hrect_bounds_array, hrect_iou_pairs, skew_iou_pairs

# Proposal-pipeline constants: candidates kept before NMS and survivors after.
PRE_NMS_TOPK = 12000
POST_NMS_TOPK = 1200


@dataclass(frozen=True)
class ScoredBox:
    """A candidate detection: box, confidence score and its original index."""

    box: RotatedBox
    score: float
    index: int

    def __post_init__(self):
        if not math.isfinite(float(self.score)):
            raise ValidationError(f"non-finite score {self.score!r}")


def topk(items: Sequence[ScoredBox], k: int) -> list[ScoredBox]:
    """The k highest-scoring items, descending score, ties by ascending index."""
    if k < 0:
        raise ValidationError(f"negative k {k}")
    return sorted(items, key=lambda it: (-it.score, it.index))[:k]


_SWEEP_CHUNK = 256
# Slack on the circumscribed-rectangle upper bound so float rounding in the
# bound can never drop a pair whose exact IoU sits at the threshold.
_BOUND_SLACK = 1e-9


def _suppression_pairs(
    params: np.ndarray, bounds: np.ndarray, iou_threshold: float, rotated: bool
) -> tuple[np.ndarray, np.ndarray]:
    """All unordered pairs (p < q, score order) with IoU strictly above threshold.

    A sweep over x-sorted circumscribed rectangles enumerates overlap
    candidates without materializing the full n^2 pair set.  For the rotated
    measure, the rectangle overlap area bounds the true intersection from
    above (the rotated intersection lies inside both rectangles), so pairs
    whose bound cannot clear the threshold skip the exact clipping kernel.
    """
    n = len(params)
    empty = np.empty(0, dtype=np.int64)
    if n < 2:
        return empty, empty
    areas = params[:, 2] * params[:, 3]
    xs = np.argsort(bounds[:, 0], kind="stable")
    xmin_s = bounds[xs, 0]
    upper = np.searchsorted(xmin_s, bounds[xs, 2], side="left")
    pa_parts: list[np.ndarray] = []
    pb_parts: list[np.ndarray] = []
    for start in range(0, n, _SWEEP_CHUNK):
        a_pos = np.arange(start, min(start + _SWEEP_CHUNK, n))
        lo = a_pos + 1
        runs = np.maximum(upper[a_pos], lo) - lo
        total = int(runs.sum())
        if total == 0:
            continue
        a_rep = np.repeat(a_pos, runs)
        run_starts = np.repeat(np.cumsum(runs) - runs, runs)
        b_rep = np.repeat(lo, runs) + np.arange(total) - run_starts
        ia = xs[a_rep]
        ib = xs[b_rep]
        # x-overlap is guaranteed by the sweep; test y-overlap.
        mask = (bounds[ia, 1] < bounds[ib, 3]) & (bounds[ib, 1] < bounds[ia, 3])
        ia = ia[mask]
        ib = ib[mask]
        if not ia.size:
            continue
        if rotated:
            iw = np.minimum(bounds[ia, 2], bounds[ib, 2]) - np.maximum(
                bounds[ia, 0], bounds[ib, 0]
            )
            ih = np.minimum(bounds[ia, 3], bounds[ib, 3]) - np.maximum(
                bounds[ia, 1], bounds[ib, 1]
            )
            cap = np.minimum(iw * ih, np.minimum(areas[ia], areas[ib]))
            bound = cap / (areas[ia] + areas[ib] - cap)
            passed = bound > iou_threshold - _BOUND_SLACK
        else:
            passed = hrect_iou_pairs(bounds[ia], bounds[ib]) > iou_threshold
        ia = ia[passed]
        ib = ib[passed]
        if ia.size:
            pa_parts.append(ia)
            pb_parts.append(ib)
    if not pa_parts:
        return empty, empty
    ia = np.concatenate(pa_parts)
    ib = np.concatenate(pb_parts)
    if rotated:
        above = skew_iou_pairs(params[ia], params[ib]) > iou_threshold
        ia = ia[above]
        ib = ib[above]
    return np.minimum(ia, ib), np.maximum(ia, ib)


def _nms(
    items: Sequence[ScoredBox],
    iou_threshold: float,
    rotated: bool,
    pre_topk: int | None,
    post_topk: int | None,
) -> list[int]:
    if not (0.0 <= iou_threshold <= 1.0):
        raise ValidationError(f"iou threshold {iou_threshold} outside [0, 1]")
    if pre_topk is not None:
        items = topk(items, pre_topk)
    n = len(items)
    if n == 0:
        return []
    params = np.array([it.box.astuple() for it in items], dtype=np.float64)
    scores = np.array([it.score for it in items], dtype=np.float64)
    ticket = np.array([it.index for it in items], dtype=np.int64)
    order = np.lexsort((ticket, -scores))
    params = params[order]
    ticket = ticket[order]
    bounds = hrect_bounds_array(params)
    pa, pb = _suppression_pairs(params, bounds, iou_threshold, rotated)
    if pa.size:
        grp = np.argsort(pa, kind="stable")
        pa = pa[grp]
        pb = pb[grp]
    starts = np.searchsorted(pa, np.arange(n), side="left")
    ends = np.searchsorted(pa, np.arange(n), side="right")
    alive = np.ones(n, dtype=bool)
    keep: list[int] = []
    for i in range(n):
        if not alive[i]:
            continue
        keep.append(int(ticket[i]))
        if post_topk is not None and len(keep) >= post_topk:
            break
        if ends[i] > starts[i]:
            alive[pb[starts[i] : ends[i]]] = False
    return keep


def rotated_nms(
    items: Sequence[ScoredBox],
    iou_threshold: float = 0.7,
    *,
    pre_topk: int | None = PRE_NMS_TOPK,
    post_topk: int | None = POST_NMS_TOPK,
) -> list[int]:
    """Greedy suppression under skew IoU; returns kept ``index`` values in keep order.

    ``pre_topk`` caps the candidate pool by score before suppression and
    ``post_topk`` caps the kept list; ``None`` disables either cap.
    """
    return _nms(items, iou_threshold, rotated=True, pre_topk=pre_topk, post_topk=post_topk)


def hrect_nms(
    items: Sequence[ScoredBox],
    iou_threshold: float = 0.7,
    *,
    pre_topk: int | None = PRE_NMS_TOPK,
    post_topk: int | None = POST_NMS_TOPK,
) -> list[int]:
    """Greedy suppression under circumscribed-rectangle IoU."""
    return _nms(items, iou_threshold, rotated=False, pre_topk=pre_topk, post_topk=post_topk)
