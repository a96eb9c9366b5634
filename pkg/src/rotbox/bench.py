"""Micro-benchmarks for the geometry kernels.

Workloads are seeded so runs are reproducible.  Results are plain dicts so
the CLI can dump them as JSON.
"""

from __future__ import annotations

import time

import numpy as np

from .geom import skew_iou_pairs
from .nms import ScoredBox, rotated_nms


def _random_boxes(rng: np.random.Generator, n: int, extent: float, lo: float, hi: float) -> np.ndarray:
    params = np.empty((n, 5), dtype=np.float64)
    params[:, 0:2] = rng.uniform(0.0, extent, size=(n, 2))
    params[:, 2:4] = rng.uniform(lo, hi, size=(n, 2))
    params[:, 4] = rng.uniform(-90.0, 0.0, size=n)
    return params


def bench_iou(n_pairs: int = 200_000, seed: int = 0) -> dict:
    """Throughput of the pairwise overlap kernel, in pairs per second."""
    rng = np.random.default_rng(seed)
    a = _random_boxes(rng, n_pairs, 200.0, 20.0, 60.0)
    b = _random_boxes(rng, n_pairs, 200.0, 20.0, 60.0)
    skew_iou_pairs(a[:1000], b[:1000])  # warm up
    start = time.perf_counter()
    ious = skew_iou_pairs(a, b)
    elapsed = time.perf_counter() - start
    return {
        "pairs": n_pairs,
        "seconds": elapsed,
        "pairs_per_second": n_pairs / elapsed,
        "mean_iou": float(ious.mean()),
    }


def bench_nms(n_boxes: int = 10_000, iou_threshold: float = 0.7, seed: int = 0) -> dict:
    """Wall time of rotated suppression on a dense random scene."""
    from .geom import RotatedBox

    rng = np.random.default_rng(seed)
    params = _random_boxes(rng, n_boxes, 1000.0, 20.0, 80.0)
    scores = rng.uniform(0.0, 1.0, size=n_boxes)
    # Box construction happens outside the timed region.
    boxes = [
        ScoredBox(RotatedBox(*p), float(s), i) for i, (p, s) in enumerate(zip(params, scores))
    ]
    start = time.perf_counter()
    kept = rotated_nms(boxes, iou_threshold=iou_threshold, pre_topk=None, post_topk=None)
    elapsed = time.perf_counter() - start
    return {
        "boxes": n_boxes,
        "iou_threshold": iou_threshold,
        "seconds": elapsed,
        "kept": len(kept),
    }


def run_all(seed: int = 0) -> dict:
    return {"iou": bench_iou(seed=seed), "nms": bench_nms(seed=seed)}
