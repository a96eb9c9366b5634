"""Rotated-box detection toolkit: geometry, anchors, matching, losses,
feature pyramids, pooling, evaluation and scene tiling.

Submodules are imported lazily (PEP 562) so that the CLI can configure
BLAS thread environment variables before numpy is first loaded.
"""

from __future__ import annotations

__version__ = "0.1.0"

_EXPORTS = {
    # geom
    "RotatedBox": "geom",
    "HRect": "geom",
    "ConvexPolygon": "geom",
    "canonicalize": "geom",
    "corners": "geom",
    "hrect": "geom",
    "intersect_convex": "geom",
    "skew_iou": "geom",
    "skew_iou_pairs": "geom",
    "pairwise_skew_iou": "geom",
    "hrect_iou": "geom",
    # anchors
    "AnchorConfig": "anchors",
    "Anchor": "anchors",
    "generate_level": "anchors",
    "generate_pyramid": "anchors",
    "generate_pyramid_array": "anchors",
    "grids_for_image": "anchors",
    # coder
    "DeltaVector": "coder",
    "encode": "coder",
    "decode": "coder",
    "angle_difference": "coder",
    # matcher
    "AssignerConfig": "matcher",
    "SamplerConfig": "matcher",
    "Assignment": "matcher",
    "assign": "matcher",
    "sample": "matcher",
    # loss
    "LossConfig": "loss",
    "LossEntry": "loss",
    "LossBreakdown": "loss",
    "cross_entropy": "loss",
    "smooth_l1": "loss",
    "multitask_loss": "loss",
    # nms
    "ScoredBox": "nms",
    "topk": "nms",
    "rotated_nms": "nms",
    "hrect_nms": "nms",
    # tensor / dfpn
    "read_tensor": "tensor",
    "write_tensor": "tensor",
    "conv2d": "tensor",
    "upsample_nearest": "tensor",
    "max_downsample2": "tensor",
    "DfpnWeights": "dfpn",
    "dfpn_forward": "dfpn",
    "random_weights": "dfpn",
    "save_weights": "dfpn",
    "load_weights": "dfpn",
    # roi align
    "roi_align": "roi_align",
    "multiscale_pool": "roi_align",
    "assign_level": "roi_align",
    "PooledFeature": "roi_align",
    # evaluator
    "Detection": "evaluator",
    "EvalConfig": "evaluator",
    "EvalResult": "evaluator",
    "evaluate": "evaluator",
    "pr_curve": "evaluator",
    # tiler
    "TileSpec": "tiler",
    "PreprocessConfig": "tiler",
    "plan_tiles": "tiler",
    "to_scene_coords": "tiler",
    "merge_scene": "tiler",
    # errors
    "RotboxError": "errors",
    "InvalidBoxError": "errors",
    "ValidationError": "errors",
    "ConfigError": "errors",
    "FormatError": "errors",
    "ShapeError": "errors",
    "DecodeOverflowError": "errors",
}

__all__ = sorted(_EXPORTS) + ["__version__"]


def __getattr__(name: str):
    module = _EXPORTS.get(name)
    if module is None:
        raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
    import importlib

    return getattr(importlib.import_module(f".{module}", __name__), name)


def __dir__():
    return __all__
