"""Command-line interface.

Every command reads/writes the JSON and CSV formats described in
:mod:`rotbox.formats` and stamps JSON output with ``"schema": "rotbox/1"``.
Errors print a single ``error code=<slug>: <message>`` line on stderr and
exit with status 2.

Only the standard library is imported at module level: ``--threads`` has to
set the BLAS environment variables before numpy is first loaded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

_THREAD_VARS = (
    "OPENBLAS_NUM_THREADS",
    "OMP_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)


class _Parser(argparse.ArgumentParser):
    """argparse that fails with one machine-readable line instead of usage spam."""

    def error(self, message):
        print(f"error code=usage: {message}", file=sys.stderr)
        raise SystemExit(2)


def _emit(document: dict, out_path: str | None) -> None:
    text = json.dumps(document, indent=2)
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _load_inline_or_file(value: str) -> dict:
    """`--a` style arguments take inline JSON, or @path to read a file."""
    from .errors import FormatError

    if value.startswith("@"):
        from .formats import load_json

        return load_json(value[1:])
    try:
        obj = json.loads(value)
    except json.JSONDecodeError as e:
        raise FormatError(f"invalid inline JSON ({e})") from e
    if not isinstance(obj, dict):
        raise FormatError("inline JSON must be an object")
    return obj


def _open_out(path: str | None):
    import contextlib

    if path:
        return open(path, "w", newline="")
    return contextlib.nullcontext(sys.stdout)


# ---------------------------------------------------------------------------
# command handlers


def _cmd_iou(args) -> int:
    from .errors import ValidationError
    from .formats import SCHEMA, box_from_dict, boxes_from_file
    from .geom import as_box_array, pairwise_skew_iou, skew_iou

    single = args.a is not None or args.b is not None
    batch = args.batch_a is not None or args.batch_b is not None
    if single and batch:
        raise ValidationError("use either --a/--b or --batch-a/--batch-b, not both")
    if single:
        if args.a is None or args.b is None:
            raise ValidationError("--a and --b must be given together")
        a = box_from_dict(_load_inline_or_file(args.a))
        b = box_from_dict(_load_inline_or_file(args.b))
        _emit({"schema": SCHEMA, "iou": skew_iou(a, b)}, args.out)
        return 0
    if args.batch_a is None or args.batch_b is None:
        raise ValidationError("--batch-a and --batch-b must be given together")
    boxes_a = as_box_array([b.astuple() for b in boxes_from_file(args.batch_a)])
    boxes_b = as_box_array([b.astuple() for b in boxes_from_file(args.batch_b)])
    matrix = pairwise_skew_iou(boxes_a, boxes_b)
    _emit({"schema": SCHEMA, "iou_matrix": matrix.tolist()}, args.out)
    return 0


def _cmd_nms(args) -> int:
    from .formats import SCHEMA, detection_to_dict, detections_from_file
    from .nms import ScoredBox, hrect_nms, rotated_nms

    dets = detections_from_file(args.infile)
    scored = [ScoredBox(d.box, d.score, i) for i, d in enumerate(dets)]
    run = rotated_nms if args.mode == "rotated" else hrect_nms
    keep = run(
        scored,
        iou_threshold=args.iou,
        pre_topk=args.pre_topk,
        post_topk=args.post_topk,
    )
    document = {
        "schema": SCHEMA,
        "keep": keep,
        "detections": [detection_to_dict(dets[i]) for i in keep],
    }
    _emit(document, args.out)
    return 0


def _cmd_anchors(args) -> int:
    from .anchors import AnchorConfig, grids_for_image
    from .formats import SCHEMA, load_json, write_anchors_csv

    if args.config:
        config = AnchorConfig.from_dict(load_json(args.config))
    else:
        config = AnchorConfig()
    height, width = args.image_size
    grids = grids_for_image(config, height, width)
    if args.summary:
        per_level = {
            str(level): gh * gw * config.anchors_per_location for level, (gh, gw) in sorted(grids)
        }
        document = {
            "schema": SCHEMA,
            "anchors_per_location": config.anchors_per_location,
            "per_level": per_level,
            "total": sum(per_level.values()),
        }
        _emit(document, args.out)
        return 0
    with _open_out(args.out) as fh:
        write_anchors_csv(fh, config, grids)
    return 0


def _cmd_encode(args) -> int:
    from .coder import encode
    from .errors import ValidationError
    from .formats import SCHEMA, boxes_from_file, delta_to_dict

    anchors = boxes_from_file(args.anchors)
    targets = boxes_from_file(args.targets)
    if len(anchors) != len(targets):
        raise ValidationError(
            f"anchor/target counts differ ({len(anchors)} vs {len(targets)})"
        )
    deltas = [delta_to_dict(encode(a, t)) for a, t in zip(anchors, targets)]
    _emit({"schema": SCHEMA, "deltas": deltas}, args.out)
    return 0


def _cmd_decode(args) -> int:
    from .coder import decode
    from .errors import FormatError, ValidationError
    from .formats import SCHEMA, box_to_dict, boxes_from_file, delta_from_dict, load_json

    anchors = boxes_from_file(args.anchors)
    data = load_json(args.deltas)
    if "deltas" not in data or not isinstance(data["deltas"], list):
        raise FormatError(f'{args.deltas}: expected {{"deltas": [...]}}')
    deltas = [delta_from_dict(d) for d in data["deltas"]]
    if len(anchors) != len(deltas):
        raise ValidationError(
            f"anchor/delta counts differ ({len(anchors)} vs {len(deltas)})"
        )
    clamp = None if args.no_clamp else args.clamp
    boxes = [box_to_dict(decode(a, d, clamp=clamp)) for a, d in zip(anchors, deltas)]
    _emit({"schema": SCHEMA, "boxes": boxes}, args.out)
    return 0


def _load_boxes_any(path):
    from .formats import boxes_from_file, read_anchor_boxes_csv

    if path.endswith(".csv"):
        return read_anchor_boxes_csv(path)
    return boxes_from_file(path)


def _cmd_assign(args) -> int:
    from .formats import boxes_from_file, write_assignments_csv
    from .matcher import AssignerConfig, assign

    anchors = _load_boxes_any(args.anchors)
    gts = boxes_from_file(args.gts)
    config = AssignerConfig(
        pos_iou=args.pos_iou, neg_iou=args.neg_iou, max_angle_diff=args.max_angle_diff
    )
    assignments = assign(anchors, gts, config)
    with _open_out(args.out) as fh:
        write_assignments_csv(fh, assignments)
    return 0


def _cmd_sample(args) -> int:
    from .formats import SCHEMA, read_assignments_csv
    from .matcher import SamplerConfig, sample

    assignments = read_assignments_csv(args.assignments)
    config = SamplerConfig(batch_size=args.batch_size, pos_fraction=args.pos_fraction)
    positives, negatives = sample(assignments, config, seed=args.seed)
    _emit({"schema": SCHEMA, "positives": positives, "negatives": negatives}, args.out)
    return 0


def _cmd_loss(args) -> int:
    from .coder import DeltaVector
    from .formats import SCHEMA, load_json
    from .errors import FormatError
    from .loss import LossConfig, LossEntry, multitask_loss

    data = load_json(args.infile)
    if "entries" not in data or not isinstance(data["entries"], list):
        raise FormatError(f'{args.infile}: expected {{"entries": [...]}}')

    def _delta(obj):
        if obj is None:
            return None
        from .formats import delta_from_dict

        return delta_from_dict(obj)

    entries = []
    for i, e in enumerate(data["entries"]):
        try:
            entries.append(
                LossEntry(
                    probs=tuple(float(p) for p in e["probs"]),
                    label=int(e["label"]),
                    pred=_delta(e.get("pred")),
                    target=_delta(e.get("target")),
                    is_positive=bool(e.get("is_positive", False)),
                )
            )
        except (KeyError, TypeError, ValueError) as err:
            raise FormatError(f"{args.infile}: entry {i}: {err}") from err
    config = LossConfig(lam=args.lam, n_cls=args.n_cls, n_reg=args.n_reg)
    result = multitask_loss(entries, config)
    document = {
        "schema": SCHEMA,
        "cls_loss": result.cls_loss,
        "reg_loss": result.reg_loss,
        "total": result.total,
        "n_cls": result.n_cls,
        "n_reg": result.n_reg,
    }
    _emit(document, args.out)
    return 0


def _cmd_dfpn_forward(args) -> int:
    from .dfpn import dfpn_forward, load_weights, random_weights, save_weights
    from .errors import ValidationError
    from .formats import SCHEMA
    from .tensor import read_tensor, write_tensor

    features = {
        2: read_tensor(args.c2),
        3: read_tensor(args.c3),
        4: read_tensor(args.c4),
        5: read_tensor(args.c5),
    }
    if (args.weights is None) == (args.seed is None):
        raise ValidationError("give exactly one of --weights or --seed")
    if args.weights is not None:
        weights = load_weights(args.weights)
    else:
        counts = {level: f.shape[0] for level, f in features.items()}
        weights = random_weights(counts, seed=args.seed)
        if args.save_weights:
            save_weights(args.save_weights, weights)
    outputs = dfpn_forward(features, weights, reuse=args.reuse)
    shapes = {}
    for level in sorted(outputs):
        path = f"{args.out_prefix}p{level}.rbt"
        write_tensor(path, outputs[level])
        shapes[f"p{level}"] = {"path": path, "shape": list(outputs[level].shape)}
    _emit({"schema": SCHEMA, "outputs": shapes}, args.out)
    return 0


def _cmd_roialign(args) -> int:
    from .formats import SCHEMA, box_from_dict
    from .geom import hrect
    from .roi_align import roi_align
    from .tensor import read_tensor, write_tensor

    feature = read_tensor(args.feature)
    proposal = box_from_dict(_load_inline_or_file(args.proposal))
    pooled = roi_align(
        feature,
        hrect(proposal),
        stride=args.stride,
        out_h=args.out_h,
        out_w=args.out_w,
        samples_per_bin=args.samples,
    )
    if args.out_tensor:
        write_tensor(args.out_tensor, pooled)
    document = {
        "schema": SCHEMA,
        "shape": list(pooled.shape),
        "values": pooled.astype(float).tolist(),
    }
    _emit(document, args.out)
    return 0


def _eval_config(args):
    from .evaluator import EvalConfig

    return EvalConfig(
        iou_threshold=args.iou_threshold,
        score_threshold=args.score_threshold,
        criterion=args.criterion,
    )


def _cmd_eval(args) -> int:
    from .evaluator import evaluate
    from .formats import SCHEMA, eval_input_from_file

    detections, gts, ignores = eval_input_from_file(args.infile)
    result = evaluate(detections, gts, _eval_config(args), ignores=ignores)
    document = {
        "schema": SCHEMA,
        "recall": result.recall,
        "precision": result.precision,
        "f_measure": result.f_measure,
        "tp": result.tp,
        "fp": result.fp,
        "fn": result.fn,
    }
    _emit(document, args.out)
    return 0


def _cmd_pr_curve(args) -> int:
    from .errors import ValidationError
    from .evaluator import EvalConfig, pr_curve
    from .formats import SCHEMA, eval_input_from_file

    detections, gts, ignores = eval_input_from_file(args.infile)
    if args.thresholds:
        try:
            thresholds = [float(t) for t in args.thresholds.split(",")]
        except ValueError as e:
            raise ValidationError(f"bad --thresholds list: {e}") from e
    else:
        thresholds = [i / args.steps for i in range(args.steps + 1)]
    config = EvalConfig(iou_threshold=args.iou_threshold, criterion=args.criterion)
    curve = pr_curve(detections, gts, config, thresholds, ignores=ignores)
    document = {
        "schema": SCHEMA,
        "curve": [
            {"threshold": t, "precision": p, "recall": r} for t, p, r in curve
        ],
    }
    _emit(document, args.out)
    return 0


def _cmd_tile_plan(args) -> int:
    from .formats import write_windows_csv
    from .tiler import TileSpec, plan_tiles

    spec = TileSpec(
        scene_h=args.scene_h,
        scene_w=args.scene_w,
        tile_h=args.tile_h,
        tile_w=args.tile_w,
        overlap_fraction=args.overlap,
    )
    windows = plan_tiles(spec)
    with _open_out(args.out) as fh:
        write_windows_csv(fh, windows)
    return 0


def _cmd_merge(args) -> int:
    from .errors import FormatError
    from .formats import SCHEMA, detection_to_dict, detections_from_file, read_windows_csv
    from .tiler import merge_scene

    windows = read_windows_csv(args.windows)
    per_tile = []
    for i in range(len(windows)):
        path = os.path.join(args.dets_dir, f"tile_{i}.json")
        if not os.path.exists(path):
            raise FormatError(f"missing per-tile detections file {path}")
        per_tile.append(detections_from_file(path))
    merged = merge_scene(per_tile, windows, nms_iou=args.iou)
    document = {"schema": SCHEMA, "detections": [detection_to_dict(d) for d in merged]}
    _emit(document, args.out)
    return 0


def _cmd_bench(args) -> int:
    from . import bench
    from .formats import SCHEMA

    if args.which == "iou":
        document = {"schema": SCHEMA, "iou": bench.bench_iou(seed=args.seed)}
    elif args.which == "nms":
        document = {"schema": SCHEMA, "nms": bench.bench_nms(seed=args.seed)}
    else:
        document = {"schema": SCHEMA, **bench.run_all(seed=args.seed)}
    _emit(document, args.out)
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rotbox", description="Rotated-box detection toolkit.")
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="cap BLAS threads (set before numpy is imported)",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add_out(p):
        p.add_argument("--out", default=None, help="write output here instead of stdout")

    p = sub.add_parser("iou", help="overlap of rotated boxes")
    p.add_argument("--a", help="box JSON object, or @file")
    p.add_argument("--b", help="box JSON object, or @file")
    p.add_argument("--batch-a", help='{"boxes": [...]} JSON file')
    p.add_argument("--batch-b", help='{"boxes": [...]} JSON file')
    add_out(p)
    p.set_defaults(func=_cmd_iou)

    p = sub.add_parser("nms", help="non-maximum suppression over scored boxes")
    p.add_argument("--in", dest="infile", required=True, help="detections JSON file")
    p.add_argument("--iou", type=float, default=0.7)
    p.add_argument("--mode", choices=["rotated", "hrect"], default="rotated")
    p.add_argument("--pre-topk", type=int, default=12000)
    p.add_argument("--post-topk", type=int, default=1200)
    add_out(p)
    p.set_defaults(func=_cmd_nms)

    p = sub.add_parser("anchors", help="emit the anchor lattice for an image size")
    p.add_argument("--image-size", type=int, nargs=2, metavar=("H", "W"), required=True)
    p.add_argument("--config", help="anchor config JSON file")
    p.add_argument("--summary", action="store_true", help="print counts instead of CSV")
    add_out(p)
    p.set_defaults(func=_cmd_anchors)

    p = sub.add_parser("encode", help="regression targets for anchor/target box pairs")
    p.add_argument("--anchors", required=True)
    p.add_argument("--targets", required=True)
    add_out(p)
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("decode", help="apply regression deltas to anchors")
    p.add_argument("--anchors", required=True)
    p.add_argument("--deltas", required=True)
    p.add_argument("--clamp", type=float, default=8.0, help="cap |t_w|,|t_h| here")
    p.add_argument("--no-clamp", action="store_true", help="fail on overflow instead")
    add_out(p)
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("assign", help="label anchors against ground-truth boxes")
    p.add_argument("--anchors", required=True, help="boxes JSON or anchors CSV")
    p.add_argument("--gts", required=True, help='{"boxes": [...]} JSON file')
    p.add_argument("--pos-iou", type=float, default=0.5)
    p.add_argument("--neg-iou", type=float, default=0.2)
    p.add_argument("--max-angle-diff", type=float, default=15.0)
    add_out(p)
    p.set_defaults(func=_cmd_assign)

    p = sub.add_parser("sample", help="draw a training minibatch from assignments")
    p.add_argument("--assignments", required=True, help="assignments CSV file")
    p.add_argument("--batch-size", type=int, default=512)
    p.add_argument("--pos-fraction", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    add_out(p)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("loss", help="multi-task loss over a batch file")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--n-cls", type=int, default=None)
    p.add_argument("--n-reg", type=int, default=None)
    add_out(p)
    p.set_defaults(func=_cmd_loss)

    p = sub.add_parser("dfpn-forward", help="run the dense pyramid over C2..C5 tensors")
    p.add_argument("--c2", required=True)
    p.add_argument("--c3", required=True)
    p.add_argument("--c4", required=True)
    p.add_argument("--c5", required=True)
    p.add_argument("--weights", help="weights directory")
    p.add_argument("--seed", type=int, default=None, help="random weights from this seed")
    p.add_argument("--save-weights", help="save seeded weights here")
    p.add_argument("--reuse", choices=["lateral", "smoothed"], default="lateral")
    p.add_argument("--out-prefix", required=True, help="output tensors at PREFIXp<level>.rbt")
    add_out(p)
    p.set_defaults(func=_cmd_dfpn_forward)

    p = sub.add_parser("roialign", help="pool a proposal from a feature tensor")
    p.add_argument("--feature", required=True, help="feature tensor (.rbt)")
    p.add_argument("--proposal", required=True, help="box JSON object, or @file")
    p.add_argument("--stride", type=float, required=True)
    p.add_argument("--out-h", type=int, default=7)
    p.add_argument("--out-w", type=int, default=7)
    p.add_argument("--samples", type=int, default=2)
    p.add_argument("--out-tensor", help="also write the pooled tensor here (.rbt)")
    add_out(p)
    p.set_defaults(func=_cmd_roialign)

    p = sub.add_parser("eval", help="precision/recall over an evaluation file")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--iou-threshold", type=float, default=0.5)
    p.add_argument("--score-threshold", type=float, default=0.5)
    p.add_argument("--criterion", choices=["rotated", "circumscribed"], default="rotated")
    add_out(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("pr-curve", help="precision/recall across score thresholds")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--thresholds", help="comma-separated score thresholds")
    p.add_argument("--steps", type=int, default=20, help="even grid size when no list given")
    p.add_argument("--iou-threshold", type=float, default=0.5)
    p.add_argument("--criterion", choices=["rotated", "circumscribed"], default="rotated")
    add_out(p)
    p.set_defaults(func=_cmd_pr_curve)

    p = sub.add_parser("tile-plan", help="sliding-window layout for a large scene")
    p.add_argument("--scene-h", type=int, required=True)
    p.add_argument("--scene-w", type=int, required=True)
    p.add_argument("--tile-h", type=int, default=600)
    p.add_argument("--tile-w", type=int, default=1000)
    p.add_argument("--overlap", type=float, default=0.1)
    add_out(p)
    p.set_defaults(func=_cmd_tile_plan)

    p = sub.add_parser("merge", help="fuse per-tile detections back into the scene")
    p.add_argument("--windows", required=True, help="windows CSV from tile-plan")
    p.add_argument("--dets-dir", required=True, help="directory of tile_<index>.json files")
    p.add_argument("--iou", type=float, default=0.3)
    add_out(p)
    p.set_defaults(func=_cmd_merge)

    p = sub.add_parser("bench", help="geometry kernel micro-benchmarks")
    p.add_argument("--which", choices=["iou", "nms", "all"], default="all")
    p.add_argument("--seed", type=int, default=0)
    add_out(p)
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("error code=usage: --threads must be >= 1", file=sys.stderr)
            return 2
        for var in _THREAD_VARS:
            os.environ.setdefault(var, str(args.threads))
    from .errors import RotboxError

    try:
        return args.func(args)
    except RotboxError as e:
        print(f"error code={e.code}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
