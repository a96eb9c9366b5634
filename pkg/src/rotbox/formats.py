"""JSON/CSV wire formats shared by the command-line tools.

Every JSON document carries ``"schema": "rotbox/1"`` on output.  Box objects
are ``{"x", "y", "w", "h", "theta"}`` (canonical angle on output; arbitrary
angles are canonicalized on ingestion).  Coordinates are x = column, y = row,
origin at the top-left; CSV files state this in a leading comment line.
"""

from __future__ import annotations

import csv
import json
from typing import Iterable, Sequence

from .coder import DeltaVector
from .errors import FormatError
from .evaluator import Detection
from .geom import HRect, RotatedBox, canonicalize

SCHEMA = "rotbox/1"
COORD_NOTE = "# coords: x=column, y=row, origin top-left"

BOX_KEYS = ("x", "y", "w", "h", "theta")
DELTA_KEYS = ("t_x", "t_y", "t_w", "t_h", "t_theta")


def box_to_dict(box: RotatedBox) -> dict:
    return {k: getattr(box, k) for k in BOX_KEYS}


def box_from_dict(data: dict) -> RotatedBox:
    try:
        return canonicalize(*(float(data[k]) for k in BOX_KEYS))
    except KeyError as e:
        raise FormatError(f"box object missing key {e.args[0]!r}") from e
    except (TypeError, ValueError) as e:
        raise FormatError(f"bad box object {data!r}: {e}") from e


def delta_to_dict(delta: DeltaVector) -> dict:
    return {k: getattr(delta, k) for k in DELTA_KEYS}


def delta_from_dict(data: dict) -> DeltaVector:
    try:
        return DeltaVector(*(float(data[k]) for k in DELTA_KEYS))
    except KeyError as e:
        raise FormatError(f"delta object missing key {e.args[0]!r}") from e
    except (TypeError, ValueError) as e:
        raise FormatError(f"bad delta object {data!r}: {e}") from e


def load_json(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as e:
        raise FormatError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: invalid JSON ({e})") from e
    if not isinstance(data, dict):
        raise FormatError(f"{path}: expected a JSON object at the top level")
    return data


def boxes_from_file(path) -> list[RotatedBox]:
    data = load_json(path)
    if "boxes" not in data or not isinstance(data["boxes"], list):
        raise FormatError(f'{path}: expected {{"boxes": [...]}}')
    return [box_from_dict(b) for b in data["boxes"]]


def detections_from_file(path) -> list[Detection]:
    data = load_json(path)
    if "detections" not in data or not isinstance(data["detections"], list):
        raise FormatError(f'{path}: expected {{"detections": [...]}}')
    out = []
    for i, entry in enumerate(data["detections"]):
        try:
            box = box_from_dict(entry["box"])
            score = float(entry["score"])
            image_id = str(entry.get("image_id", "0"))
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"{path}: detection {i}: {e}") from e
        out.append(Detection(box, score, image_id))
    return out


def detection_to_dict(det: Detection) -> dict:
    return {"box": box_to_dict(det.box), "score": det.score, "image_id": det.image_id}


def detections_document(dets: Sequence[Detection]) -> dict:
    return {"schema": SCHEMA, "detections": [detection_to_dict(d) for d in dets]}


def eval_input_from_file(path):
    """-> (detections, gts by image, ignores by image)."""
    data = load_json(path)
    if "images" not in data or not isinstance(data["images"], list):
        raise FormatError(f'{path}: expected {{"images": [...]}}')
    detections: list[Detection] = []
    gts: dict[str, list[RotatedBox]] = {}
    ignores: dict[str, list[RotatedBox]] = {}
    for i, image in enumerate(data["images"]):
        try:
            image_id = str(image["id"])
            gts[image_id] = [box_from_dict(b) for b in image.get("gts", [])]
            if image.get("ignores"):
                ignores[image_id] = [box_from_dict(b) for b in image["ignores"]]
            for d in image.get("dets", []):
                detections.append(Detection(box_from_dict(d["box"]), float(d["score"]), image_id))
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"{path}: image entry {i}: {e}") from e
    return detections, gts, ignores


def write_windows_csv(fh, windows: Sequence[HRect]) -> None:
    fh.write(COORD_NOTE + "\n")
    writer = csv.writer(fh)
    writer.writerow(["index", "xmin", "ymin", "xmax", "ymax"])
    for i, w in enumerate(windows):
        writer.writerow([i, repr(w.xmin), repr(w.ymin), repr(w.xmax), repr(w.ymax)])


def read_windows_csv(path) -> list[HRect]:
    windows = []
    try:
        with open(path) as fh:
            rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
    except OSError as e:
        raise FormatError(f"cannot read {path}: {e}") from e
    if not rows or rows[0][:5] != ["index", "xmin", "ymin", "xmax", "ymax"]:
        raise FormatError(f"{path}: expected a windows CSV header")
    for row in rows[1:]:
        if not row:
            continue
        try:
            windows.append(HRect(*(float(v) for v in row[1:5])))
        except (TypeError, ValueError) as e:
            raise FormatError(f"{path}: bad window row {row!r}: {e}") from e
    return windows


def write_assignments_csv(fh, assignments) -> None:
    writer = csv.writer(fh)
    writer.writerow(["index", "label", "matched_gt", "iou"])
    for i, a in enumerate(assignments):
        writer.writerow([i, a.label, "" if a.matched_gt is None else a.matched_gt, repr(a.iou)])


def read_assignments_csv(path):
    from .matcher import Assignment

    try:
        with open(path) as fh:
            rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
    except OSError as e:
        raise FormatError(f"cannot read {path}: {e}") from e
    if not rows or rows[0][:4] != ["index", "label", "matched_gt", "iou"]:
        raise FormatError(f"{path}: expected an assignments CSV header")
    out = []
    for row in rows[1:]:
        if not row:
            continue
        try:
            out.append(
                Assignment(row[1], int(row[2]) if row[2] else None, float(row[3]))
            )
        except (TypeError, ValueError, IndexError) as e:
            raise FormatError(f"{path}: bad assignment row {row!r}: {e}") from e
    return out


def write_anchors_csv(fh, config, grids) -> None:
    """Stream the anchor lattice as level,row,col,x,y,w,h,theta rows."""
    from .anchors import generate_level_array

    fh.write(COORD_NOTE + "\n")
    writer = csv.writer(fh)
    writer.writerow(["level", "row", "col", "x", "y", "w", "h", "theta"])
    a = config.anchors_per_location
    for level, (gh, gw) in sorted(grids, key=lambda g: g[0]):
        arr = generate_level_array(config, level, gh, gw)
        for i, row in enumerate(arr):
            cell = i // a
            writer.writerow(
                [level, cell // gw, cell % gw] + [repr(float(v)) for v in row]
            )


def read_anchor_boxes_csv(path) -> list[RotatedBox]:
    try:
        with open(path) as fh:
            rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
    except OSError as e:
        raise FormatError(f"cannot read {path}: {e}") from e
    if not rows or "x" not in rows[0]:
        raise FormatError(f"{path}: expected an anchors CSV header")
    ix = rows[0].index("x")
    out = []
    for row in rows[1:]:
        if not row:
            continue
        try:
            out.append(canonicalize(*(float(v) for v in row[ix : ix + 5])))
        except (TypeError, ValueError) as e:
            raise FormatError(f"{path}: bad anchor row {row!r}: {e}") from e
    return out


def iter_jsonl(fh) -> Iterable[dict]:
    for lineno, line in enumerate(fh, 1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise FormatError(f"line {lineno}: invalid JSON ({e})") from e
        if not isinstance(obj, dict):
            raise FormatError(f"line {lineno}: expected a JSON object")
        yield obj
