"""Rotated-box geometry: canonical form, corners, polygon clipping, skew IoU.

Conventions used across the package (image coordinates, x = column, y = row,
origin at the top-left):

* a rotated box is ``(x, y, w, h, theta)`` with center ``(x, y)``, side
  lengths ``w, h > 0`` and ``theta`` in degrees restricted to ``[-90, 0)``;
* the width direction is ``u = (cos t, sin t)`` and the height direction
  ``v = (-sin t, cos t)`` with ``t = radians(theta)``, so the corners are
  ``center +- (w/2) u +- (h/2) v``;
* ``(x, y, w, h, theta)``, ``(x, y, h, w, theta + 90)`` and
  ``(x, y, w, h, theta + 180)`` describe the same point set; canonicalization
  picks the unique representative with ``theta`` in ``[-90, 0)``.

Skew IoU clips one corner quadrilateral by the half-planes of the other
(Sutherland-Hodgman) and measures areas with the shoelace formula.  The hot
path is a vectorized kernel over ``(n, 5)`` float arrays; the scalar API is a
singleton call into the same kernel so batched and one-off results are
bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidBoxError, ShapeError

# Points within this distance of a clipping line count as lying on the line.
LINE_TOL = 1e-9
# Consecutive polygon vertices closer than this (per coordinate) are merged.
DEDUP_TOL = 1e-9
# Intersection areas below this many px^2 report IoU 0 (edge/corner contact).
CONTACT_AREA_TOL = 1e-9


@dataclass(frozen=True)
class RotatedBox:
    """Five-parameter oriented rectangle in canonical form.

    The constructor enforces the canonical contract: finite fields, positive
    sides and ``theta`` in ``[-90, 0)``.  Build from an unrestricted angle
    with :func:`canonicalize`.
    """

    x: float
    y: float
    w: float
    h: float
    theta: float

    def __post_init__(self):
        for name in ("x", "y", "w", "h", "theta"):
            value = float(getattr(self, name))
            object.__setattr__(self, name, value)
            if not math.isfinite(value):
                raise InvalidBoxError(f"non-finite box field {name}={value!r}")
        if self.w <= 0.0 or self.h <= 0.0:
            raise InvalidBoxError(f"non-positive box size w={self.w}, h={self.h}")
        if not (-90.0 <= self.theta < 0.0):
            raise InvalidBoxError(
                f"theta={self.theta} outside [-90, 0); use canonicalize()"
            )

    @property
    def area(self) -> float:
        return self.w * self.h

    def astuple(self) -> tuple[float, float, float, float, float]:
        return (self.x, self.y, self.w, self.h, self.theta)


@dataclass(frozen=True)
class HRect:
    """Axis-aligned rectangle as half-open extents ``[xmin, xmax] x [ymin, ymax]``."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        for name in ("xmin", "ymin", "xmax", "ymax"):
            value = float(getattr(self, name))
            object.__setattr__(self, name, value)
            if not math.isfinite(value):
                raise InvalidBoxError(f"non-finite rect field {name}={value!r}")
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise InvalidBoxError(
                f"empty rect ({self.xmin},{self.ymin},{self.xmax},{self.ymax})"
            )

    @property
    def w(self) -> float:
        return self.xmax - self.xmin

    @property
    def h(self) -> float:
        return self.ymax - self.ymin

    @property
    def area(self) -> float:
        return self.w * self.h


@dataclass(frozen=True)
class ConvexPolygon:
    """Convex polygon, vertices counterclockwise (positive shoelace sum).

    An empty vertex tuple means an empty intersection; a polygon may also be
    degenerate (fewer than 3 distinct vertices) with zero area, which is how
    tangential box contact is represented.
    """

    vertices: tuple[tuple[float, float], ...]

    @property
    def area(self) -> float:
        return shoelace_area(self.vertices)

    @property
    def is_empty(self) -> bool:
        return self.area == 0.0


def shoelace_area(vertices: Sequence[tuple[float, float]]) -> float:
    """Polygon area via the shoelace formula (counterclockwise => positive)."""
    n = len(vertices)
    if n < 3:
        return 0.0
    total = 0.0
    for i in range(n):
        x0, y0 = vertices[i]
        x1, y1 = vertices[(i + 1) % n]
        total += x0 * y1 - x1 * y0
    return max(total, 0.0) * 0.5


def canonicalize(x: float, y: float, w: float, h: float, theta: float) -> RotatedBox:
    """Build the canonical box for arbitrary ``theta``.

    ``theta`` is reduced modulo 180 degrees; landing in ``[0, 90)`` swaps
    ``w``/``h`` and subtracts 90 so the result is always in ``[-90, 0)``.
    Inputs already in range are returned untouched (bit-exact idempotence).
    """
    for name, value in (("x", x), ("y", y), ("w", w), ("h", h), ("theta", theta)):
        if not math.isfinite(float(value)):
            raise InvalidBoxError(f"non-finite box field {name}={value!r}")
    if w <= 0.0 or h <= 0.0:
        raise InvalidBoxError(f"non-positive box size w={w}, h={h}")
    if -90.0 <= theta < 0.0:
        return RotatedBox(x, y, w, h, theta)
    t = ((float(theta) + 90.0) % 180.0) - 90.0
    if t == 90.0:  # modulo rounding at the boundary: 180-degree-equivalent
        t = -90.0
    if t >= 0.0:
        return RotatedBox(x, y, h, w, t - 90.0)
    return RotatedBox(x, y, w, h, t)


def corners(box: RotatedBox) -> ConvexPolygon:
    """Corner quadrilateral of ``box``, counterclockwise."""
    t = math.radians(box.theta)
    c, s = math.cos(t), math.sin(t)
    ax, ay = 0.5 * box.w * c, 0.5 * box.w * s
    bx, by = -0.5 * box.h * s, 0.5 * box.h * c
    return ConvexPolygon(
        (
            (box.x + ax + bx, box.y + ay + by),
            (box.x - ax + bx, box.y - ay + by),
            (box.x - ax - bx, box.y - ay - by),
            (box.x + ax - bx, box.y + ay - by),
        )
    )


def hrect(box: RotatedBox) -> HRect:
    """Minimal axis-aligned rectangle circumscribing ``box``."""
    pts = corners(box).vertices
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    return HRect(min(xs), min(ys), max(xs), max(ys))


def _edge_side(cp1, cp2, p) -> float:
    # > 0 when p lies left of cp1->cp2, i.e. inside for a counterclockwise clip.
    return (cp2[0] - cp1[0]) * (p[1] - cp1[1]) - (cp2[1] - cp1[1]) * (p[0] - cp1[0])


def intersect_convex(a: ConvexPolygon, b: ConvexPolygon) -> ConvexPolygon:
    """Clip polygon ``a`` by every half-plane of convex polygon ``b``.

    Points within ``LINE_TOL`` of a clip line are treated as on the line and
    kept, so tangential contact yields a degenerate zero-area polygon rather
    than nothing.  Consecutive output vertices closer than ``DEDUP_TOL`` are
    merged.
    """
    subject = list(a.vertices)
    clip = b.vertices
    if len(subject) < 3 or len(clip) < 3:
        return ConvexPolygon(())
    for k in range(len(clip)):
        cp1 = clip[k]
        cp2 = clip[(k + 1) % len(clip)]
        output: list[tuple[float, float]] = []
        for j, e in enumerate(subject):
            s = subject[j - 1]
            d_s = _edge_side(cp1, cp2, s)
            d_e = _edge_side(cp1, cp2, e)
            e_in = d_e >= -LINE_TOL
            s_in = d_s >= -LINE_TOL
            if e_in != s_in:
                t = d_s / (d_s - d_e)
                output.append((s[0] + t * (e[0] - s[0]), s[1] + t * (e[1] - s[1])))
            if e_in:
                output.append(e)
        subject = output
        if not subject:
            return ConvexPolygon(())
    deduped: list[tuple[float, float]] = []
    for p in subject:
        q = deduped[-1] if deduped else None
        if q is not None and abs(p[0] - q[0]) <= DEDUP_TOL and abs(p[1] - q[1]) <= DEDUP_TOL:
            continue
        deduped.append(p)
    while (
        len(deduped) > 1
        and abs(deduped[0][0] - deduped[-1][0]) <= DEDUP_TOL
        and abs(deduped[0][1] - deduped[-1][1]) <= DEDUP_TOL
    ):
        deduped.pop()
    return ConvexPolygon(tuple(deduped))


# ---------------------------------------------------------------------------
# Vectorized kernel over (n, 5) parameter arrays.
# ---------------------------------------------------------------------------

def as_box_array(boxes) -> np.ndarray:
    """Coerce a box list / array to a validated float64 (n, 5) array."""
    if isinstance(boxes, np.ndarray):
        arr = np.asarray(boxes, dtype=np.float64)
    else:
        arr = np.asarray(
            [b.astuple() if isinstance(b, RotatedBox) else tuple(b) for b in boxes],
            dtype=np.float64,
        )
        if arr.size == 0:
            arr = arr.reshape(0, 5)
    if arr.ndim != 2 or arr.shape[1] != 5:
        raise ShapeError(f"expected (n, 5) box array, got shape {arr.shape}")
    return arr


def canonicalize_array(boxes) -> np.ndarray:
    """Vectorized :func:`canonicalize` over an (n, 5) array."""
    arr = as_box_array(boxes).copy()
    if not np.isfinite(arr).all():
        raise InvalidBoxError("non-finite box parameters in array")
    if arr.size and ((arr[:, 2] <= 0) | (arr[:, 3] <= 0)).any():
        raise InvalidBoxError("non-positive box sizes in array")
    if arr.size == 0:
        return arr
    theta = arr[:, 4]
    canon = (theta >= -90.0) & (theta < 0.0)
    t = np.mod(theta + 90.0, 180.0) - 90.0
    t = np.where(t == 90.0, -90.0, t)
    swap = ~canon & (t >= 0.0)
    w = np.where(swap, arr[:, 3], arr[:, 2])
    h = np.where(swap, arr[:, 2], arr[:, 3])
    new_theta = np.where(canon, theta, np.where(swap, t - 90.0, t))
    arr[:, 2] = w
    arr[:, 3] = h
    arr[:, 4] = new_theta
    return arr


def corners_array(boxes) -> np.ndarray:
    """Corner quadrilaterals for an (n, 5) array -> (n, 4, 2), counterclockwise."""
    arr = as_box_array(boxes)
    t = np.radians(arr[:, 4])
    c, s = np.cos(t), np.sin(t)
    ax, ay = 0.5 * arr[:, 2] * c, 0.5 * arr[:, 2] * s
    bx, by = -0.5 * arr[:, 3] * s, 0.5 * arr[:, 3] * c
    out = np.empty((arr.shape[0], 4, 2), dtype=np.float64)
    out[:, 0, 0] = arr[:, 0] + ax + bx
    out[:, 0, 1] = arr[:, 1] + ay + by
    out[:, 1, 0] = arr[:, 0] - ax + bx
    out[:, 1, 1] = arr[:, 1] - ay + by
    out[:, 2, 0] = arr[:, 0] - ax - bx
    out[:, 2, 1] = arr[:, 1] - ay - by
    out[:, 3, 0] = arr[:, 0] + ax - bx
    out[:, 3, 1] = arr[:, 1] + ay - by
    return out


def _shoelace_areas(pts: np.ndarray, cnt: np.ndarray) -> np.ndarray:
    # pts (m, k, 2) with cnt valid leading slots per row; sequential slot-order
    # accumulation keeps singleton and batched calls bit-identical.
    m, k = pts.shape[0], pts.shape[1]
    slots = np.arange(k)
    nxt = np.where(slots[None, :] + 1 == cnt[:, None], 0, slots[None, :] + 1)
    nxt = np.clip(nxt, 0, k - 1)
    x, y = pts[:, :, 0], pts[:, :, 1]
    xn = np.take_along_axis(x, nxt, axis=1)
    yn = np.take_along_axis(y, nxt, axis=1)
    valid = slots[None, :] < cnt[:, None]
    terms = np.where(valid, x * yn - xn * y, 0.0)
    total = terms[:, 0].copy()
    for j in range(1, k):
        total = total + terms[:, j]
    return np.maximum(total, 0.0) * 0.5


def _quad_areas(quads: np.ndarray) -> np.ndarray:
    pts = np.zeros((quads.shape[0], 8, 2), dtype=np.float64)
    pts[:, :4] = quads
    return _shoelace_areas(pts, np.full(quads.shape[0], 4, dtype=np.int64))


def _intersection_areas(corners_a: np.ndarray, corners_b: np.ndarray) -> np.ndarray:
    """Areas of the pairwise quad intersections, vectorized Sutherland-Hodgman."""
    m = corners_a.shape[0]
    if m == 0:
        return np.zeros(0, dtype=np.float64)
    pts = np.zeros((m, 8, 2), dtype=np.float64)
    pts[:, :4] = corners_a
    cnt = np.full(m, 4, dtype=np.int64)
    slots = np.arange(8)
    rows = np.broadcast_to(np.arange(m)[:, None], (m, 8))
    for k in range(4):
        cp1 = corners_b[:, k]
        cp2 = corners_b[:, (k + 1) % 4]
        ex = (cp2[:, 0] - cp1[:, 0])[:, None]
        ey = (cp2[:, 1] - cp1[:, 1])[:, None]
        d = ex * (pts[:, :, 1] - cp1[:, 1][:, None]) - ey * (pts[:, :, 0] - cp1[:, 0][:, None])
        valid = slots[None, :] < cnt[:, None]
        prev = np.where(slots[None, :] == 0, cnt[:, None] - 1, slots[None, :] - 1)
        prev = np.clip(prev, 0, 7)
        d_s = np.take_along_axis(d, prev, axis=1)
        e_in = (d >= -LINE_TOL) & valid
        s_in = d_s >= -LINE_TOL
        crossing = ((d >= -LINE_TOL) != s_in) & valid
        emit = e_in.astype(np.int64) + crossing
        # Convexity bounds output size at n+1 <= 8; the min() guards are pure
        # insurance against tolerance-degenerate slivers.
        pos = np.minimum(np.cumsum(emit, axis=1) - emit, 7)
        s_pts = np.take_along_axis(pts, prev[:, :, None], axis=1)
        denom = np.where(crossing, d_s - d, 1.0)
        t = np.where(crossing, d_s / denom, 0.0)
        x_pts = s_pts + t[:, :, None] * (pts - s_pts)
        new_pts = np.zeros_like(pts)
        new_pts[rows[crossing], pos[crossing]] = x_pts[crossing]
        e_pos = np.minimum(pos + crossing, 7)
        new_pts[rows[e_in], e_pos[e_in]] = pts[e_in]
        pts = new_pts
        cnt = emit[:, 0].copy()
        for j in range(1, 8):
            cnt = cnt + emit[:, j]
        cnt = np.minimum(cnt, 8)
        if not cnt.any():
            break
    areas = _shoelace_areas(pts, cnt)
    areas[areas < CONTACT_AREA_TOL] = 0.0
    return areas


def _corner_bounds(quads: np.ndarray) -> np.ndarray:
    # (m, 4): xmin, ymin, xmax, ymax
    lo = quads.min(axis=1)
    hi = quads.max(axis=1)
    return np.concatenate([lo, hi], axis=1)


def _bounds_overlap(ba: np.ndarray, bb: np.ndarray) -> np.ndarray:
    return (
        (ba[:, 0] < bb[:, 2])
        & (bb[:, 0] < ba[:, 2])
        & (ba[:, 1] < bb[:, 3])
        & (bb[:, 1] < ba[:, 3])
    )


def _order_pairs(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Swap each pair into lexicographic order on (x, y, w, h, theta) so that
    # skew_iou(a, b) and skew_iou(b, a) run the identical computation.
    m = a.shape[0]
    swap = np.zeros(m, dtype=bool)
    decided = np.zeros(m, dtype=bool)
    for c in range(5):
        lt = ~decided & (b[:, c] < a[:, c])
        gt = ~decided & (a[:, c] < b[:, c])
        swap |= lt
        decided |= lt | gt
    first = np.where(swap[:, None], b, a)
    second = np.where(swap[:, None], a, b)
    return first, second


def skew_iou_pairs(boxes_a, boxes_b) -> np.ndarray:
    """Elementwise skew IoU of paired (n, 5) canonical box arrays."""
    a = as_box_array(boxes_a)
    b = as_box_array(boxes_b)
    if a.shape != b.shape:
        raise ShapeError(f"paired box arrays differ in shape: {a.shape} vs {b.shape}")
    if a.shape[0] == 0:
        return np.zeros(0, dtype=np.float64)
    a, b = _order_pairs(a, b)
    ca = corners_array(a)
    cb = corners_array(b)
    area_a = _quad_areas(ca)
    area_b = _quad_areas(cb)
    inter = np.zeros(a.shape[0], dtype=np.float64)
    mask = _bounds_overlap(_corner_bounds(ca), _corner_bounds(cb))
    if mask.any():
        inter[mask] = _intersection_areas(ca[mask], cb[mask])
    union = area_a + area_b - inter
    iou = np.where(union > 0.0, inter / np.where(union > 0.0, union, 1.0), 0.0)
    return np.clip(iou, 0.0, 1.0)


def pairwise_skew_iou(boxes_a, boxes_b, chunk: int = 2_000_000) -> np.ndarray:
    """Full (n, m) skew-IoU matrix between two canonical box arrays."""
    a = as_box_array(boxes_a)
    b = as_box_array(boxes_b)
    n, m = a.shape[0], b.shape[0]
    out = np.zeros((n, m), dtype=np.float64)
    if n == 0 or m == 0:
        return out
    rows_per_chunk = max(1, chunk // max(m, 1))
    for start in range(0, n, rows_per_chunk):
        stop = min(start + rows_per_chunk, n)
        block = stop - start
        aa = np.repeat(a[start:stop], m, axis=0)
        bb = np.tile(b, (block, 1))
        out[start:stop] = skew_iou_pairs(aa, bb).reshape(block, m)
    return out


def skew_iou(a: RotatedBox, b: RotatedBox) -> float:
    """Intersection-over-union of two rotated boxes (symmetric, in [0, 1])."""
    arr_a = np.array([a.astuple()], dtype=np.float64)
    arr_b = np.array([b.astuple()], dtype=np.float64)
    return float(skew_iou_pairs(arr_a, arr_b)[0])


def hrect_iou(a: HRect, b: HRect) -> float:
    """IoU of two axis-aligned rectangles (closed form)."""
    iw = min(a.xmax, b.xmax) - max(a.xmin, b.xmin)
    ih = min(a.ymax, b.ymax) - max(a.ymin, b.ymin)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def hrect_iou_pairs(bounds_a: np.ndarray, bounds_b: np.ndarray) -> np.ndarray:
    """Elementwise IoU of paired (n, 4) [xmin, ymin, xmax, ymax] arrays."""
    iw = np.minimum(bounds_a[:, 2], bounds_b[:, 2]) - np.maximum(bounds_a[:, 0], bounds_b[:, 0])
    ih = np.minimum(bounds_a[:, 3], bounds_b[:, 3]) - np.maximum(bounds_a[:, 1], bounds_b[:, 1])
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    area_a = (bounds_a[:, 2] - bounds_a[:, 0]) * (bounds_a[:, 3] - bounds_a[:, 1])
    area_b = (bounds_b[:, 2] - bounds_b[:, 0]) * (bounds_b[:, 3] - bounds_b[:, 1])
    union = area_a + area_b - inter
    return np.where(union > 0.0, inter / np.where(union > 0.0, union, 1.0), 0.0)


def hrect_bounds_array(boxes) -> np.ndarray:
    """Circumscribed-rectangle bounds for an (n, 5) array -> (n, 4)."""
    return _corner_bounds(corners_array(boxes))
