"""Delta encoding between anchors and target boxes.

Offsets are normalized by the anchor sides, sizes are log-ratios, and the
angle residual is wrapped into [-45, 45] by choosing the integer k minimizing
|theta* - theta_a + 90k| (ties prefer smaller |k|, then negative k).  When k
is odd the target's sides swap roles before the log-ratios, matching the
90-degree role change of w and h.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DecodeOverflowError, ValidationError
from .geom import RotatedBox, canonicalize


@dataclass(frozen=True)
class DeltaVector:
    """Regression target (t_x, t_y, t_w, t_h, t_theta); t_theta in degrees."""

    t_x: float
    t_y: float
    t_w: float
    t_h: float
    t_theta: float

    def __post_init__(self):
        for name in ("t_x", "t_y", "t_w", "t_h", "t_theta"):
            value = float(getattr(self, name))
            object.__setattr__(self, name, value)
            if not math.isfinite(value):
                raise ValidationError(f"non-finite delta component {name}={value!r}")

    def astuple(self) -> tuple[float, float, float, float, float]:
        return (self.t_x, self.t_y, self.t_w, self.t_h, self.t_theta)


def angle_wrap_k(diff: float) -> int:
    """The k minimizing |diff + 90k| for diff in (-90, 90); ties pick k = 0."""
    if diff > 45.0:
        return -1
    if diff < -45.0:
        return 1
    return 0


def encode(anchor: RotatedBox, target: RotatedBox) -> DeltaVector:
    """Deltas that regress ``anchor`` onto ``target``."""
    diff = target.theta - anchor.theta
    k = angle_wrap_k(diff)
    t_theta = diff + 90.0 * k
    if k % 2:
        tw, th = target.h, target.w
    else:
        tw, th = target.w, target.h
    return DeltaVector(
        (target.x - anchor.x) / anchor.w,
        (target.y - anchor.y) / anchor.h,
        math.log(tw / anchor.w),
        math.log(th / anchor.h),
        t_theta,
    )


OVERFLOW_LIMIT = 8.0


def decode(
    anchor: RotatedBox, delta: DeltaVector, clamp: float | None = OVERFLOW_LIMIT
) -> RotatedBox:
    """Apply ``delta`` to ``anchor``; the result is canonicalized.

    ``clamp`` saturates t_w/t_h before exponentiation (default +-8).  With
    ``clamp=None`` a size component beyond the overflow limit raises
    :class:`DecodeOverflowError` naming the component instead.
    """
    t_w, t_h = delta.t_w, delta.t_h
    if clamp is not None:
        t_w = min(max(t_w, -clamp), clamp)
        t_h = min(max(t_h, -clamp), clamp)
    elif abs(t_w) > OVERFLOW_LIMIT:
        raise DecodeOverflowError("t_w")
    elif abs(t_h) > OVERFLOW_LIMIT:
        raise DecodeOverflowError("t_h")
    w = anchor.w * math.exp(t_w)
    h = anchor.h * math.exp(t_h)
    x = delta.t_x * anchor.w + anchor.x
    y = delta.t_y * anchor.h + anchor.y
    return canonicalize(x, y, w, h, anchor.theta + delta.t_theta)


def angle_difference(theta_a: float, theta_b: float) -> float:
    """Minimal angular separation |diff + 90k| between two canonical angles."""
    diff = theta_b - theta_a
    return abs(diff + 90.0 * angle_wrap_k(diff))
