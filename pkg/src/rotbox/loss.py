"""Two-term detection loss: cross-entropy plus smooth-L1 on box deltas.

``total = cls_loss / n_cls + lam * reg_loss / n_reg`` where the regression
sum runs over positive entries only.  Angle residuals are divided by
``angle_residual_unit`` (default 90, the wrap period of the parameterization)
before entering smooth-L1 so all five components live on comparable scales.
Summation order over the batch and over components is fixed (index order).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .coder import DeltaVector
from .errors import ConfigError, ValidationError

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class LossConfig:
    lam: float = 1.0
    n_cls: int | None = None
    n_reg: int | None = None
    angle_residual_unit: float = 90.0

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigError(f"negative balance weight {self.lam}")
        if self.n_cls is not None and self.n_cls < 1:
            raise ConfigError(f"n_cls must be >= 1, got {self.n_cls}")
        if self.n_reg is not None and self.n_reg < 1:
            raise ConfigError(f"n_reg must be >= 1, got {self.n_reg}")
        if self.angle_residual_unit <= 0:
            raise ConfigError(f"non-positive angle_residual_unit {self.angle_residual_unit}")


@dataclass(frozen=True)
class LossEntry:
    """One anchor's contribution: class probabilities plus optional deltas."""

    probs: tuple[float, ...]
    label: int
    pred: DeltaVector | None = None
    target: DeltaVector | None = None
    is_positive: bool = False


@dataclass(frozen=True)
class LossBreakdown:
    cls_loss: float
    reg_loss: float
    total: float
    n_cls: int
    n_reg: int


def cross_entropy(probs: Sequence[float], label: int) -> float:
    """Negative log probability of ``label`` with a 1e-12 floor."""
    p = [float(v) for v in probs]
    if not p:
        raise ValidationError("empty probability vector")
    if any(v < 0.0 or not math.isfinite(v) for v in p):
        raise ValidationError(f"probabilities must be finite and >= 0, got {p}")
    if abs(sum(p) - 1.0) > 1e-6:
        raise ValidationError(f"probabilities sum to {sum(p)}, expected 1 within 1e-6")
    if not (0 <= label < len(p)):
        raise ValidationError(f"label {label} out of range for {len(p)} classes")
    return -math.log(max(p[label], PROB_FLOOR))


def smooth_l1(x: float) -> float:
    """0.5 x^2 inside |x| < 1, |x| - 0.5 outside (continuous at |x| = 1)."""
    ax = abs(x)
    if ax < 1.0:
        return 0.5 * x * x
    return ax - 0.5


def _reg_term(pred: DeltaVector, target: DeltaVector, angle_unit: float) -> float:
    total = 0.0
    total += smooth_l1(target.t_x - pred.t_x)
    total += smooth_l1(target.t_y - pred.t_y)
    total += smooth_l1(target.t_w - pred.t_w)
    total += smooth_l1(target.t_h - pred.t_h)
    total += smooth_l1((target.t_theta - pred.t_theta) / angle_unit)
    return total


def multitask_loss(entries: Sequence[LossEntry], config: LossConfig = LossConfig()) -> LossBreakdown:
    """Combined classification + gated regression loss over a minibatch."""
    cls_loss = 0.0
    reg_loss = 0.0
    n_pos = 0
    for i, entry in enumerate(entries):
        cls_loss += cross_entropy(entry.probs, entry.label)
        if entry.is_positive:
            if entry.pred is None or entry.target is None:
                raise ValidationError(f"positive entry {i} lacks pred/target deltas")
            reg_loss += _reg_term(entry.pred, entry.target, config.angle_residual_unit)
            n_pos += 1
    n_cls = config.n_cls if config.n_cls is not None else max(len(entries), 1)
    n_reg = config.n_reg if config.n_reg is not None else max(n_pos, 1)
    total = cls_loss / n_cls + config.lam * reg_loss / n_reg
    return LossBreakdown(cls_loss, reg_loss, total, n_cls, n_reg)
