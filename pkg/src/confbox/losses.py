"""Localization objectives and their analytic gradients.

Two families live here. The classification-based objectives (cross
entropy against a two-hot label, plus an entropy-gap uncertainty term)
differentiate with respect to the head's logits; their gradients are
confidence differences, bounded per component and independent of anchor
scale. The baseline regression objectives (L2, Smooth-L1) differentiate
with respect to predicted offsets, and the log-IoU loss with respect to
the predicted center's horizontal shift; these are the losses whose
gradients distort with object scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boxes import BoxXYWH, OffsetVector, iou
from .errors import ConfigError, DomainError
from .grid import ConfidenceDistribution, TwoHotLabel

__all__ = [
    "LossValueGrad",
    "SmoothL1Params",
    "ce_loss",
    "um_loss",
    "cbbl_loss",
    "l2_loss",
    "smooth_l1_loss",
    "iou_loss",
    "entropy",
]

IOU_GRAD_STEP = 1e-6


@dataclass(frozen=True)
class LossValueGrad:
    """A scalar loss and its gradient vector.

    The gradient is taken with respect to the operation's differentiation
    variable: logits for ce/um/cbbl, the predicted offset vector for
    l2/smooth-l1, and the predicted center's horizontal shift (length 1)
    for the IoU loss.
    """

    value: float
    grad: np.ndarray


@dataclass(frozen=True)
class SmoothL1Params:
    """Transition threshold between the quadratic and linear zones."""

    delta: float = 1.0

    def __post_init__(self):
        if not self.delta > 0:
            raise ConfigError(f"delta must be positive, got {self.delta!r}")


def entropy(p: np.ndarray) -> float:
    """Shannon entropy in nats with the 0*log(0) := 0 convention."""
    p = np.asarray(p, dtype=float)
    safe = np.where(p > 0.0, p, 1.0)
    return float(-np.sum(p * np.log(safe)))


def _check_label(label: TwoHotLabel, dist: ConfidenceDistribution) -> None:
    if label.i_right >= dist.probs.size:
        raise DomainError(
            f"label indices ({label.i_left}, {label.i_right}) exceed "
            f"distribution length {dist.probs.size}"
        )


def ce_loss(label: TwoHotLabel, dist: ConfidenceDistribution) -> LossValueGrad:
    """Cross entropy between predicted confidence and a two-hot label.

    The logit gradient is exactly probs - label (confidence difference),
    so every component lies in [-1, 1] regardless of object scale.
    """
    _check_label(label, dist)
    p = dist.probs
    value = 0.0
    with np.errstate(divide="ignore"):
        if label.p_left > 0.0:
            value -= label.p_left * np.log(p[label.i_left])
        if label.p_right > 0.0:
            value -= label.p_right * np.log(p[label.i_right])
    grad = p - label.to_dense(p.size)
    return LossValueGrad(value=float(value), grad=grad)


def um_loss(label: TwoHotLabel, dist: ConfidenceDistribution) -> LossValueGrad:
    """Uncertainty gap |H(label) - H(probs)| with its analytic logit gradient.

    Uses dH/dl_i = -p_i (ln p_i + H(p)); the subgradient at the
    non-differentiable point H(probs) == H(label) is reported as zero.
    """
    _check_label(label, dist)
    p = dist.probs
    h_label = entropy(np.array([label.p_left, label.p_right]))
    h_pred = entropy(p)
    gap = h_label - h_pred
    safe = np.where(p > 0.0, p, 1.0)
    grad = np.sign(gap) * p * (np.log(safe) + h_pred)
    return LossValueGrad(value=abs(gap), grad=grad)


def cbbl_loss(label: TwoHotLabel, dist: ConfidenceDistribution, um_weight: float = 1.0) -> LossValueGrad:
    """Combined objective: cross entropy plus um_weight times the uncertainty gap."""
    if um_weight < 0:
        raise ConfigError(f"um_weight must be >= 0, got {um_weight!r}")
    ce = ce_loss(label, dist)
    if um_weight == 0.0:
        return ce
    um = um_loss(label, dist)
    return LossValueGrad(value=ce.value + um_weight * um.value, grad=ce.grad + um_weight * um.grad)


def l2_loss(pred: OffsetVector, target: OffsetVector) -> LossValueGrad:
    """Squared-norm offset loss; gradient 2*(pred - target) per coordinate.

    Because offsets divide pixel deltas by anchor size, this gradient
    scales as 1/anchor_width for a fixed pixel error.
    """
    d = np.array(pred.as_tuple()) - np.array(target.as_tuple())
    return LossValueGrad(value=float(np.dot(d, d)), grad=2.0 * d)


def smooth_l1_loss(pred: OffsetVector, target: OffsetVector, params: SmoothL1Params = SmoothL1Params()) -> LossValueGrad:
    """Smooth-L1 offset loss, summed over coordinates.

    Quadratic (d^2 / 2*delta) inside |d| <= delta, linear (|d| - delta/2)
    outside; gradients are d/delta inside and sign(d) outside, so no
    component exceeds 1 in magnitude.
    """
    d = np.array(pred.as_tuple()) - np.array(target.as_tuple())
    absd = np.abs(d)
    quad = absd <= params.delta
    values = np.where(quad, d * d / (2.0 * params.delta), absd - params.delta / 2.0)
    grad = np.where(quad, d / params.delta, np.sign(d))
    return LossValueGrad(value=float(values.sum()), grad=grad)


def _log_iou_or_raise(gt: BoxXYWH, pred: BoxXYWH) -> float:
    overlap = iou(gt, pred)
    if overlap <= 0.0:
        raise DomainError("iou loss undefined for non-overlapping boxes")
    return -float(np.log(overlap))


def iou_loss(gt: BoxXYWH, pred: BoxXYWH) -> LossValueGrad:
    """Negative log IoU with the gradient along the predicted center's x shift.

    The gradient is a central finite difference (step 1e-6 px) of the loss
    as pred.x moves; both probe positions must keep the boxes overlapping.
    """
    value = _log_iou_or_raise(gt, pred)
    h = IOU_GRAD_STEP
    plus = _log_iou_or_raise(gt, BoxXYWH(pred.x + h, pred.y, pred.w, pred.h))
    minus = _log_iou_or_raise(gt, BoxXYWH(pred.x - h, pred.y, pred.w, pred.h))
    grad = np.array([(plus - minus) / (2.0 * h)])
    return LossValueGrad(value=value, grad=grad)
