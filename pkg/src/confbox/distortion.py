"""Scale-dependent gradient distortion sweeps.

Two desk-scale analyses of why norm- and IoU-based regression penalize
small objects harder at equal pixel error:

* :func:`sweep_iou` slides a square prediction horizontally across an
  equally sized square ground truth, at several object scales, recording
  log-IoU loss and its gradient magnitude. Smaller scales show higher
  losses and steeper gradients at the same pixel shift.
* :func:`sweep_norm_gradients` records the L2 center-offset gradient for
  pixel errors across anchor widths; the gradient is exactly proportional
  to 1/width.

Records serialize to CSV with columns
``loss_name,scale_ratio,shift_px,loss,grad_mag`` sorted by
(loss_name, scale_ratio, shift_px). For the norm sweep, ``scale_ratio``
carries the anchor width and ``shift_px`` the pixel error.
"""

from __future__ import annotations

import csv
import io
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .boxes import BoxXYWH, OffsetVector
from .errors import ConfigError
from .losses import iou_loss, l2_loss

__all__ = [
    "SweepConfig",
    "SweepRecord",
    "sweep_iou",
    "sweep_norm_gradients",
    "write_records_csv",
    "records_to_csv_text",
    "CSV_COLUMNS",
]

CSV_COLUMNS = ("loss_name", "scale_ratio", "shift_px", "loss", "grad_mag")

SWEEP_FD_STEP = 1e-4


@dataclass(frozen=True)
class SweepConfig:
    """Geometry of the shifted-squares sweep.

    Each ratio k places two squares of side k*gt_side at the same height
    and sweeps the prediction's horizontal shift over
    [0, shift_max_fraction * k * gt_side].
    """

    gt_side: float = 64.0
    scale_ratios: tuple[float, ...] = (1.0, 0.75, 0.5, 0.25)
    shift_samples: int = 257
    shift_max_fraction: float = 0.9

    def __post_init__(self):
        if not self.gt_side > 0:
            raise ConfigError(f"gt_side must be positive, got {self.gt_side!r}")
        ratios = tuple(float(k) for k in self.scale_ratios)
        if not ratios:
            raise ConfigError("scale_ratios must be non-empty")
        for k in ratios:
            if not (0.0 < k <= 1.0):
                raise ConfigError(f"scale ratios must lie in (0, 1], got {k!r}")
        object.__setattr__(self, "scale_ratios", ratios)
        if not (isinstance(self.shift_samples, int) and self.shift_samples >= 2):
            raise ConfigError(f"shift_samples must be an integer >= 2, got {self.shift_samples!r}")
        if not (0.0 <= self.shift_max_fraction < 1.0):
            raise ConfigError(
                "shift_max_fraction must lie in [0, 1) to keep the boxes "
                f"overlapping, got {self.shift_max_fraction!r}"
            )
        # finite-difference probes at the largest shift must stay overlapping
        margin = (1.0 - self.shift_max_fraction) * min(ratios) * self.gt_side
        if margin <= SWEEP_FD_STEP:
            raise ConfigError(
                "shift_max_fraction leaves no room for gradient probes at the "
                f"smallest ratio (margin {margin!r} px)"
            )


@dataclass(frozen=True)
class SweepRecord:
    loss_name: str
    scale_ratio: float
    shift_px: float
    loss: float
    grad_mag: float


def _shift_grid(max_shift: float, samples: int) -> np.ndarray:
    # i/(samples-1) first: ratios k and k/2 then share bit-identical shifts
    return max_shift * (np.arange(samples) / (samples - 1))


def sweep_iou(config: SweepConfig = SweepConfig()) -> list[SweepRecord]:
    """Loss and gradient-magnitude curves for the shifted-squares scenario.

    The gradient is a central finite difference of the loss in the shift;
    at the x = 0 boundary, where the loss is even in the shift, a forward
    difference reports the one-sided slope instead of a spurious zero.
    """

    def loss_at(side: float, x: float) -> float:
        gt = BoxXYWH(0.0, 0.0, side, side)
        pred = BoxXYWH(x, 0.0, side, side)
        return iou_loss(gt, pred).value

    records = []
    h = SWEEP_FD_STEP
    for k in sorted(config.scale_ratios):
        side = k * config.gt_side
        shifts = _shift_grid(config.shift_max_fraction * k * config.gt_side, config.shift_samples)
        for x in shifts:
            value = loss_at(side, float(x))
            if x == 0.0:
                grad = (loss_at(side, h) - value) / h
            else:
                grad = (loss_at(side, float(x) + h) - loss_at(side, float(x) - h)) / (2.0 * h)
            records.append(
                SweepRecord(
                    loss_name="iou",
                    scale_ratio=float(k),
                    shift_px=float(x),
                    loss=value,
                    grad_mag=abs(grad),
                )
            )
    return records


def sweep_norm_gradients(
    anchor_widths: Sequence[float], pixel_errors: Sequence[float]
) -> list[SweepRecord]:
    """L2 center-offset loss and gradient for each (anchor width, pixel error).

    The offset error for a pixel error e at anchor width w is e/w, so the
    recorded gradient 2e/w is exactly homogeneous of degree -1 in w.
    """
    widths = [float(w) for w in anchor_widths]
    errors = [float(e) for e in pixel_errors]
    if not widths or not errors:
        raise ConfigError("anchor_widths and pixel_errors must be non-empty")
    if any(w <= 0 for w in widths):
        raise ConfigError("anchor widths must be positive")
    if any(e < 0 for e in errors):
        raise ConfigError("pixel errors must be non-negative")
    zero = OffsetVector(0.0, 0.0, 0.0, 0.0)
    records = []
    for w in sorted(widths):
        for e in sorted(errors):
            out = l2_loss(OffsetVector(e / w, 0.0, 0.0, 0.0), zero)
            records.append(
                SweepRecord(
                    loss_name="l2",
                    scale_ratio=w,
                    shift_px=e,
                    loss=out.value,
                    grad_mag=abs(float(out.grad[0])),
                )
            )
    return records


def _sorted_records(records: Sequence[SweepRecord]) -> list[SweepRecord]:
    return sorted(records, key=lambda r: (r.loss_name, r.scale_ratio, r.shift_px))


def write_records_csv(records: Sequence[SweepRecord], stream) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in _sorted_records(records):
        writer.writerow([r.loss_name, repr(r.scale_ratio), repr(r.shift_px), repr(r.loss), repr(r.grad_mag)])


def records_to_csv_text(records: Sequence[SweepRecord]) -> str:
    buf = io.StringIO()
    write_records_csv(records, buf)
    return buf.getvalue()
