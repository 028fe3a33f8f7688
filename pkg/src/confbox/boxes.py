"""Axis-aligned boxes in center form and the anchor-relative offset encoding.

A box prediction is parameterized relative to a reference anchor as
normalized center deltas plus log size ratios:

    tx = (x - xa) / wa      tw = ln(w / wa)
    ty = (y - ya) / ha      th = ln(h / ha)

All scalars are double precision; every operation here is pure and
stateless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

__all__ = ["BoxXYWH", "OffsetVector", "encode_offsets", "decode_offsets", "iou"]


@dataclass(frozen=True)
class BoxXYWH:
    """Axis-aligned box: center (x, y), width w, height h, in pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise DomainError(f"box field {name} must be finite, got {v!r}")
        if self.w <= 0:
            raise DomainError(f"box field w must be positive, got {self.w!r}")
        if self.h <= 0:
            raise DomainError(f"box field h must be positive, got {self.h!r}")

    def corners(self) -> tuple[float, float, float, float]:
        """(x1, y1, x2, y2) corner form; internal helper for overlap math."""
        return (
            self.x - self.w / 2.0,
            self.y - self.h / 2.0,
            self.x + self.w / 2.0,
            self.y + self.h / 2.0,
        )


@dataclass(frozen=True)
class OffsetVector:
    """Anchor-relative offsets: dimensionless center deltas and log size ratios."""

    tx: float
    ty: float
    tw: float
    th: float

    def __post_init__(self):
        for name in ("tx", "ty", "tw", "th"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise DomainError(f"offset field {name} must be finite, got {v!r}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.tx, self.ty, self.tw, self.th)


def encode_offsets(box: BoxXYWH, anchor: BoxXYWH) -> OffsetVector:
    """Encode ``box`` relative to ``anchor``."""
    return OffsetVector(
        tx=(box.x - anchor.x) / anchor.w,
        ty=(box.y - anchor.y) / anchor.h,
        tw=math.log(box.w / anchor.w),
        th=math.log(box.h / anchor.h),
    )


def decode_offsets(offsets: OffsetVector, anchor: BoxXYWH) -> BoxXYWH:
    """Apply ``offsets`` to ``anchor``; algebraic inverse of :func:`encode_offsets`."""
    return BoxXYWH(
        x=anchor.x + offsets.tx * anchor.w,
        y=anchor.y + offsets.ty * anchor.h,
        w=anchor.w * math.exp(offsets.tw),
        h=anchor.h * math.exp(offsets.th),
    )


def iou(a: BoxXYWH, b: BoxXYWH) -> float:
    """Intersection over union of two boxes, in [0, 1].

    Areas are computed from the same corner coordinates as the
    intersection so that identical boxes yield exactly 1.0.
    """
    ax1, ay1, ax2, ay2 = a.corners()
    bx1, by1, bx2, by2 = b.corners()
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    return inter / union
