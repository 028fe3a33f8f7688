"""Confidence-driven bounding-box localization toolkit.

Quantizes continuous box-regression targets into two-hot grid labels,
decodes confidence distributions back to continuous predictions, and
provides classification-based localization losses (cross entropy plus an
entropy-gap uncertainty term) with analytic gradients, alongside the
norm- and IoU-based baselines whose scale-dependent gradient distortion
the method corrects. Includes desk-scale harnesses that demonstrate the
distortion and the convergence behavior on synthetic data.
"""

from .boxes import BoxXYWH, OffsetVector, decode_offsets, encode_offsets, iou
from .distortion import SweepConfig, SweepRecord, sweep_iou, sweep_norm_gradients
from .errors import ConfigError, DivergenceError, DomainError, GridRangeError
from .grid import (
    ConfidenceDistribution,
    GridSpec,
    TwoHotLabel,
    clamp_to_range,
    grid_value,
    grid_values,
    quantize,
    restore_full_band,
    restore_top2,
)
from .losses import (
    LossValueGrad,
    SmoothL1Params,
    cbbl_loss,
    ce_loss,
    iou_loss,
    l2_loss,
    smooth_l1_loss,
    um_loss,
)
from .toytrain import (
    EpochReport,
    SalienceReport,
    SyntheticScene,
    TrainConfig,
    generate_scene,
    gradient_salience,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "BoxXYWH",
    "OffsetVector",
    "encode_offsets",
    "decode_offsets",
    "iou",
    "GridSpec",
    "TwoHotLabel",
    "ConfidenceDistribution",
    "grid_value",
    "grid_values",
    "quantize",
    "clamp_to_range",
    "restore_full_band",
    "restore_top2",
    "LossValueGrad",
    "SmoothL1Params",
    "ce_loss",
    "um_loss",
    "cbbl_loss",
    "l2_loss",
    "smooth_l1_loss",
    "iou_loss",
    "SweepConfig",
    "SweepRecord",
    "sweep_iou",
    "sweep_norm_gradients",
    "SyntheticScene",
    "TrainConfig",
    "EpochReport",
    "SalienceReport",
    "generate_scene",
    "train",
    "gradient_salience",
    "ConfigError",
    "DomainError",
    "GridRangeError",
    "DivergenceError",
]
