"""Desk-scale synthetic localization benchmark.

Generates anchor/ground-truth pairs across three object-scale buckets,
attaches features that make the task solvable by a linear head (the true
offsets plus anchor log-dimensions, with Gaussian noise), and trains that
head by plain mini-batch gradient descent under each loss family using
only the analytic gradients from :mod:`confbox.losses`.

Per epoch it records the mean loss, per-bucket mean gradient magnitude at
the head output, and per-bucket mean IoU of decoded predictions; these are
the quantities whose scale imbalance the confidence-driven objective is
meant to fix.
"""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .boxes import BoxXYWH, OffsetVector, decode_offsets, encode_offsets, iou
from .errors import ConfigError, DivergenceError, DomainError
from .grid import ConfidenceDistribution, GridSpec, quantize, restore_full_band
from .losses import SmoothL1Params, ce_loss, l2_loss, smooth_l1_loss, um_loss

__all__ = [
    "BUCKETS",
    "Sample",
    "SyntheticScene",
    "TrainConfig",
    "EpochReport",
    "SalienceReport",
    "bucket_of_area",
    "generate_scene",
    "train",
    "gradient_salience",
    "final_iou_summary",
    "write_reports_csv",
    "reports_to_csv_text",
    "REPORT_CSV_COLUMNS",
]

BUCKETS = ("small", "medium", "large")

SMALL_AREA_MAX = 32.0 * 32.0
LARGE_AREA_MIN = 96.0 * 96.0

# sqrt-area sampling ranges per bucket; chosen strictly inside the
# bucket boundaries so the area thresholds can never flip an assignment
_SQRT_AREA_RANGES = {"small": (16.0, 31.0), "medium": (36.0, 92.0), "large": (100.0, 150.0)}
_ASPECT_LOG_RANGE = 0.2
# anchor centers sit on a fixed-stride grid, so their misalignment is a
# pixel quantity bounded away from zero regardless of object size; that is
# what makes small objects' center offsets large in offset space
_CENTER_MISALIGN_PX = (2.0, 4.0)
_SIZE_JITTER_LOG = 0.08
_FEATURE_NOISE_SIGMA = 0.1
_MIN_ANCHOR_IOU = 0.3
_MAX_REJECTION_TRIES = 1000

HEAD_L2 = "l2"
HEAD_SMOOTH_L1 = "smooth-l1"
HEAD_CBBL = "cbbl"

_HEAD_ALIASES = {
    "l2": HEAD_L2,
    "regression-l2": HEAD_L2,
    "smooth-l1": HEAD_SMOOTH_L1,
    "regression-smooth-l1": HEAD_SMOOTH_L1,
    "cbbl": HEAD_CBBL,
}

# the RPN-style threshold: typical small-object center offsets sit in the
# clipped (sign-gradient) zone while large-object offsets stay quadratic
_SMOOTH_L1 = SmoothL1Params(delta=1.0 / 9.0)

# each objective has a very different curvature scale, so a shared default
# step size would cripple one head or blow up another; explicit
# learning_rate overrides all of these
_DEFAULT_LEARNING_RATE = {HEAD_CBBL: 0.3, HEAD_SMOOTH_L1: 0.005, HEAD_L2: 0.015}

REPORT_CSV_COLUMNS = ("epoch", "bucket", "mean_grad_mag", "mean_iou", "loss")


def bucket_of_area(area: float) -> str:
    if area < SMALL_AREA_MAX:
        return "small"
    if area > LARGE_AREA_MIN:
        return "large"
    return "medium"


@dataclass(frozen=True)
class Sample:
    anchor: BoxXYWH
    gt: BoxXYWH
    feature: np.ndarray
    scale_bucket: str


@dataclass(frozen=True)
class SyntheticScene:
    image_size: float
    samples: tuple[Sample, ...]


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and head selection for :func:`train`.

    ``learning_rate=None`` picks the head's tuned default. The default grid
    is the interval non-uniform one with unit density factor, the
    configuration the confidence head performs best under.
    """

    head: str = HEAD_CBBL
    grid: GridSpec = GridSpec(alpha=2.0, n=10, mode="in", in_beta=1.0)
    um_weight: float = 1.0
    learning_rate: float | None = None
    epochs: int = 50
    batch_size: int = 16
    seed: int = 0

    def __post_init__(self):
        canon = _HEAD_ALIASES.get(self.head)
        if canon is None:
            raise ConfigError(f"head must be one of {sorted(set(_HEAD_ALIASES))}, got {self.head!r}")
        object.__setattr__(self, "head", canon)
        if self.learning_rate is None:
            object.__setattr__(self, "learning_rate", _DEFAULT_LEARNING_RATE[self.head])
        if not (math.isfinite(self.learning_rate) and self.learning_rate >= 0):
            raise ConfigError(f"learning_rate must be >= 0, got {self.learning_rate!r}")
        if not (isinstance(self.epochs, int) and self.epochs >= 1):
            raise ConfigError(f"epochs must be an integer >= 1, got {self.epochs!r}")
        if not (isinstance(self.batch_size, int) and self.batch_size >= 1):
            raise ConfigError(f"batch_size must be an integer >= 1, got {self.batch_size!r}")
        if self.um_weight < 0:
            raise ConfigError(f"um_weight must be >= 0, got {self.um_weight!r}")


@dataclass(frozen=True)
class EpochReport:
    """Per-epoch training statistics; empty buckets report NaN means."""

    epoch: int
    mean_grad_mag: dict[str, float]
    mean_iou: dict[str, float]
    loss: float


@dataclass(frozen=True)
class SalienceReport:
    """Final/initial gradient-magnitude ratios, the convergence-balance proxy."""

    per_bucket: dict[str, float]
    small_large_final: float


def _sample_gt(rng: np.random.Generator, bucket: str, image_size: float) -> BoxXYWH:
    lo, hi = _SQRT_AREA_RANGES[bucket]
    s = rng.uniform(lo, hi)
    r = math.exp(rng.uniform(-_ASPECT_LOG_RANGE, _ASPECT_LOG_RANGE))
    w, h = s * r, s / r
    x = rng.uniform(w / 2.0, image_size - w / 2.0)
    y = rng.uniform(h / 2.0, image_size - h / 2.0)
    return BoxXYWH(x, y, w, h)


def _signed_misalignment(rng: np.random.Generator) -> float:
    lo, hi = _CENTER_MISALIGN_PX
    return rng.uniform(lo, hi) * (1.0 if rng.uniform() < 0.5 else -1.0)


def _sample_anchor(rng: np.random.Generator, gt: BoxXYWH) -> BoxXYWH:
    for _ in range(_MAX_REJECTION_TRIES):
        anchor = BoxXYWH(
            x=gt.x + _signed_misalignment(rng),
            y=gt.y + _signed_misalignment(rng),
            w=gt.w * math.exp(rng.uniform(-_SIZE_JITTER_LOG, _SIZE_JITTER_LOG)),
            h=gt.h * math.exp(rng.uniform(-_SIZE_JITTER_LOG, _SIZE_JITTER_LOG)),
        )
        if iou(anchor, gt) <= _MIN_ANCHOR_IOU:
            continue
        t = encode_offsets(gt, anchor)
        if max(abs(v) for v in t.as_tuple()) <= 1.5:
            return anchor
    raise ConfigError("could not jitter an anchor satisfying the overlap constraints")


def generate_scene(seed: int, count_per_bucket: int, image_size: float = 512.0) -> SyntheticScene:
    """Deterministically generate ``count_per_bucket`` samples per scale bucket.

    Buckets are interleaved round-robin so every mini-batch mixes scales.
    """
    if count_per_bucket < 1:
        raise ConfigError(f"count_per_bucket must be >= 1, got {count_per_bucket!r}")
    max_side = max(hi for _, hi in _SQRT_AREA_RANGES.values()) * math.exp(_ASPECT_LOG_RANGE)
    if image_size <= max_side:
        raise ConfigError(
            f"image_size {image_size!r} cannot contain the largest bucket side (~{max_side:.0f} px)"
        )
    rng = np.random.default_rng(seed)
    per_bucket: dict[str, list[Sample]] = {b: [] for b in BUCKETS}
    for bucket in BUCKETS:
        for _ in range(count_per_bucket):
            gt = _sample_gt(rng, bucket, image_size)
            anchor = _sample_anchor(rng, gt)
            t = encode_offsets(gt, anchor)
            base = np.array(t.as_tuple() + (math.log(anchor.w), math.log(anchor.h)))
            feature = base + rng.normal(0.0, _FEATURE_NOISE_SIGMA, size=base.size)
            assigned = bucket_of_area(gt.w * gt.h)
            per_bucket[bucket].append(Sample(anchor=anchor, gt=gt, feature=feature, scale_bucket=assigned))
    interleaved = []
    for i in range(count_per_bucket):
        for bucket in BUCKETS:
            interleaved.append(per_bucket[bucket][i])
    return SyntheticScene(image_size=float(image_size), samples=tuple(interleaved))


def _decoded_iou(offsets: np.ndarray, anchor: BoxXYWH, gt: BoxXYWH) -> float:
    # a wildly wrong prediction scores 0 rather than overflowing exp()
    if np.max(np.abs(offsets)) > 100.0:
        return 0.0
    try:
        box = decode_offsets(OffsetVector(*offsets), anchor)
    except DomainError:
        return 0.0
    return iou(box, gt)


class _RegressionHeadState:
    def __init__(self, head: str, samples: Sequence[Sample]):
        self.loss_fn = l2_loss if head == HEAD_L2 else smooth_l1_loss
        self.head = head
        self.targets = [OffsetVector(*encode_offsets(s.gt, s.anchor).as_tuple()) for s in samples]
        self.out_dim = 4

    def evaluate(self, idx: int, out: np.ndarray, sample: Sample):
        pred = OffsetVector(*out)
        if self.head == HEAD_L2:
            res = l2_loss(pred, self.targets[idx])
        else:
            res = smooth_l1_loss(pred, self.targets[idx], _SMOOTH_L1)
        return res.value, res.grad, out


class _CbblHeadState:
    def __init__(self, config: TrainConfig, samples: Sequence[Sample]):
        self.grid = config.grid
        self.um_weight = config.um_weight
        self.labels = [
            [quantize(self.grid, t) for t in encode_offsets(s.gt, s.anchor).as_tuple()]
            for s in samples
        ]
        self.points = self.grid.num_points
        self.out_dim = 4 * self.points

    def evaluate(self, idx: int, out: np.ndarray, sample: Sample):
        logits = out.reshape(4, self.points)
        value = 0.0
        grad = np.empty_like(logits)
        decoded = np.empty(4)
        for c in range(4):
            dist = ConfidenceDistribution.from_logits(logits[c])
            label = self.labels[idx][c]
            ce = ce_loss(label, dist)
            value += ce.value
            g = ce.grad
            if self.um_weight > 0.0:
                um = um_loss(label, dist)
                value += self.um_weight * um.value
                g = g + self.um_weight * um.grad
            grad[c] = g
            decoded[c] = restore_full_band(self.grid, dist)
        return value, grad.ravel(), decoded


def train(scene: SyntheticScene, config: TrainConfig) -> list[EpochReport]:
    """Mini-batch gradient descent on a linear head; one report per epoch.

    The head is a zero-initialized linear layer (weights and bias) from the
    6-dim features to either 4 offsets or 4*(n+1) logits. Regression heads
    start by predicting the anchor itself; the classification head starts
    from a uniform confidence distribution. Per-epoch statistics are
    accumulated at the state each batch sees before its update, so epoch 0
    reflects the initialization.

    Raises :class:`DivergenceError` naming the epoch if the loss goes
    non-finite.
    """
    if not scene.samples:
        raise ConfigError("scene has no samples")
    samples = scene.samples
    state = (
        _CbblHeadState(config, samples)
        if config.head == HEAD_CBBL
        else _RegressionHeadState(config.head, samples)
    )
    feat_dim = samples[0].feature.size
    augmented = [np.append(s.feature, 1.0) for s in samples]
    weights = np.zeros((state.out_dim, feat_dim + 1))

    reports: list[EpochReport] = []
    indices = range(len(samples))
    batches = [
        list(indices[start : start + config.batch_size])
        for start in range(0, len(samples), config.batch_size)
    ]
    for epoch in range(config.epochs):
        grad_sum = {b: 0.0 for b in BUCKETS}
        iou_sum = {b: 0.0 for b in BUCKETS}
        counts = {b: 0 for b in BUCKETS}
        loss_sum = 0.0
        for batch in batches:
            w_grad = np.zeros_like(weights)
            for idx in batch:
                sample = samples[idx]
                out = weights @ augmented[idx]
                if not np.all(np.isfinite(out)):
                    raise DivergenceError(epoch)
                value, g_out, decoded = state.evaluate(idx, out, sample)
                if not math.isfinite(value):
                    raise DivergenceError(epoch)
                w_grad += np.outer(g_out, augmented[idx])
                b = sample.scale_bucket
                grad_sum[b] += float(np.linalg.norm(g_out))
                iou_sum[b] += _decoded_iou(decoded, sample.anchor, sample.gt)
                counts[b] += 1
                loss_sum += value
            weights -= config.learning_rate * (w_grad / len(batch))
        mean_grad = {b: (grad_sum[b] / counts[b] if counts[b] else math.nan) for b in BUCKETS}
        mean_iou = {b: (iou_sum[b] / counts[b] if counts[b] else math.nan) for b in BUCKETS}
        reports.append(
            EpochReport(
                epoch=epoch,
                mean_grad_mag=mean_grad,
                mean_iou=mean_iou,
                loss=loss_sum / len(samples),
            )
        )
    return reports


def gradient_salience(reports: Sequence[EpochReport]) -> SalienceReport:
    """Final-to-initial gradient ratios per bucket plus the final small/large ratio.

    Ratios with a zero or NaN denominator are reported as NaN rather than
    raising; a balanced (non-distorted) optimizer keeps the small/large
    ratio near one.
    """
    if len(reports) < 2:
        raise DomainError("gradient salience needs at least 2 epochs")
    first, last = reports[0], reports[-1]

    def ratio(num: float, den: float) -> float:
        if not (math.isfinite(den) and den != 0.0 and math.isfinite(num)):
            return math.nan
        return num / den

    per_bucket = {b: ratio(last.mean_grad_mag[b], first.mean_grad_mag[b]) for b in BUCKETS}
    small_large = ratio(last.mean_grad_mag["small"], last.mean_grad_mag["large"])
    return SalienceReport(per_bucket=per_bucket, small_large_final=small_large)


def final_iou_summary(reports: Sequence[EpochReport]) -> dict[str, float]:
    if not reports:
        raise DomainError("no epoch reports")
    return dict(reports[-1].mean_iou)


def write_reports_csv(reports: Sequence[EpochReport], stream) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(REPORT_CSV_COLUMNS)
    for report in sorted(reports, key=lambda r: r.epoch):
        for bucket in sorted(BUCKETS):
            writer.writerow(
                [
                    report.epoch,
                    bucket,
                    repr(report.mean_grad_mag[bucket]),
                    repr(report.mean_iou[bucket]),
                    repr(report.loss),
                ]
            )


def reports_to_csv_text(reports: Sequence[EpochReport]) -> str:
    buf = io.StringIO()
    write_reports_csv(reports, buf)
    return buf.getvalue()
