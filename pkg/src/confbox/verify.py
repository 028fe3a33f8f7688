"""Self-contained numerical verification checks for the verify command.

Each check re-derives its expected values independently (finite
differences, closed forms, exhaustive reconstruction) rather than trusting
the code paths it exercises.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .boxes import BoxXYWH, OffsetVector, decode_offsets, encode_offsets
from .errors import ConfigError
from .grid import (
    ConfidenceDistribution,
    GridSpec,
    grid_value,
    quantize,
    restore_full_band,
    restore_top2,
)
from .losses import SmoothL1Params, ce_loss, entropy, iou_loss, l2_loss, smooth_l1_loss, um_loss

__all__ = ["CheckResult", "run_all_checks", "format_results"]

FD_STEP = 1e-5


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _fd_logit_grad(loss_fn, label, logits: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    grad = np.empty_like(logits)
    for i in range(logits.size):
        plus = logits.copy()
        plus[i] += h
        minus = logits.copy()
        minus[i] -= h
        grad[i] = (
            loss_fn(label, ConfidenceDistribution.from_logits(plus)).value
            - loss_fn(label, ConfidenceDistribution.from_logits(minus)).value
        ) / (2.0 * h)
    return grad


def _random_label(rng: np.random.Generator, spec: GridSpec):
    t = rng.uniform(-spec.alpha, spec.alpha)
    return quantize(spec, t)


def _check_box_roundtrip(rng: np.random.Generator, samples: int) -> CheckResult:
    worst = 0.0
    for _ in range(samples):
        anchor = BoxXYWH(
            rng.uniform(-256, 256), rng.uniform(-256, 256), rng.uniform(4, 256), rng.uniform(4, 256)
        )
        v = OffsetVector(*rng.uniform(-1, 1, 4))
        back = encode_offsets(decode_offsets(v, anchor), anchor)
        worst = max(worst, max(abs(a - b) for a, b in zip(back.as_tuple(), v.as_tuple())))
    return CheckResult("box-offset-roundtrip", worst <= 1e-12, f"max abs error {worst:.3e}")


def _check_ce_gradient(rng: np.random.Generator, samples: int) -> list[CheckResult]:
    spec = GridSpec(alpha=2.0, n=10)
    worst_fd = 0.0
    worst_identity = 0.0
    worst_bound = 0.0
    for _ in range(samples):
        label = _random_label(rng, spec)
        logits = rng.normal(0.0, 2.0, spec.num_points)
        dist = ConfidenceDistribution.from_logits(logits)
        out = ce_loss(label, dist)
        identity = dist.probs - label.to_dense(spec.num_points)
        worst_identity = max(worst_identity, float(np.max(np.abs(out.grad - identity))))
        worst_bound = max(worst_bound, float(np.max(np.abs(out.grad))))
        fd = _fd_logit_grad(ce_loss, label, logits)
        worst_fd = max(worst_fd, float(np.max(np.abs(out.grad - fd))))
    return [
        CheckResult("ce-gradient-identity", worst_identity == 0.0, f"max deviation {worst_identity:.3e}"),
        CheckResult("ce-gradient-fd", worst_fd <= 1e-6, f"max |analytic - fd| {worst_fd:.3e}"),
        CheckResult("ce-gradient-bound", worst_bound <= 1.0, f"max |component| {worst_bound:.6f}"),
    ]


def _check_um_gradient(rng: np.random.Generator, samples: int) -> CheckResult:
    spec = GridSpec(alpha=2.0, n=10)
    worst = 0.0
    done = 0
    while done < samples:
        label = _random_label(rng, spec)
        logits = rng.normal(0.0, 2.0, spec.num_points)
        dist = ConfidenceDistribution.from_logits(logits)
        gap = entropy(np.array([label.p_left, label.p_right])) - entropy(dist.probs)
        if abs(gap) < 1e-3:  # keep clear of the |.| kink
            continue
        out = um_loss(label, dist)
        fd = _fd_logit_grad(um_loss, label, logits)
        worst = max(worst, float(np.max(np.abs(out.grad - fd))))
        done += 1
    return CheckResult("um-gradient-fd", worst <= 1e-6, f"max |analytic - fd| {worst:.3e}")


def _check_reconstruction(rng: np.random.Generator, samples: int) -> list[CheckResult]:
    results = []
    for name, spec in (
        ("reconstruction-uniform", GridSpec(alpha=2.0, n=10)),
        ("reconstruction-in", GridSpec(alpha=2.0, n=10, mode="in", in_beta=1.0)),
    ):
        worst = 0.0
        for _ in range(samples):
            t = rng.uniform(-spec.alpha, spec.alpha)
            label = quantize(spec, t)
            worst = max(worst, abs(restore_full_band(spec, label.to_dense(spec.num_points)) - t))
        results.append(CheckResult(name, worst <= 1e-10, f"max abs error {worst:.3e}"))
    return results


def _check_in_limit() -> CheckResult:
    alpha, n = 2.0, 10
    uniform = GridSpec(alpha=alpha, n=n)
    near_uniform = GridSpec(alpha=alpha, n=n, mode="in", in_beta=1e-6)
    worst = max(
        abs(grid_value(near_uniform, i) - grid_value(uniform, i)) for i in range(n + 1)
    )
    unit = GridSpec(alpha=alpha, n=n, mode="in", in_beta=1.0)
    endpoints_exact = (
        grid_value(unit, 0) == -alpha
        and grid_value(unit, n) == alpha
        and grid_value(unit, n // 2) == 0.0
    )
    passed = worst <= 1e-4 and endpoints_exact
    return CheckResult("in-grid-limit", passed, f"max |in - uniform| {worst:.3e} at beta=1e-6")


def _check_top2(rng: np.random.Generator, samples: int) -> list[CheckResult]:
    spec = GridSpec(alpha=2.0, n=10)
    worst = 0.0
    for _ in range(samples):
        label = _random_label(rng, spec)
        dense = label.to_dense(spec.num_points)
        worst = max(worst, abs(restore_top2(spec, dense) - restore_full_band(spec, dense)))
    agree = CheckResult("top2-two-hot-agreement", worst <= 1e-12, f"max disagreement {worst:.3e}")
    logits = np.zeros(spec.num_points)
    logits[-2:] += 1e-6
    dist = ConfidenceDistribution.from_logits(logits)
    gap = abs(restore_top2(spec, dist) - restore_full_band(spec, dist))
    interval = grid_value(spec, 1) - grid_value(spec, 0)
    unstable = CheckResult(
        "top2-flat-instability",
        gap > interval / 10.0,
        f"flat-distribution gap {gap:.3f} vs interval/10 {interval / 10.0:.3f}",
    )
    return [agree, unstable]


def _check_smooth_l1_junction() -> CheckResult:
    delta = 0.7
    params = SmoothL1Params(delta=delta)
    zero = OffsetVector(0.0, 0.0, 0.0, 0.0)
    at = smooth_l1_loss(OffsetVector(delta, 0, 0, 0), zero, params)
    eps = 1e-9
    below = smooth_l1_loss(OffsetVector(delta - eps, 0, 0, 0), zero, params)
    above = smooth_l1_loss(OffsetVector(delta + eps, 0, 0, 0), zero, params)
    ok = (
        abs(at.value - delta / 2.0) <= 1e-12
        and at.grad[0] == 1.0
        and abs(above.value - below.value) <= 1e-8
        and abs(above.grad[0] - below.grad[0]) <= 1e-8
    )
    return CheckResult("smooth-l1-junction", ok, f"value at delta {at.value:.12f} (delta/2 = {delta / 2.0})")


def _check_l2_anchor_scaling() -> CheckResult:
    pixel_error = 4.0
    ratios = []
    for width in (8.0, 32.0, 128.0):
        anchor = BoxXYWH(0.0, 0.0, width, width)
        gt = BoxXYWH(pixel_error, 0.0, width, width)
        t = encode_offsets(gt, anchor)
        grad = l2_loss(t, OffsetVector(0, 0, 0, 0)).grad[0]
        ratios.append(grad)
    ok = ratios[0] == 4.0 * ratios[1] and ratios[1] == 4.0 * ratios[2]
    return CheckResult("l2-anchor-scaling", ok, f"gradients {ratios} expected exact 16:4:1")


def _check_iou_closed_form(rng: np.random.Generator, samples: int) -> CheckResult:
    s = 64.0
    worst_val = 0.0
    worst_grad = 0.0
    for _ in range(samples):
        x = rng.uniform(0.01, 0.95) * s
        out = iou_loss(BoxXYWH(0, 0, s, s), BoxXYWH(x, 0, s, s))
        worst_val = max(worst_val, abs(out.value - math.log((s + x) / (s - x))))
        worst_grad = max(worst_grad, abs(out.grad[0] - (1.0 / (s + x) + 1.0 / (s - x))))
    ok = worst_val <= 1e-10 and worst_grad <= 1e-6
    return CheckResult(
        "iou-closed-form", ok, f"max value error {worst_val:.3e}, max grad error {worst_grad:.3e}"
    )


def run_all_checks(seed: int = 0, samples: int = 1000, inject_fault: bool = False) -> list[CheckResult]:
    """Run every verification check; deterministic for a fixed seed."""
    if samples < 1:
        raise ConfigError(f"samples must be >= 1, got {samples!r}")
    rng = np.random.default_rng(seed)
    fd_samples = min(samples, 200)  # finite differencing dominates runtime
    results = [_check_box_roundtrip(rng, samples)]
    ce = _check_ce_gradient(rng, fd_samples)
    results.extend(ce)
    results.append(_check_um_gradient(rng, fd_samples))
    results.extend(_check_reconstruction(rng, samples))
    results.append(_check_in_limit())
    results.extend(_check_top2(rng, samples))
    results.append(_check_smooth_l1_junction())
    results.append(_check_l2_anchor_scaling())
    results.append(_check_iou_closed_form(rng, min(samples, 500)))
    if inject_fault:
        results.append(CheckResult("injected-fault", False, "forced failure for error-path testing"))
    return results


def format_results(results: list[CheckResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [
        f"{r.name.ljust(width)}  {'PASS' if r.passed else 'FAIL'}  {r.detail}" for r in results
    ]
    return "\n".join(lines)
