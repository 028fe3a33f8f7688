"""Label quantization grids, two-hot targets, and distribution decoding.

A grid spans the regression range [-alpha, alpha] with n+1 points indexed
0..n. In uniform mode the spacing is 2*alpha/n so both endpoints are grid
points. Interval non-uniform (IN) mode warps the uniform points through an
odd-symmetric exponential

    g(y) = sign(y) * alpha * (e^(beta*|y|) - 1) / (e^(alpha*beta) - 1)

which concentrates points near zero; larger beta means denser near zero.

Continuous targets become two-hot labels on the bracketing grid points,
weighted so the expectation recovers the target exactly. Predictions come
back from a softmax confidence distribution either as the full expectation
over all points (stable) or from the top-2 scoring points (unstable when
the distribution is flat).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConfigError, DomainError, GridRangeError

__all__ = [
    "MODE_UNIFORM",
    "MODE_IN",
    "GridSpec",
    "TwoHotLabel",
    "ConfidenceDistribution",
    "grid_value",
    "grid_values",
    "quantize",
    "clamp_to_range",
    "restore_full_band",
    "restore_top2",
]

MODE_UNIFORM = "uniform"
MODE_IN = "in"

_MODE_ALIASES = {
    "uniform": MODE_UNIFORM,
    "in": MODE_IN,
    "interval-non-uniform": MODE_IN,
}


@dataclass(frozen=True)
class GridSpec:
    """Immutable description of a quantization grid.

    ``endpoint=True`` (the default) uses spacing 2*alpha/n so the n+1 points
    cover [-alpha, alpha] exactly, mirroring ``np.linspace(..., endpoint=True)``.
    ``endpoint=False`` uses the narrower 2*alpha/(n+1) spacing, provided only
    for side-by-side comparison; its last point stops short of +alpha.
    """

    alpha: float
    n: int
    mode: str = MODE_UNIFORM
    in_beta: float = 1.0
    endpoint: bool = field(default=True, compare=True)

    def __post_init__(self):
        if not (isinstance(self.alpha, (int, float)) and math.isfinite(self.alpha) and self.alpha > 0):
            raise ConfigError(f"alpha must be a positive finite number, got {self.alpha!r}")
        if not (isinstance(self.n, int) and not isinstance(self.n, bool) and self.n >= 1):
            raise ConfigError(f"n must be an integer >= 1, got {self.n!r}")
        canon = _MODE_ALIASES.get(self.mode)
        if canon is None:
            raise ConfigError(
                f"mode must be one of {sorted(set(_MODE_ALIASES))}, got {self.mode!r}"
            )
        object.__setattr__(self, "mode", canon)
        object.__setattr__(self, "alpha", float(self.alpha))
        if self.mode == MODE_IN:
            if not (isinstance(self.in_beta, (int, float)) and math.isfinite(self.in_beta) and self.in_beta > 0):
                raise ConfigError(f"in_beta must be a positive finite number, got {self.in_beta!r}")
        object.__setattr__(self, "in_beta", float(self.in_beta))

    @property
    def num_points(self) -> int:
        return self.n + 1

    def to_dict(self) -> dict:
        """JSON-schema form: exactly the fields alpha, n, mode, in_beta."""
        return {"alpha": self.alpha, "n": self.n, "mode": self.mode, "in_beta": self.in_beta}

    @classmethod
    def from_dict(cls, data: dict) -> "GridSpec":
        if not isinstance(data, dict):
            raise ConfigError(f"grid spec must be a JSON object, got {type(data).__name__}")
        unknown = set(data) - {"alpha", "n", "mode", "in_beta"}
        if unknown:
            raise ConfigError(f"unknown grid spec fields: {sorted(unknown)}")
        kwargs = dict(data)
        if "n" in kwargs and isinstance(kwargs["n"], float) and kwargs["n"].is_integer():
            kwargs["n"] = int(kwargs["n"])
        return cls(**kwargs)


@dataclass(frozen=True)
class TwoHotLabel:
    """Ground-truth mass on the two grid points bracketing a continuous target."""

    i_left: int
    i_right: int
    p_left: float
    p_right: float

    def __post_init__(self):
        if self.i_right != self.i_left + 1:
            raise DomainError(
                f"i_right must equal i_left + 1, got ({self.i_left}, {self.i_right})"
            )
        if not (0.0 <= self.p_left <= 1.0 and 0.0 <= self.p_right <= 1.0):
            raise DomainError(
                f"weights must lie in [0, 1], got ({self.p_left!r}, {self.p_right!r})"
            )
        if abs(self.p_left + self.p_right - 1.0) > 1e-12:
            raise DomainError(
                f"weights must sum to 1, got {self.p_left + self.p_right!r}"
            )

    def to_dense(self, num_points: int) -> np.ndarray:
        """Embed as a probability vector of length ``num_points``."""
        if self.i_right >= num_points:
            raise DomainError(
                f"label indices ({self.i_left}, {self.i_right}) exceed grid size {num_points}"
            )
        dense = np.zeros(num_points)
        dense[self.i_left] = self.p_left
        dense[self.i_right] = self.p_right
        return dense


@dataclass(frozen=True)
class ConfidenceDistribution:
    """Per-grid logits and their softmax probabilities."""

    logits: np.ndarray
    probs: np.ndarray

    @classmethod
    def from_logits(cls, logits) -> "ConfidenceDistribution":
        arr = np.asarray(logits, dtype=float)
        if arr.ndim != 1 or arr.size < 2:
            raise DomainError(f"logits must be a 1-D vector of length >= 2, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DomainError("logits must be finite")
        return cls(logits=arr, probs=softmax(arr))


def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable softmax (max-subtraction)."""
    shifted = logits - np.max(logits)
    e = np.exp(shifted)
    return e / e.sum()


def _in_warp(alpha: float, beta: float, y: float) -> float:
    # expm1 keeps the beta -> 0 limit well conditioned
    return math.copysign(alpha * math.expm1(beta * abs(y)) / math.expm1(alpha * beta), y)


def grid_value(spec: GridSpec, i: int) -> float:
    """Representative value of the i-th grid point."""
    n = spec.n
    if not (isinstance(i, (int, np.integer)) and 0 <= i <= n):
        raise DomainError(f"grid index must lie in [0, {n}], got {i!r}")
    denom = n if spec.endpoint else n + 1
    # endpoints pinned so the covered range is exact in floating point
    if i == 0:
        y = -spec.alpha
    elif i == denom:
        y = spec.alpha
    else:
        y = spec.alpha * (2 * int(i) - denom) / denom
    if spec.mode == MODE_IN:
        y = _in_warp(spec.alpha, spec.in_beta, y)
    return y


@lru_cache(maxsize=128)
def _cached_values(spec: GridSpec) -> np.ndarray:
    vals = np.array([grid_value(spec, i) for i in range(spec.num_points)])
    vals.setflags(write=False)
    return vals


def grid_values(spec: GridSpec) -> np.ndarray:
    """All n+1 grid values as a read-only array."""
    return _cached_values(spec)


def clamp_to_range(spec: GridSpec, t: float) -> float:
    """Clamp a target into the grid's representable range.

    Quantization of out-of-range targets raises; callers that want
    saturation must opt in through this helper.
    """
    vals = grid_values(spec)
    return min(max(t, vals[0]), vals[-1])


def quantize(spec: GridSpec, t_star: float) -> TwoHotLabel:
    """Two-hot label for a continuous target within the grid range.

    Weights are proximity ratios over the enclosing interval's actual
    width, so the label's expectation reproduces ``t_star`` exactly in
    both uniform and IN modes.
    """
    if not math.isfinite(t_star):
        raise GridRangeError(f"target must be finite, got {t_star!r}")
    vals = grid_values(spec)
    if t_star < vals[0] or t_star > vals[-1]:
        raise GridRangeError(
            f"target {t_star!r} outside grid range [{float(vals[0])!r}, {float(vals[-1])!r}]"
        )
    i_left = int(np.searchsorted(vals, t_star, side="right")) - 1
    i_left = min(max(i_left, 0), spec.n - 1)
    width = vals[i_left + 1] - vals[i_left]
    p_left = float((vals[i_left + 1] - t_star) / width)
    p_right = float((t_star - vals[i_left]) / width)
    return TwoHotLabel(i_left=i_left, i_right=i_left + 1, p_left=p_left, p_right=p_right)


def _probs_of(spec: GridSpec, dist) -> np.ndarray:
    probs = dist.probs if isinstance(dist, ConfidenceDistribution) else np.asarray(dist, dtype=float)
    if probs.shape != (spec.num_points,):
        raise DomainError(
            f"distribution length {probs.shape} does not match grid size {spec.num_points}"
        )
    return probs


def restore_full_band(spec: GridSpec, dist) -> float:
    """Continuous prediction as the expectation over all grid points.

    ``dist`` may be a ConfidenceDistribution or a raw probability vector.
    """
    probs = _probs_of(spec, dist)
    return float(np.dot(probs, grid_values(spec)))


def restore_top2(spec: GridSpec, dist) -> float:
    """Continuous prediction from the two highest-scoring grid points.

    The two largest probabilities (ties broken toward the lower index) are
    renormalized to sum to one and used to weight their grid values. On a
    flat distribution this latches onto near-arbitrary points, which is why
    the full-band expectation is the default decoder.
    """
    probs = _probs_of(spec, dist)
    order = np.argsort(-probs, kind="stable")
    i1, i2 = int(order[0]), int(order[1])
    p1, p2 = probs[i1], probs[i2]
    total = p1 + p2
    vals = grid_values(spec)
    return float((p1 * vals[i1] + p2 * vals[i2]) / total)
