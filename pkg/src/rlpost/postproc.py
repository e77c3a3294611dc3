"""Thresholding, median filtering and event decoding of posteriorgrams.

The stack runs per class: ``posterior > threshold`` (strict), then a median
filter of the 0/1 decisions with a centered odd window and replicate padding,
then runs of ones become events.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ContractError, ValidationError
from .events import decode_events

WINDOW_SET = (3, 5, 7, 9, 11, 13, 15, 17, 19, 21)
DEFAULT_THRESHOLDS = tuple(round(0.05 * k, 2) for k in range(1, 20))


def _validate_thresholds(values):
    for v in values:
        if not 0.0 < v < 1.0:
            raise ValidationError(f"threshold {v} is outside the open interval (0, 1)")


def _validate_windows(values, allowed=WINDOW_SET):
    for w in values:
        if int(w) != w or w % 2 == 0 or w < 3:
            raise ValidationError(f"window {w} must be an odd integer >= 3")
        if allowed is not None and w not in allowed:
            raise ValidationError(f"window {w} is not in the allowed set {list(allowed)}")


@dataclass
class PostProcParams:
    thresholds: np.ndarray
    window_sizes: np.ndarray
    allowed_windows: tuple = WINDOW_SET

    def __post_init__(self):
        self.thresholds = np.asarray(self.thresholds, dtype=np.float64).reshape(-1)
        self.window_sizes = np.asarray(self.window_sizes, dtype=np.int64).reshape(-1)
        if self.thresholds.shape != self.window_sizes.shape:
            raise ValidationError(
                f"{self.thresholds.size} thresholds but {self.window_sizes.size} windows"
            )
        _validate_thresholds(self.thresholds)
        _validate_windows(self.window_sizes, self.allowed_windows)

    @property
    def num_classes(self):
        return self.thresholds.size

    def __eq__(self, other):
        return (
            isinstance(other, PostProcParams)
            and np.array_equal(self.thresholds, other.thresholds)
            and np.array_equal(self.window_sizes, other.window_sizes)
        )

    def label(self):
        """Compact description; uniform params print as ``threshold=0.5,window=7``."""
        if len(set(self.thresholds.tolist())) == 1 and len(set(self.window_sizes.tolist())) == 1:
            return f"threshold={self.thresholds[0]:g},window={self.window_sizes[0]}"
        return "per-class"


@dataclass
class ParamGrid:
    threshold_values: tuple = DEFAULT_THRESHOLDS
    window_values: tuple = WINDOW_SET
    num_classes: int = 10
    class_dependent: bool = True

    def __post_init__(self):
        self.threshold_values = tuple(float(v) for v in self.threshold_values)
        self.window_values = tuple(int(w) for w in self.window_values)
        if not self.threshold_values or not self.window_values:
            raise ValidationError("grid needs at least one threshold and one window")
        _validate_thresholds(self.threshold_values)
        _validate_windows(self.window_values)
        if any(b <= a for a, b in zip(self.threshold_values, self.threshold_values[1:])):
            raise ValidationError("threshold candidates must be strictly increasing")
        if any(b <= a for a, b in zip(self.window_values, self.window_values[1:])):
            raise ValidationError("window candidates must be increasing")
        if self.num_classes < 1:
            raise ValidationError("num_classes must be >= 1")

    @property
    def n_thresholds(self):
        return len(self.threshold_values)

    @property
    def n_windows(self):
        return len(self.window_values)

    @property
    def heads(self):
        """Number of independent choices per head (C, or 1 if class-independent)."""
        return self.num_classes if self.class_dependent else 1

    def to_dict(self):
        return {
            "threshold_values": list(self.threshold_values),
            "window_values": list(self.window_values),
            "num_classes": self.num_classes,
            "class_dependent": self.class_dependent,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            tuple(d["threshold_values"]),
            tuple(d["window_values"]),
            int(d["num_classes"]),
            bool(d["class_dependent"]),
        )

    def params(self, threshold_index, window_index):
        """Params from grid indices; scalars broadcast to all classes."""
        ti = np.broadcast_to(np.asarray(threshold_index), (self.num_classes,))
        wi = np.broadcast_to(np.asarray(window_index), (self.num_classes,))
        return PostProcParams(np.array(self.threshold_values)[ti], np.array(self.window_values)[wi])


def default_params(num_classes):
    """Fixed threshold 0.5 and window 7 for every class."""
    if num_classes < 1:
        raise ContractError("num_classes must be >= 1")
    return PostProcParams(np.full(num_classes, 0.5), np.full(num_classes, 7, dtype=np.int64))


def apply_thresholds(posteriors, thresholds):
    p = np.asarray(posteriors, dtype=np.float64)
    th = np.asarray(thresholds, dtype=np.float64)
    if p.size and (np.isnan(p).any() or p.min() < 0.0 or p.max() > 1.0):
        raise ContractError("posteriors must lie in [0, 1]")
    if th.size and (th.min() <= 0.0 or th.max() >= 1.0):
        raise ContractError("thresholds must lie in (0, 1)")
    return (p > th).astype(np.uint8)


def median_filter_column(column, window):
    window = int(window)
    if window < 3 or window % 2 == 0:
        raise ContractError(f"median window must be odd and >= 3, got {window}")
    col = np.asarray(column)
    if col.size and not np.isin(col, (0, 1)).all():
        raise ContractError("median_filter_column expects binary values")
    return kernels.median_filter_binary(np.ascontiguousarray(col, dtype=np.uint8), window)


def binarize(posteriors, params: PostProcParams, use_median=True):
    """Thresholded and (optionally) median-filtered (T, C) decisions."""
    if posteriors.shape[1] != params.num_classes:
        raise ContractError(
            f"clip has {posteriors.shape[1]} classes, params have {params.num_classes}"
        )
    frames = apply_thresholds(posteriors, params.thresholds)
    if use_median:
        for c in range(frames.shape[1]):
            frames[:, c] = kernels.median_filter_binary(
                np.ascontiguousarray(frames[:, c]), int(params.window_sizes[c])
            )
    return frames


def apply_stack(clip, params: PostProcParams, use_median=True):
    """Events predicted for ``clip`` under ``params``."""
    return decode_events(binarize(clip.posteriors, params, use_median), clip.hop, clip.clip_id)
