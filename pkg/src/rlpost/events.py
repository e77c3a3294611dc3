"""Event decoding and collar-based event F1.

A predicted event matches a reference of the same class and clip when its
onset is within ``onset_collar`` seconds and its offset within
``max(offset_collar_abs, offset_collar_rel * reference_length)``. Per class
and clip, the number of true positives is the size of a maximum one-to-one
matching under that relation.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ContractError


@dataclass(frozen=True, order=True)
class Event:
    clip_id: str
    onset: float
    offset: float
    class_index: int

    def __post_init__(self):
        if not self.offset > self.onset:
            raise ContractError(f"event offset {self.offset} must exceed onset {self.onset}")
        if self.onset < 0:
            raise ContractError(f"event onset {self.onset} is negative")
        if self.class_index < 0:
            raise ContractError(f"negative class index {self.class_index}")


@dataclass(frozen=True)
class CollarConfig:
    onset_collar: float = 0.2
    offset_collar_abs: float = 0.2
    offset_collar_rel: float = 0.2

    def __post_init__(self):
        if min(self.onset_collar, self.offset_collar_abs, self.offset_collar_rel) < 0:
            raise ContractError("collars must be non-negative")


@dataclass
class ClassScores:
    true_positives: int = 0
    false_positives: int = 0
    false_negatives: int = 0

    @property
    def n_ref(self):
        return self.true_positives + self.false_negatives

    @property
    def n_pred(self):
        return self.true_positives + self.false_positives

    def __iadd__(self, other):
        self.true_positives += other.true_positives
        self.false_positives += other.false_positives
        self.false_negatives += other.false_negatives
        return self

    def f1(self):
        denom = 2 * self.true_positives + self.false_positives + self.false_negatives
        return 2 * self.true_positives / denom if denom > 0 else 0.0


@dataclass
class ScoreReport:
    """Per-class tallies and F1 plus the macro average.

    ``included`` flags classes that enter the macro mean: a class with no
    reference and no predicted events anywhere is left out. If no class is
    included there was nothing to detect and nothing was detected, and the
    macro F1 is 1.0.
    """

    class_scores: list[ClassScores]
    class_f1: list[float]
    included: list[bool]
    macro_f1: float
    labels: list[str] | None = field(default=None)

    @property
    def macro_f1_percent(self):
        return 100.0 * self.macro_f1

    def to_dict(self):
        labels = self.labels or [str(i) for i in range(len(self.class_scores))]
        return {
            "macro_f1": self.macro_f1,
            "macro_f1_percent": self.macro_f1_percent,
            "classes": [
                {
                    "label": labels[i],
                    "f1": self.class_f1[i],
                    "included": self.included[i],
                    "tp": s.true_positives,
                    "fp": s.false_positives,
                    "fn": s.false_negatives,
                }
                for i, s in enumerate(self.class_scores)
            ],
        }


def decode_events(binary_frames, hop, clip_id):
    """Turn each maximal run of ones in a (T, C) 0/1 matrix into an Event.

    Events are sorted by (class, onset).
    """
    if not hop > 0:
        raise ContractError(f"hop must be positive, got {hop}")
    frames = np.asarray(binary_frames)
    if frames.ndim == 1:
        frames = frames[:, None]
    if frames.size and not np.isin(frames, (0, 1)).all():
        raise ContractError("decode_events expects a binary matrix")
    frames = frames.astype(np.uint8)
    events = []
    for c in range(frames.shape[1]):
        starts, ends = kernels.decode_runs(np.ascontiguousarray(frames[:, c]))
        events.extend(
            Event(clip_id, float(s * hop), float(e * hop), c) for s, e in zip(starts, ends)
        )
    return events


def events_to_frames(events, num_frames, num_classes, hop):
    """Inverse of :func:`decode_events` for frame-aligned events."""
    out = np.zeros((num_frames, num_classes), dtype=np.uint8)
    for ev in events:
        start = int(round(ev.onset / hop))
        stop = int(round(ev.offset / hop))
        out[start:stop, ev.class_index] = 1
    return out


def events_match(pred, ref, collars=CollarConfig()):
    if pred.class_index != ref.class_index:
        raise ContractError(
            f"cannot match events of classes {pred.class_index} and {ref.class_index}"
        )
    if pred.clip_id != ref.clip_id:
        raise ContractError(f"cannot match events of clips {pred.clip_id!r} and {ref.clip_id!r}")
    offset_tol = max(collars.offset_collar_abs, collars.offset_collar_rel * (ref.offset - ref.onset))
    return (
        abs(pred.onset - ref.onset) <= collars.onset_collar
        and abs(pred.offset - ref.offset) <= offset_tol
    )


def max_matching(adjacency, n_right):
    """Size of a maximum bipartite matching (augmenting paths).

    ``adjacency[i]`` lists the right-side nodes left node ``i`` may pair with.
    """
    match_right = [-1] * n_right

    def augment(i, seen):
        for j in adjacency[i]:
            if seen[j]:
                continue
            seen[j] = True
            if match_right[j] < 0 or augment(match_right[j], seen):
                match_right[j] = i
                return True
        return False

    size = 0
    for i in range(len(adjacency)):
        if adjacency[i] and augment(i, [False] * n_right):
            size += 1
    return size


def _group(events):
    groups = defaultdict(list)
    for ev in events:
        groups[(ev.clip_id, ev.class_index)].append(ev)
    return groups


def match_events(preds, refs, collars=CollarConfig(), num_classes=None):
    """Per-class TP/FP/FN tallies summed over clips."""
    pred_groups = _group(preds)
    ref_groups = _group(refs)
    if num_classes is None:
        num_classes = 1 + max((k[1] for k in (*pred_groups, *ref_groups)), default=-1)
    scores = [ClassScores() for _ in range(num_classes)]
    for key in set(pred_groups) | set(ref_groups):
        p = pred_groups.get(key, [])
        r = ref_groups.get(key, [])
        if key[1] >= num_classes:
            raise ContractError(f"class index {key[1]} out of range for {num_classes} classes")
        tp = 0
        if p and r:
            adjacency = [[j for j, rr in enumerate(r) if events_match(pp, rr, collars)] for pp in p]
            tp = max_matching(adjacency, len(r))
        s = scores[key[1]]
        s.true_positives += tp
        s.false_positives += len(p) - tp
        s.false_negatives += len(r) - tp
    return scores


def macro_f1(scores, labels=None):
    if len(scores) < 1:
        raise ContractError("macro_f1 needs at least one class")
    class_f1 = [s.f1() for s in scores]
    included = [s.n_ref > 0 or s.n_pred > 0 for s in scores]
    used = [f for f, inc in zip(class_f1, included) if inc]
    macro = sum(used) / len(used) if used else 1.0
    return ScoreReport(list(scores), class_f1, included, macro, labels)


def evaluate(preds, refs, num_classes, collars=CollarConfig(), labels=None):
    """Dataset-level report for predicted vs reference events."""
    return macro_f1(match_events(preds, refs, collars, num_classes), labels)
