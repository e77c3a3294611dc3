"""Posteriorgram datasets: file formats, loaders and a synthetic generator.

On-disk layout of a dataset directory::

    manifest.csv      clip_id,path,hop_seconds,num_frames,num_classes
    classes.txt       one class label per line, in posterior column order
    annotations.tsv   clip_id<TAB>onset<TAB>offset<TAB>label
    posteriors/*.csv  one row per frame, one column per class

Loaders reject malformed input with a :class:`LoadError` naming file and line.
"""
from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import LoadError, ValidationError
from .events import Event
from .postproc import WINDOW_SET, ParamGrid, PostProcParams

MANIFEST_HEADER = ["clip_id", "path", "hop_seconds", "num_frames", "num_classes"]
ANNOTATION_HEADER = ["clip_id", "onset", "offset", "label"]
MAX_SEGMENT_SECONDS = 10.0


@dataclass
class PosteriorClip:
    clip_id: str
    hop: float
    posteriors: np.ndarray  # (T, C)

    @property
    def num_frames(self):
        return self.posteriors.shape[0]

    @property
    def num_classes(self):
        return self.posteriors.shape[1]


@dataclass
class Dataset:
    clips: list
    events: list
    labels: list

    def __post_init__(self):
        self._by_clip = defaultdict(list)
        for ev in self.events:
            self._by_clip[ev.clip_id].append(ev)

    def __len__(self):
        return len(self.clips)

    @property
    def num_classes(self):
        return len(self.labels)

    def references(self, clip_id):
        return self._by_clip.get(clip_id, [])


def _read_labels(path):
    path = Path(path)
    if not path.exists():
        raise LoadError(path, None, "class table not found")
    labels = [ln.strip() for ln in path.read_text().splitlines() if ln.strip()]
    if len(set(labels)) != len(labels):
        raise LoadError(path, None, "duplicate class labels")
    return labels


def _parse_float(text, path, line, what):
    try:
        value = float(text)
    except ValueError:
        raise LoadError(path, line, f"{what} {text!r} is not a number") from None
    if not math.isfinite(value):
        raise LoadError(path, line, f"{what} {text!r} is not finite")
    return value


def load_posteriors(path, num_frames=None, num_classes=None):
    path = Path(path)
    if not path.exists():
        raise LoadError(path, None, "posterior file not found")
    rows = []
    with path.open(newline="") as fh:
        for line, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if num_classes is not None and len(row) != num_classes:
                raise LoadError(path, line, f"expected {num_classes} columns, found {len(row)}")
            values = [_parse_float(x, path, line, "probability") for x in row]
            for v in values:
                if not 0.0 <= v <= 1.0:
                    raise LoadError(path, line, f"probability {v} outside [0, 1]")
            if rows and len(values) != len(rows[0]):
                raise LoadError(path, line, "ragged row")
            rows.append(values)
    if num_frames is not None and len(rows) != num_frames:
        raise LoadError(path, None, f"expected {num_frames} frames, found {len(rows)}")
    return np.array(rows, dtype=np.float64).reshape(len(rows), num_classes or (len(rows[0]) if rows else 0))


def load_annotations(path, labels):
    """Reference (or predicted) events from a TSV file."""
    path = Path(path)
    if not path.exists():
        raise LoadError(path, None, "annotation file not found")
    index = {lab: i for i, lab in enumerate(labels)}
    events = []
    with path.open(newline="") as fh:
        for line, row in enumerate(csv.reader(fh, delimiter="\t"), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if line == 1 and row[1:3] == ["onset", "offset"]:
                continue
            if len(row) != 4:
                raise LoadError(path, line, f"expected 4 tab-separated fields, found {len(row)}")
            clip_id, on, off, label = row
            onset = _parse_float(on, path, line, "onset")
            offset = _parse_float(off, path, line, "offset")
            if onset < 0:
                raise LoadError(path, line, f"negative onset {onset}")
            if not offset > onset:
                raise LoadError(path, line, f"offset {offset} is not after onset {onset}")
            if label not in index:
                raise LoadError(path, line, f"label {label!r} is not in the class table")
            events.append(Event(clip_id, onset, offset, index[label]))
    return events


def load_manifest(path, annotations=None, labels=None, max_segment_seconds=MAX_SEGMENT_SECONDS):
    """Load and validate a whole dataset.

    ``annotations`` defaults to ``annotations.tsv`` beside the manifest (an
    absent default file means no references); ``labels`` defaults to the
    contents of ``classes.txt`` beside the manifest.
    """
    path = Path(path)
    if not path.exists():
        raise LoadError(path, None, "manifest not found")
    root = path.parent
    if labels is None:
        labels = _read_labels(root / "classes.txt")
    clips = []
    seen = set()
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != MANIFEST_HEADER:
            raise LoadError(path, 1, f"header must be {','.join(MANIFEST_HEADER)}")
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise LoadError(path, line, f"expected 5 fields, found {len(row)}")
            clip_id, rel, hop_s, nf_s, nc_s = row
            if clip_id in seen:
                raise LoadError(path, line, f"duplicate clip id {clip_id!r}")
            seen.add(clip_id)
            hop = _parse_float(hop_s, path, line, "hop")
            if hop <= 0:
                raise LoadError(path, line, f"hop must be positive, got {hop}")
            try:
                nf, nc = int(nf_s), int(nc_s)
            except ValueError:
                raise LoadError(path, line, "num_frames and num_classes must be integers") from None
            if nc != len(labels):
                raise LoadError(path, line, f"num_classes {nc} != {len(labels)} labels in class table")
            if nf * hop > max_segment_seconds + 1e-9:
                raise LoadError(path, line, f"clip spans {nf * hop:.3f} s > {max_segment_seconds} s")
            post = load_posteriors(root / rel, nf, nc)
            clips.append(PosteriorClip(clip_id, hop, post))
    if annotations is None:
        default = root / "annotations.tsv"
        events = load_annotations(default, labels) if default.exists() else []
        ann_path = default
    else:
        ann_path = Path(annotations)
        events = load_annotations(ann_path, labels)
    for ev in events:
        if ev.clip_id not in seen:
            raise LoadError(ann_path, None, f"annotation for unknown clip {ev.clip_id!r}")
    return Dataset(clips, events, list(labels))


def write_annotations(events, labels, path):
    path = Path(path)
    ordered = sorted(events, key=lambda e: (e.clip_id, e.class_index, e.onset))
    with path.open("w", newline="") as fh:
        fh.write("\t".join(ANNOTATION_HEADER) + "\n")
        for ev in ordered:
            fh.write(f"{ev.clip_id}\t{ev.onset:.6f}\t{ev.offset:.6f}\t{labels[ev.class_index]}\n")


def write_dataset(ds: Dataset, out_dir):
    out = Path(out_dir)
    (out / "posteriors").mkdir(parents=True, exist_ok=True)
    (out / "classes.txt").write_text("".join(f"{lab}\n" for lab in ds.labels))
    with (out / "manifest.csv").open("w", newline="") as fh:
        fh.write(",".join(MANIFEST_HEADER) + "\n")
        for clip in ds.clips:
            rel = f"posteriors/{clip.clip_id}.csv"
            fh.write(f"{clip.clip_id},{rel},{clip.hop!r},{clip.num_frames},{clip.num_classes}\n")
            np.savetxt(out / rel, clip.posteriors, fmt="%.17g", delimiter=",")
    write_annotations(ds.events, ds.labels, out / "annotations.tsv")


def save_params(params: PostProcParams, path, labels=None, grid: ParamGrid | None = None, extra=None):
    payload = {
        "thresholds": [float(x) for x in params.thresholds],
        "window_sizes": [int(w) for w in params.window_sizes],
        "class_labels": list(labels) if labels is not None else None,
        "window_set": list(params.allowed_windows),
        "grid": grid.to_dict() if grid is not None else None,
    }
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_params(path):
    """Read params saved by :func:`save_params`; returns (params, labels, grid)."""
    path = Path(path)
    if not path.exists():
        raise LoadError(path, None, "parameter file not found")
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise LoadError(path, exc.lineno, f"invalid JSON: {exc.msg}") from None
    for key in ("thresholds", "window_sizes"):
        if key not in payload:
            raise ValidationError(f"{path}: missing field {key!r}")
    window_set = tuple(payload.get("window_set") or WINDOW_SET)
    params = PostProcParams(payload["thresholds"], payload["window_sizes"], allowed_windows=window_set)
    grid = ParamGrid.from_dict(payload["grid"]) if payload.get("grid") else None
    return params, payload.get("class_labels"), grid


def _per_class(value, n, name):
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise ValidationError(f"{name} needs 1 or {n} values, got {arr.size}")
    return arr


@dataclass
class SynthConfig:
    """Synthetic posteriorgram generator settings.

    Per-class fields accept a scalar (shared) or one value per class.
    ``event_level`` / ``background_level`` set the clean posterior inside and
    outside events; ``blur_frames`` turns boundaries into linear ramps of
    ``2 * blur_frames + 1`` frames; ``flip_prob`` flips single frames
    (``p -> 1 - p``) to create impulsive false positives and negatives.
    """

    num_clips: int = 50
    num_classes: int = 4
    hop: float = 0.064
    clip_seconds: float = 10.0
    event_rate: object = 1.5
    min_duration: object = 1.0
    max_duration: object = 4.0
    min_gap: float = 1.0
    noise_sigma: object = 0.0
    flip_prob: object = 0.0
    blur_frames: object = 0
    event_level: object = 1.0
    background_level: object = 0.0
    seed: int = 0
    labels: list | None = None

    def validate(self):
        C = self.num_classes
        if self.num_clips < 0 or C < 1:
            raise ValidationError("num_clips must be >= 0 and num_classes >= 1")
        if not self.hop > 0 or not self.clip_seconds > 0:
            raise ValidationError("hop and clip_seconds must be positive")
        if self.clip_seconds > MAX_SEGMENT_SECONDS + 1e-9:
            raise ValidationError(f"clip_seconds exceeds {MAX_SEGMENT_SECONDS}")
        for name in ("event_rate", "min_duration", "max_duration", "noise_sigma", "flip_prob",
                     "blur_frames", "event_level", "background_level"):
            arr = _per_class(getattr(self, name), C, name)
            if (arr < 0).any():
                raise ValidationError(f"{name} must be non-negative")
        if (_per_class(self.min_duration, C, "min_duration") <= 0).any():
            raise ValidationError("durations must be positive")
        if (_per_class(self.max_duration, C, "") < _per_class(self.min_duration, C, "")).any():
            raise ValidationError("max_duration must be >= min_duration")
        for name in ("flip_prob", "event_level", "background_level"):
            if (_per_class(getattr(self, name), C, name) > 1).any():
                raise ValidationError(f"{name} must lie in [0, 1]")
        if self.labels is not None and len(self.labels) != C:
            raise ValidationError("labels must have num_classes entries")

    def to_dict(self):
        d = asdict(self)
        return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in d.items()}


def _place_events(rng, n_frames, count, dmin, dmax, gap):
    spans = []
    for _ in range(count):
        for _attempt in range(50):
            dur = int(rng.integers(dmin, dmax + 1))
            if dur > n_frames:
                break
            start = int(rng.integers(0, n_frames - dur + 1))
            stop = start + dur
            if all(stop + gap <= s or start >= e + gap for s, e in spans):
                spans.append((start, stop))
                break
    return sorted(spans)


def synth_generate(cfg: SynthConfig) -> Dataset:
    """Deterministic synthetic dataset with known reference events."""
    cfg.validate()
    C = cfg.num_classes
    pc = {
        name: _per_class(getattr(cfg, name), C, name)
        for name in ("event_rate", "min_duration", "max_duration", "noise_sigma", "flip_prob",
                     "blur_frames", "event_level", "background_level")
    }
    n_frames = int(math.floor(cfg.clip_seconds / cfg.hop + 1e-9))
    dmin = np.maximum(1, np.ceil(pc["min_duration"] / cfg.hop - 1e-9)).astype(int)
    dmax = np.maximum(dmin, np.floor(pc["max_duration"] / cfg.hop + 1e-9)).astype(int)
    gap = int(math.ceil(cfg.min_gap / cfg.hop - 1e-9))
    labels = list(cfg.labels) if cfg.labels is not None else [f"class_{c}" for c in range(C)]
    rng = np.random.default_rng(cfg.seed)
    clips, events = [], []
    for i in range(cfg.num_clips):
        clip_id = f"clip_{i:05d}"
        post = np.empty((n_frames, C))
        for c in range(C):
            count = int(rng.poisson(pc["event_rate"][c]))
            spans = _place_events(rng, n_frames, count, dmin[c], dmax[c], gap)
            ideal = np.zeros(n_frames)
            for s, e in spans:
                ideal[s:e] = 1.0
                events.append(Event(clip_id, s * cfg.hop, e * cfg.hop, c))
            b = int(pc["blur_frames"][c])
            if b > 0:
                padded = np.concatenate((np.full(b, ideal[0]), ideal, np.full(b, ideal[-1])))
                ideal = np.convolve(padded, np.ones(2 * b + 1) / (2 * b + 1), mode="valid")
            lo, hi = pc["background_level"][c], pc["event_level"][c]
            col = lo + (hi - lo) * ideal
            flips = rng.random(n_frames) < pc["flip_prob"][c]
            col = np.where(flips, 1.0 - col, col)
            sigma = pc["noise_sigma"][c]
            if sigma > 0:
                col = col + rng.normal(0.0, sigma, n_frames)
            post[:, c] = np.clip(col, 0.0, 1.0)
        clips.append(PosteriorClip(clip_id, cfg.hop, post))
    events.sort(key=lambda e: (e.clip_id, e.class_index, e.onset))
    return Dataset(clips, events, labels)


def heterogeneous_config(num_clips=200, seed=0):
    """Four classes whose best thresholds and windows differ.

    0: clean but weak posteriors (peaks near 0.4) -> needs a low threshold.
    1: strong impulsive flips -> needs a wide median window.
    2: high background (~0.6) and mild noise -> needs a high threshold.
    3: blurred boundaries, moderate noise -> mid threshold, small window.
    """
    return SynthConfig(
        num_clips=num_clips,
        num_classes=4,
        hop=0.064,
        clip_seconds=10.0,
        event_rate=[1.5, 1.5, 1.5, 1.5],
        min_duration=[1.0, 1.5, 1.0, 0.6],
        max_duration=[3.0, 4.0, 3.0, 2.0],
        min_gap=1.0,
        noise_sigma=[0.05, 0.05, 0.08, 0.12],
        flip_prob=[0.0, 0.15, 0.02, 0.0],
        blur_frames=[0, 0, 2, 4],
        event_level=[0.4, 0.95, 0.95, 0.9],
        background_level=[0.05, 0.05, 0.6, 0.1],
        seed=seed,
    )


def noiseless_config(num_clips=20, num_classes=4, seed=0):
    return SynthConfig(num_clips=num_clips, num_classes=num_classes, seed=seed)
