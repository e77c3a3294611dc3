"""Exhaustive grid search over thresholds and median windows.

Class ``c``'s predicted events depend only on posterior column ``c`` and that
class's (threshold, window), so one pass filling a per-class tally table per
grid cell serves both the class-independent search (same cell for every
class) and the per-class search (best cell chosen separately per class).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import kernels
from .events import ClassScores, CollarConfig, decode_events, macro_f1, match_events
from .postproc import ParamGrid, PostProcParams, apply_thresholds


@dataclass
class GridResult:
    params: PostProcParams
    macro_f1: float
    report: object
    class_f1: np.ndarray  # (n_thresholds, n_windows, C)
    macro_table: np.ndarray  # (n_thresholds, n_windows), class-independent macro F1
    grid: ParamGrid
    per_class: bool

    def rows(self):
        """Score-table rows (threshold, window, class, f1); class 'macro' for the average."""
        out = []
        for ti, th in enumerate(self.grid.threshold_values):
            for wi, w in enumerate(self.grid.window_values):
                for c in range(self.class_f1.shape[2]):
                    out.append((th, w, str(c), float(self.class_f1[ti, wi, c])))
                out.append((th, w, "macro", float(self.macro_table[ti, wi])))
        return out

    def write_table(self, path, labels=None):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["threshold", "window", "class", "f1"])
            for th, w, c, f in self.rows():
                if labels is not None and c != "macro":
                    c = labels[int(c)]
                writer.writerow([repr(th), w, c, repr(f)])


def tally_table(dataset, grid: ParamGrid, collars=CollarConfig(), use_median=True):
    """Per-class (TP, FP, FN) for every grid cell: array (nT, nW, C, 3)."""
    C = dataset.num_classes
    nT, nW = grid.n_thresholds, grid.n_windows
    table = np.zeros((nT, nW, C, 3), dtype=np.int64)
    for clip in dataset.clips:
        refs = dataset.references(clip.clip_id)
        refs_by_class = [[e for e in refs if e.class_index == c] for c in range(C)]
        for c in range(C):
            col = clip.posteriors[:, c]
            for ti, th in enumerate(grid.threshold_values):
                binary = apply_thresholds(col, th)
                for wi, w in enumerate(grid.window_values):
                    frames = kernels.median_filter_binary(binary, w) if use_median else binary
                    preds = decode_events(frames, clip.hop, clip.clip_id)
                    preds = [e.__class__(e.clip_id, e.onset, e.offset, c) for e in preds]
                    s = match_events(preds, refs_by_class[c], collars, C)[c]
                    table[ti, wi, c] += (s.true_positives, s.false_positives, s.false_negatives)
                    if not use_median:
                        table[ti, wi + 1 :, c] += (s.true_positives, s.false_positives, s.false_negatives)
                        break
    return table


def _scores(tallies):
    return [ClassScores(*map(int, t)) for t in tallies]


def _f1_tables(table):
    tp, fp, fn = table[..., 0], table[..., 1], table[..., 2]
    denom = 2 * tp + fp + fn
    f1 = np.where(denom > 0, 2 * tp / np.maximum(denom, 1), 0.0)
    nT, nW, _ = f1.shape
    macro = np.empty((nT, nW))
    for ti in range(nT):
        for wi in range(nW):
            macro[ti, wi] = macro_f1(_scores(table[ti, wi])).macro_f1
    return f1, macro


def _argmax_first(values):
    """Index of the first maximum in row-major order (smaller threshold, then window)."""
    flat = np.asarray(values).reshape(-1)
    best = 0
    for i in range(1, flat.size):
        if flat[i] > flat[best]:
            best = i
    return np.unravel_index(best, np.asarray(values).shape)


def grid_search_independent(dataset, grid: ParamGrid, collars=CollarConfig(), use_median=True, table=None):
    if table is None:
        table = tally_table(dataset, grid, collars, use_median)
    f1, macro = _f1_tables(table)
    ti, wi = _argmax_first(macro)
    params = grid.params(ti, wi)
    report = macro_f1(_scores(table[ti, wi]), dataset.labels)
    return GridResult(params, report.macro_f1, report, f1, macro, grid, per_class=False)


def grid_search_per_class(dataset, grid: ParamGrid, collars=CollarConfig(), use_median=True, table=None):
    if table is None:
        table = tally_table(dataset, grid, collars, use_median)
    f1, macro = _f1_tables(table)
    C = dataset.num_classes
    t_idx = np.empty(C, dtype=np.int64)
    w_idx = np.empty(C, dtype=np.int64)
    chosen = []
    for c in range(C):
        tp, fp, fn = table[..., c, 0], table[..., c, 1], table[..., c, 2]
        # a class with no references anywhere is best left out of the mean,
        # which happens exactly when it predicts nothing
        key = np.where(tp + fn > 0, f1[..., c], np.where(fp == 0, 1.0, 0.0))
        ti, wi = _argmax_first(key)
        t_idx[c], w_idx[c] = ti, wi
        chosen.append(table[ti, wi, c])
    params = grid.params(t_idx, w_idx)
    report = macro_f1(_scores(chosen), dataset.labels)
    return GridResult(params, report.macro_f1, report, f1, macro, grid, per_class=True)
