import csv
import itertools

import numpy as np
import pytest

from rlpost.dataset import SynthConfig, synth_generate
from rlpost.env import evaluate_params
from rlpost.grid import grid_search_independent, grid_search_per_class, tally_table
from rlpost.postproc import ParamGrid, PostProcParams

SMALL = dict(threshold_values=(0.3, 0.5, 0.7), window_values=(3, 7, 11))


def random_ds(seed, C=3, clips=6):
    rng = np.random.default_rng(seed)
    cfg = SynthConfig(
        num_clips=clips, num_classes=C, seed=seed, clip_seconds=4.0,
        noise_sigma=rng.uniform(0.0, 0.3, C).tolist(), flip_prob=rng.uniform(0.0, 0.2, C).tolist(),
        event_level=rng.uniform(0.4, 1.0, C).tolist(), background_level=rng.uniform(0.0, 0.4, C).tolist(),
        min_duration=0.5, max_duration=1.5, event_rate=1.0,
    )
    return synth_generate(cfg)


def test_table_shape(small_hetero_ds):
    grid = ParamGrid(num_classes=4, **SMALL)
    assert tally_table(small_hetero_ds, grid).shape == (3, 3, 4, 3)


def test_table_cells_match_direct_evaluation():
    ds = random_ds(1)
    grid = ParamGrid(num_classes=3, **SMALL)
    table = tally_table(ds, grid)
    for ti, wi in itertools.product(range(3), range(3)):
        rep = evaluate_params(ds, grid.params(ti, wi))
        got = [tuple(x) for x in table[ti, wi]]
        want = [(s.true_positives, s.false_positives, s.false_negatives) for s in rep.class_scores]
        assert got == want


@pytest.mark.parametrize("seed", range(5))
def test_per_class_dominates_independent(seed):
    ds = random_ds(seed)
    grid = ParamGrid(num_classes=3, **SMALL)
    table = tally_table(ds, grid)
    ind = grid_search_independent(ds, grid, table=table)
    per = grid_search_per_class(ds, grid, table=table)
    assert per.macro_f1 >= ind.macro_f1


@pytest.mark.parametrize("seed", range(3))
def test_results_reproduce_on_reevaluation(seed):
    ds = random_ds(10 + seed)
    grid = ParamGrid(num_classes=3, **SMALL)
    for search in (grid_search_independent, grid_search_per_class):
        res = search(ds, grid)
        assert evaluate_params(ds, res.params).macro_f1 == res.macro_f1


@pytest.mark.parametrize("seed", range(3))
def test_per_class_equals_full_product_brute_force(seed):
    ds = random_ds(20 + seed, C=2)
    grid = ParamGrid(num_classes=2, **SMALL)
    cells = list(itertools.product(grid.threshold_values, grid.window_values))
    best = max(
        evaluate_params(ds, PostProcParams([a[0], b[0]], [a[1], b[1]])).macro_f1
        for a, b in itertools.product(cells, cells)
    )
    assert grid_search_per_class(ds, grid).macro_f1 == pytest.approx(best, abs=1e-12)


def test_single_class_searches_agree():
    ds = random_ds(4, C=1)
    grid = ParamGrid(num_classes=1, **SMALL)
    a, b = grid_search_independent(ds, grid), grid_search_per_class(ds, grid)
    assert a.macro_f1 == b.macro_f1
    assert a.params.thresholds.tolist() == b.params.thresholds.tolist()
    assert a.params.window_sizes.tolist() == b.params.window_sizes.tolist()


def test_ties_pick_smallest_cell(noiseless_ds):
    # noiseless data is perfect almost everywhere; the first perfect cell wins
    grid = ParamGrid(num_classes=3, **SMALL)
    res = grid_search_independent(noiseless_ds, grid)
    assert res.macro_f1 == 1.0
    assert res.params.thresholds.tolist() == [0.3] * 3 and res.params.window_sizes.tolist() == [3] * 3


def test_without_median_windows_are_irrelevant():
    ds = random_ds(2)
    grid = ParamGrid(num_classes=3, **SMALL)
    table = tally_table(ds, grid, use_median=False)
    assert (table == table[:, :1]).all()


def test_score_table_covers_grid(tmp_path, noiseless_ds):
    grid = ParamGrid(num_classes=3, **SMALL)
    res = grid_search_per_class(noiseless_ds, grid)
    res.write_table(tmp_path / "s.csv", noiseless_ds.labels)
    with open(tmp_path / "s.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3 * 3 * (3 + 1)
    assert {r["class"] for r in rows} == set(noiseless_ds.labels) | {"macro"}
