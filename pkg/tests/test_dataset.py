import json

import numpy as np
import pytest

from rlpost.dataset import (
    SynthConfig,
    load_annotations,
    load_manifest,
    load_params,
    load_posteriors,
    save_params,
    synth_generate,
    write_dataset,
)
from rlpost.env import evaluate_params
from rlpost.errors import LoadError, ValidationError
from rlpost.grid import grid_search_per_class
from rlpost.postproc import ParamGrid, PostProcParams, default_params


def write(path, text):
    path.write_text(text)
    return path


def test_posteriors_round_trip(tmp_path):
    p = write(tmp_path / "a.csv", "0.1,0.9\n0.5,0.5\n")
    assert load_posteriors(p, 2, 2).tolist() == [[0.1, 0.9], [0.5, 0.5]]


def test_posteriors_out_of_range_names_line(tmp_path):
    p = write(tmp_path / "a.csv", "0.1,0.9\n0.5,1.5\n")
    with pytest.raises(LoadError) as exc:
        load_posteriors(p, 2, 2)
    assert exc.value.line == 2 and str(p) in str(exc.value)


def test_posteriors_wrong_width(tmp_path):
    p = write(tmp_path / "a.csv", "0.1\n")
    with pytest.raises(LoadError):
        load_posteriors(p, 1, 2)


def test_posteriors_nan(tmp_path):
    p = write(tmp_path / "a.csv", "nan,0.1\n")
    with pytest.raises(LoadError):
        load_posteriors(p, 1, 2)


def test_annotations_parse_with_header(tmp_path):
    p = write(tmp_path / "a.tsv", "clip_id\tonset\toffset\tlabel\nc1\t0.5\t1.5\tDog\n")
    evs = load_annotations(p, ["Speech", "Dog"])
    assert [(e.clip_id, e.onset, e.offset, e.class_index) for e in evs] == [("c1", 0.5, 1.5, 1)]


@pytest.mark.parametrize("row", ["c1\t1.0\t0.5\tDog", "c1\t-1\t0.5\tDog", "c1\t0.1\t0.5\tCat", "c1\tx\t0.5\tDog",
                                 "c1\t0.1\t0.5"])
def test_annotations_errors_name_line(tmp_path, row):
    p = write(tmp_path / "a.tsv", "c0\t0.0\t1.0\tDog\n" + row + "\n")
    with pytest.raises(LoadError) as exc:
        load_annotations(p, ["Speech", "Dog"])
    assert exc.value.line == 2
    assert f"{p}:2:" in str(exc.value)


def test_manifest_round_trip(tmp_path, noiseless_ds):
    write_dataset(noiseless_ds, tmp_path)
    ds = load_manifest(tmp_path / "manifest.csv")
    assert ds.labels == noiseless_ds.labels
    assert len(ds) == len(noiseless_ds)
    for a, b in zip(ds.clips, noiseless_ds.clips):
        assert a.clip_id == b.clip_id and a.hop == b.hop
        assert np.array_equal(a.posteriors, b.posteriors)
    assert [(e.clip_id, e.class_index) for e in ds.events] == [(e.clip_id, e.class_index) for e in noiseless_ds.events]
    for a, b in zip(ds.events, noiseless_ds.events):
        assert abs(a.onset - b.onset) < 1e-6 and abs(a.offset - b.offset) < 1e-6


def test_manifest_rejects_long_clip(tmp_path):
    write(tmp_path / "classes.txt", "A\n")
    write(tmp_path / "p.csv", "0.1\n" * 200)
    write(tmp_path / "manifest.csv", "clip_id,path,hop_seconds,num_frames,num_classes\nc,p.csv,0.064,200,1\n")
    with pytest.raises(LoadError) as exc:
        load_manifest(tmp_path / "manifest.csv")
    assert exc.value.line == 2


def test_manifest_class_count_mismatch(tmp_path):
    write(tmp_path / "classes.txt", "A\nB\n")
    write(tmp_path / "p.csv", "0.1\n")
    write(tmp_path / "manifest.csv", "clip_id,path,hop_seconds,num_frames,num_classes\nc,p.csv,0.064,1,1\n")
    with pytest.raises(LoadError):
        load_manifest(tmp_path / "manifest.csv")


def test_manifest_bad_header(tmp_path):
    write(tmp_path / "classes.txt", "A\n")
    write(tmp_path / "manifest.csv", "id,file\n")
    with pytest.raises(LoadError) as exc:
        load_manifest(tmp_path / "manifest.csv")
    assert exc.value.line == 1


def test_manifest_unknown_clip_annotation(tmp_path):
    write(tmp_path / "classes.txt", "A\n")
    write(tmp_path / "p.csv", "0.1\n")
    write(tmp_path / "manifest.csv", "clip_id,path,hop_seconds,num_frames,num_classes\nc,p.csv,0.064,1,1\n")
    write(tmp_path / "annotations.tsv", "zzz\t0.0\t0.5\tA\n")
    with pytest.raises(LoadError):
        load_manifest(tmp_path / "manifest.csv")


def test_params_round_trip(tmp_path):
    params = PostProcParams([0.25, 0.75], [3, 21])
    grid = ParamGrid((0.25, 0.75), (3, 21), 2)
    save_params(params, tmp_path / "p.json", ["a", "b"], grid)
    back, labels, g = load_params(tmp_path / "p.json")
    assert back.thresholds.tolist() == [0.25, 0.75] and back.window_sizes.tolist() == [3, 21]
    assert labels == ["a", "b"] and g.to_dict() == grid.to_dict()


@pytest.mark.parametrize("th,w", [([0.5], [4]), ([0.0], [3])])
def test_params_invalid_file(tmp_path, th, w):
    (tmp_path / "p.json").write_text(json.dumps({"thresholds": th, "window_sizes": w}))
    with pytest.raises(ValidationError):
        load_params(tmp_path / "p.json")


def test_synth_deterministic():
    cfg = SynthConfig(num_clips=5, num_classes=3, noise_sigma=0.1, flip_prob=0.05, seed=42)
    a, b = synth_generate(cfg), synth_generate(cfg)
    for x, y in zip(a.clips, b.clips):
        assert np.array_equal(x.posteriors, y.posteriors)
    assert a.events == b.events
    c = synth_generate(SynthConfig(num_clips=5, num_classes=3, noise_sigma=0.1, flip_prob=0.05, seed=43))
    assert not all(np.array_equal(x.posteriors, y.posteriors) for x, y in zip(a.clips, c.clips))


def test_synth_validation():
    with pytest.raises(ValidationError):
        synth_generate(SynthConfig(flip_prob=1.5))
    with pytest.raises(ValidationError):
        synth_generate(SynthConfig(num_classes=2, noise_sigma=[0.1, 0.1, 0.1]))
    with pytest.raises(ValidationError):
        synth_generate(SynthConfig(clip_seconds=12.0))


def test_noiseless_default_scores_one(noiseless_ds):
    assert evaluate_params(noiseless_ds, default_params(noiseless_ds.num_classes)).macro_f1 == 1.0


def test_impulsive_class_prefers_wider_window(flip_ds):
    res = grid_search_per_class(flip_ds, ParamGrid((0.5,), (3, 5, 7, 9, 11, 13), 2))
    w0, w1 = res.params.window_sizes
    assert w0 > w1
