import csv
import json

import pytest

from rlpost.agent import load_checkpoint
from rlpost.cli import main
from rlpost.dataset import load_annotations, load_manifest, load_params
from rlpost.env import evaluate_params


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def noiseless_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("noiseless")
    assert run("synth", "--out", d, "--preset", "noiseless", "--num-clips", 6, "--num-classes", 3, "--seed", 1) == 0
    return d


@pytest.fixture(scope="module")
def hetero_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("hetero")
    assert run("synth", "--out", d, "--num-clips", 8, "--seed", 2) == 0
    return d


def tree(d):
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}


def test_synth_is_byte_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("synth", "--out", a, "--num-clips", 3, "--seed", 7) == 0
    assert run("synth", "--out", b, "--num-clips", 3, "--seed", 7) == 0
    assert tree(a) == tree(b)
    ds = load_manifest(a / "manifest.csv")
    assert len(ds) == 3 and ds.num_classes == 4


def test_synth_needs_force(tmp_path):
    assert run("synth", "--out", tmp_path, "--num-clips", 2) == 0
    assert run("synth", "--out", tmp_path, "--num-clips", 2) == 1
    assert run("synth", "--out", tmp_path, "--num-clips", 3, "--seed", 4, "--force") == 0
    assert len(load_manifest(tmp_path / "manifest.csv")) == 3


def test_evaluate_noiseless_default(tmp_path, noiseless_dir, capsys):
    out = tmp_path / "r.json"
    assert run("evaluate", "--manifest", noiseless_dir / "manifest.csv", "--out", out) == 0
    rep = json.loads(out.read_text())
    assert rep["macro_f1"] == 1.0
    assert rep["label"] == "threshold=0.5,window=7"
    assert "threshold=0.5,window=7" in capsys.readouterr().out
    assert run("report", "--params", out) == 0


def test_evaluate_no_median(tmp_path, hetero_dir):
    m = hetero_dir / "manifest.csv"
    assert run("evaluate", "--manifest", m, "--out", tmp_path / "a.json") == 0
    assert run("evaluate", "--manifest", m, "--out", tmp_path / "b.json", "--no-median") == 0
    a = json.loads((tmp_path / "a.json").read_text())
    b = json.loads((tmp_path / "b.json").read_text())
    assert b["label"].endswith("no-median")
    ds = load_manifest(m)
    from rlpost.postproc import default_params

    assert b["macro_f1"] == evaluate_params(ds, default_params(4), use_median=False).macro_f1
    assert a["macro_f1"] == evaluate_params(ds, default_params(4)).macro_f1


def test_grid_outputs(tmp_path, hetero_dir):
    m = hetero_dir / "manifest.csv"
    out = tmp_path / "g"
    assert run("grid", "--manifest", m, "--out", out, "--grid-thresholds", "0.2,0.5,0.8",
               "--grid-windows", "3,9") == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["per_class_macro_f1"] >= summary["independent_macro_f1"]
    with open(out / "scores.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3 * 2 * 5
    params, labels, grid = load_params(out / "params.json")
    assert evaluate_params(load_manifest(m), params).macro_f1 == summary["macro_f1"]


def test_grid_rejects_bad_window(tmp_path, hetero_dir):
    assert run("grid", "--manifest", hetero_dir / "manifest.csv", "--out", tmp_path, "--grid-windows", "4") == 1


def test_train_class_independent_and_resume(tmp_path, hetero_dir):
    m = hetero_dir / "manifest.csv"
    out = tmp_path / "t"
    common = ("train", "--manifest", m, "--out", out, "--class-independent", "--batch-size", 2)
    assert run(*common, "--episodes", 1) == 0
    theta, _, meta = load_checkpoint(out / "checkpoint.npz")
    assert theta.heads == 1 and meta["episode"] == 0
    assert run(*common, "--episodes", 2, "--resume") == 0
    _, _, meta = load_checkpoint(out / "checkpoint.npz")
    assert meta["episode"] == 1
    with open(out / "training_log.csv") as fh:
        assert [r["episode"] for r in csv.DictReader(fh)] == ["0", "1"]
    params, _, _ = load_params(out / "params.json")
    assert len(set(params.thresholds.tolist())) == 1
    rep = json.loads((out / "report.json").read_text())
    assert {"default_macro_f1", "macro_f1", "improvement_points"} <= set(rep)


def test_apply_round_trip(tmp_path, noiseless_dir):
    m = noiseless_dir / "manifest.csv"
    out = tmp_path / "pred.tsv"
    params = tmp_path / "p.json"
    params.write_text(json.dumps({"thresholds": [0.5] * 3, "window_sizes": [7] * 3}))
    assert run("apply", "--manifest", m, "--params", params, "--out", out) == 0
    ds = load_manifest(m)
    preds = load_annotations(out, ds.labels)
    key = lambda e: (e.clip_id, e.class_index, e.onset)
    assert len(preds) == len(ds.events)
    for p, r in zip(sorted(preds, key=key), sorted(ds.events, key=key)):
        assert (p.clip_id, p.class_index) == (r.clip_id, r.class_index)
        assert abs(p.onset - r.onset) < 1e-6 and abs(p.offset - r.offset) < 1e-6


def test_apply_with_policy(tmp_path, noiseless_dir):
    m = noiseless_dir / "manifest.csv"
    assert run("train", "--manifest", m, "--out", tmp_path / "t", "--episodes", 1, "--batch-size", 1) == 0
    out = tmp_path / "pred.tsv"
    assert run("apply", "--manifest", m, "--policy", tmp_path / "t" / "checkpoint.npz", "--out", out) == 0
    load_annotations(out, load_manifest(m).labels)


def test_apply_empty_dataset(tmp_path):
    (tmp_path / "classes.txt").write_text("A\nB\n")
    (tmp_path / "manifest.csv").write_text("clip_id,path,hop_seconds,num_frames,num_classes\n")
    params = tmp_path / "p.json"
    params.write_text(json.dumps({"thresholds": [0.5, 0.5], "window_sizes": [7, 7]}))
    out = tmp_path / "pred.tsv"
    assert run("apply", "--manifest", tmp_path / "manifest.csv", "--params", params, "--out", out) == 0
    assert load_annotations(out, ["A", "B"]) == []


def test_exit_codes(tmp_path, noiseless_dir):
    assert run("evaluate", "--out", tmp_path / "x.json") == 1  # missing manifest
    assert run("evaluate", "--manifest", tmp_path / "missing.csv", "--out", tmp_path / "x.json") == 1
    assert run("bogus") == 1
    assert run("train", "--manifest", noiseless_dir / "manifest.csv", "--out", tmp_path, "--gamma", "2") == 1
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"not_a_key": 1}))
    assert run("evaluate", "--config", cfg, "--manifest", noiseless_dir / "manifest.csv", "--out", tmp_path / "y") == 1
    # unwritable output location is a runtime failure
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert run("grid", "--manifest", noiseless_dir / "manifest.csv", "--out", blocker / "sub",
               "--grid-thresholds", "0.5", "--grid-windows", "3") == 2


def test_config_file_supplies_defaults(tmp_path, noiseless_dir):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"manifest": str(noiseless_dir / "manifest.csv"), "no_median": True}))
    out = tmp_path / "r.json"
    assert run("evaluate", "--config", cfg, "--out", out) == 0
    assert json.loads(out.read_text())["label"].endswith("no-median")
