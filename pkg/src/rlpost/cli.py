"""Command-line entry point: ``rlpost {synth,evaluate,grid,train,apply,report}``.

Exit codes: 0 success, 1 validation error (bad flags, files or parameters),
2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

from .agent import (
    TrainerConfig,
    TrainingError,
    extract_best_params,
    load_checkpoint,
    train,
)
from .dataset import (
    heterogeneous_config,
    load_manifest,
    load_params,
    noiseless_config,
    save_params,
    synth_generate,
    write_annotations,
    write_dataset,
)
from .env import evaluate_params, predict_events
from .errors import ContractError, DimensionError, LoadError, ValidationError
from .grid import grid_search_independent, grid_search_per_class, tally_table
from .postproc import DEFAULT_THRESHOLDS, WINDOW_SET, ParamGrid, default_params

log = logging.getLogger("rlpost")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2
SYNTH_FILES = ("manifest.csv", "classes.txt", "annotations.tsv", "synth_config.json")


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


@dataclass
class RunConfig:
    """Everything a command needs, validated before any work starts."""

    command: str
    manifest: str | None = None
    annotations: str | None = None
    params: str | None = None
    policy: str | None = None
    out: str | None = None
    seed: int = 0
    per_class: bool = True
    reward_mode: str = "per_segment"
    no_median: bool = False
    grid_thresholds: list = field(default_factory=lambda: list(DEFAULT_THRESHOLDS))
    grid_windows: list = field(default_factory=lambda: list(WINDOW_SET))
    episodes: int = 20
    batch_size: int = 4
    memory_size: int = 10000
    learning_rate: float = 0.001
    update_frequency: int = 4
    gamma: float = 0.99
    entropy_weight: float = 0.001
    value_weight: float = 0.5
    resume: bool = False
    force: bool = False
    preset: str = "heterogeneous"
    num_clips: int = 200
    num_classes: int = 4

    @classmethod
    def from_sources(cls, args: argparse.Namespace):
        known = {f.name for f in fields(cls)}
        values = {}
        if getattr(args, "config", None):
            try:
                payload = json.loads(Path(args.config).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ValidationError(f"cannot read config {args.config}: {exc}") from None
            unknown = sorted(set(payload) - known)
            if unknown:
                raise ValidationError(f"unknown config keys: {', '.join(unknown)}")
            values.update(payload)
        for k, v in vars(args).items():
            if k in known and v is not None:
                values[k] = v
        cfg = cls(**values)
        cfg.validate()
        return cfg

    def validate(self):
        if self.command in ("evaluate", "grid", "train", "apply") and not self.manifest:
            raise ValidationError(f"{self.command} needs --manifest")
        if self.command != "report" and not self.out:
            raise ValidationError(f"{self.command} needs --out")
        if self.command == "report" and not self.params:
            raise ValidationError("report needs --params pointing at a report JSON")
        if self.command == "apply" and not (self.params or self.policy):
            raise ValidationError("apply needs --params or --policy")
        if self.preset not in ("heterogeneous", "noiseless"):
            raise ValidationError(f"unknown preset {self.preset!r}")
        self.grid()
        self.trainer()

    def grid(self, num_classes=1):
        return ParamGrid(tuple(self.grid_thresholds), tuple(self.grid_windows), num_classes, self.per_class)

    def trainer(self):
        cfg = TrainerConfig(
            batch_size=self.batch_size,
            memory_size=self.memory_size,
            learning_rate=self.learning_rate,
            update_frequency=self.update_frequency,
            gamma=self.gamma,
            entropy_weight=self.entropy_weight,
            value_weight=self.value_weight,
            episodes=self.episodes,
            seed=self.seed,
            reward_mode=self.reward_mode,
            use_median=not self.no_median,
        )
        cfg.validate()
        return cfg


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of integers: {text!r}") from None


def _reward_mode(text):
    mapping = {"per-segment": "per_segment", "terminal": "terminal_macro"}
    if text not in mapping:
        raise argparse.ArgumentTypeError("choose from per-segment, terminal")
    return mapping[text]


def build_parser():
    parser = _Parser(prog="rlpost", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, data=True):
        p.add_argument("--config", help="JSON file of RunConfig fields")
        p.add_argument("--out")
        p.add_argument("--seed", type=int)
        if data:
            p.add_argument("--manifest")
            p.add_argument("--annotations")

    def grid_flags(p):
        p.add_argument("--grid-thresholds", type=_float_list, dest="grid_thresholds")
        p.add_argument("--grid-windows", type=_int_list, dest="grid_windows")
        mode = p.add_mutually_exclusive_group()
        mode.add_argument("--per-class", dest="per_class", action="store_true", default=None)
        mode.add_argument("--class-independent", dest="per_class", action="store_false")
        p.add_argument("--no-median", dest="no_median", action="store_true", default=None)

    p = sub.add_parser("synth", help="write a synthetic posteriorgram dataset")
    common(p, data=False)
    p.add_argument("--preset", choices=["heterogeneous", "noiseless"])
    p.add_argument("--num-clips", type=int, dest="num_clips")
    p.add_argument("--num-classes", type=int, dest="num_classes")
    p.add_argument("--force", action="store_true", default=None)

    p = sub.add_parser("evaluate", help="score fixed params on a dataset")
    common(p)
    p.add_argument("--params")
    p.add_argument("--no-median", dest="no_median", action="store_true", default=None)

    p = sub.add_parser("grid", help="exhaustive grid search")
    common(p)
    grid_flags(p)

    p = sub.add_parser("train", help="train the policy-gradient agent")
    common(p)
    grid_flags(p)
    p.add_argument("--reward-mode", type=_reward_mode, dest="reward_mode")
    p.add_argument("--episodes", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--memory-size", type=int, dest="memory_size")
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--update-frequency", type=int, dest="update_frequency")
    p.add_argument("--gamma", type=float)
    p.add_argument("--entropy-weight", type=float, dest="entropy_weight")
    p.add_argument("--value-weight", type=float, dest="value_weight")
    p.add_argument("--resume", action="store_true", default=None)

    p = sub.add_parser("apply", help="write predicted events for a dataset")
    common(p)
    p.add_argument("--params")
    p.add_argument("--policy", help="checkpoint from `train`; params are chosen per clip")
    p.add_argument("--no-median", dest="no_median", action="store_true", default=None)

    p = sub.add_parser("report", help="print a saved report")
    p.add_argument("--params", help="report JSON written by evaluate/grid/train")
    p.add_argument("--config")
    return parser


def _write_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def _format_report(payload):
    lines = [f"{payload.get('label', '')}  macro F1 = {100 * payload['macro_f1']:.2f}%"]
    for c in payload["classes"]:
        mark = "" if c["included"] else "  (excluded)"
        lines.append(f"  {c['label']:<20} F1={100 * c['f1']:6.2f}%  tp={c['tp']} fp={c['fp']} fn={c['fn']}{mark}")
    return "\n".join(lines)


def _load(cfg):
    return load_manifest(cfg.manifest, cfg.annotations)


def cmd_synth(cfg: RunConfig):
    out = Path(cfg.out)
    if out.exists() and any(out.iterdir()):
        if not cfg.force:
            raise ValidationError(f"{out} is not empty; pass --force to overwrite")
        for name in SYNTH_FILES:
            (out / name).unlink(missing_ok=True)
        post = out / "posteriors"
        if post.is_dir():
            for f in post.glob("*.csv"):
                f.unlink()
    if cfg.preset == "noiseless":
        synth = noiseless_config(cfg.num_clips, cfg.num_classes, cfg.seed)
    else:
        if cfg.num_classes != 4:
            raise ValidationError("the heterogeneous preset has exactly 4 classes")
        synth = heterogeneous_config(cfg.num_clips, cfg.seed)
    ds = synth_generate(synth)
    write_dataset(ds, out)
    _write_json(out / "synth_config.json", synth.to_dict())
    print(f"wrote {len(ds)} clips, {len(ds.events)} events to {out}")
    return EXIT_OK


def cmd_evaluate(cfg: RunConfig):
    ds = _load(cfg)
    if cfg.params:
        params, _, _ = load_params(cfg.params)
    else:
        params = default_params(ds.num_classes)
    report = evaluate_params(ds, params, use_median=not cfg.no_median)
    label = params.label() + (",no-median" if cfg.no_median else "")
    payload = {"label": label, **report.to_dict()}
    out = Path(cfg.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_json(out, payload)
    print(_format_report(payload))
    return EXIT_OK


def cmd_grid(cfg: RunConfig):
    ds = _load(cfg)
    grid = cfg.grid(ds.num_classes)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    table = tally_table(ds, grid, use_median=not cfg.no_median)
    indep = grid_search_independent(ds, grid, use_median=not cfg.no_median, table=table)
    per_class = grid_search_per_class(ds, grid, use_median=not cfg.no_median, table=table)
    chosen = per_class if cfg.per_class else indep
    save_params(chosen.params, out / "params.json", ds.labels, grid)
    chosen.write_table(out / "scores.csv", ds.labels)
    summary = {
        "label": "grid per-class" if cfg.per_class else "grid class-independent",
        "independent_macro_f1": indep.macro_f1,
        "per_class_macro_f1": per_class.macro_f1,
        "grid": grid.to_dict(),
        **chosen.report.to_dict(),
    }
    _write_json(out / "summary.json", summary)
    print(_format_report(summary))
    print(f"class-independent best {100 * indep.macro_f1:.2f}%, per-class best {100 * per_class.macro_f1:.2f}%")
    return EXIT_OK


def cmd_train(cfg: RunConfig):
    ds = _load(cfg)
    grid = cfg.grid(ds.num_classes)
    tcfg = cfg.trainer()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    ckpt = out / "checkpoint.npz"
    theta, training_log = train(ds, grid, tcfg, checkpoint=ckpt, resume=cfg.resume)
    training_log.write_csv(out / "training_log.csv")
    use_median = not cfg.no_median
    extracted = extract_best_params(theta, ds, grid, use_median=use_median)
    save_params(extracted.modal, out / "params.json", ds.labels, grid)
    _write_json(out / "per_clip_params.json", {
        clip.clip_id: {"thresholds": p.thresholds.tolist(), "window_sizes": p.window_sizes.tolist()}
        for clip, p in zip(ds.clips, extracted.per_clip)
    })
    baseline = evaluate_params(ds, default_params(ds.num_classes), use_median=use_median)
    payload = {
        "label": "PG " + ("class-dependent" if grid.class_dependent else "class-independent"),
        "default_macro_f1": baseline.macro_f1,
        "modal_params_macro_f1": extracted.modal_macro_f1,
        "improvement_points": 100 * (extracted.macro_f1 - baseline.macro_f1),
        **extracted.report.to_dict(),
    }
    _write_json(out / "report.json", payload)
    print(_format_report(payload))
    print(f"default params {100 * baseline.macro_f1:.2f}% -> trained {100 * extracted.macro_f1:.2f}%")
    return EXIT_OK


def cmd_apply(cfg: RunConfig):
    ds = _load(cfg)
    use_median = not cfg.no_median
    if cfg.policy:
        theta, _, meta = load_checkpoint(cfg.policy)
        grid = ParamGrid.from_dict(meta["grid"])
        if len(ds):
            params = extract_best_params(theta, ds, grid, use_median=use_median).per_clip
        else:
            params = []
    else:
        params, _, _ = load_params(cfg.params)
        if len(ds) and params.num_classes != ds.num_classes:
            raise ValidationError(f"params have {params.num_classes} classes, dataset {ds.num_classes}")
    events = predict_events(ds, params, use_median) if len(ds) else []
    out = Path(cfg.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_annotations(events, ds.labels, out)
    print(f"wrote {len(events)} events to {out}")
    return EXIT_OK


def cmd_report(cfg: RunConfig):
    path = Path(cfg.params)
    if not path.exists():
        raise LoadError(path, None, "report not found")
    print(_format_report(json.loads(path.read_text())))
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "evaluate": cmd_evaluate,
    "grid": cmd_grid,
    "train": cmd_train,
    "apply": cmd_apply,
    "report": cmd_report,
}


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        if args.verbose:
            logging.getLogger("rlpost").setLevel(logging.INFO)
        cfg = RunConfig.from_sources(args)
        return COMMANDS[cfg.command](cfg)
    except (ValidationError, LoadError, ContractError, DimensionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (TrainingError, FloatingPointError, OSError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
