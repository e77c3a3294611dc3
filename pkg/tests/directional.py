"""Class-dependent vs class-independent PG on the heterogeneous synthetic set."""
import time

from rlpost.agent import TrainerConfig, extract_best_params, train
from rlpost.dataset import heterogeneous_config, synth_generate
from rlpost.env import evaluate_params
from rlpost.postproc import ParamGrid, default_params


def directional_run(seed, episodes=20, num_clips=200):
    ds = synth_generate(heterogeneous_config(num_clips=num_clips, seed=seed))
    out = {"seed": seed, "default": evaluate_params(ds, default_params(ds.num_classes)).macro_f1}
    for name, dependent in (("dependent", True), ("independent", False)):
        start = time.perf_counter()
        grid = ParamGrid(num_classes=ds.num_classes, class_dependent=dependent)
        theta, _ = train(ds, grid, TrainerConfig(episodes=episodes, seed=seed))
        out[name] = extract_best_params(theta, ds, grid).macro_f1
        out[name + "_seconds"] = time.perf_counter() - start
    out["ordering_holds"] = out["dependent"] >= out["default"] + 0.03 and out["dependent"] >= out["independent"]
    return out
