"""Compare the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeats N]

Times the GRU recurrence (forward and backward), the binary median filter,
run decoding, and one full training update, once per available backend.
"""
import argparse
import importlib
import os
import subprocess
import sys
import timeit

import numpy as np


def bench(fn, repeats):
    fn()  # warm-up
    return min(timeit.repeat(fn, number=1, repeat=repeats))


def kernel_cases(k, rng):
    T, H = 156, 32
    xp = rng.normal(size=(T, 3 * H))
    u = rng.normal(scale=0.3, size=(H, 3 * H))
    h0 = np.zeros(H)
    fwd = k.gru_recurrence(xp, u, h0)
    dh = rng.normal(size=(T, H))
    col = (rng.random(156) < 0.5).astype(np.uint8)
    return {
        "gru forward (T=156, H=32)": lambda: k.gru_recurrence(xp, u, h0),
        "gru backward (T=156, H=32)": lambda: k.gru_recurrence_backward(dh, u, h0, *fwd),
        "median filter (T=156, w=21)": lambda: k.median_filter_binary(col, 21),
        "decode runs (T=156)": lambda: k.decode_runs(col),
    }


def train_case():
    """One episode of training on 8 clips, through whichever backend is active."""
    from rlpost.agent import TrainerConfig, train
    from rlpost.dataset import heterogeneous_config, synth_generate
    from rlpost.postproc import ParamGrid

    ds = synth_generate(heterogeneous_config(num_clips=8, seed=0))
    grid = ParamGrid(num_classes=4)
    return lambda: train(ds, grid, TrainerConfig(episodes=1, seed=0))


def child(repeats):
    # runs in a subprocess so the backend is chosen fresh from the environment
    import rlpost.kernels as kernels

    print(f"{kernels.BACKEND}\t{bench(train_case(), repeats)}")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeats", type=int, default=20)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.child:
        child(max(1, args.repeats // 10))
        return

    from rlpost.kernels import backends

    impls = backends()
    rng = np.random.default_rng(0)
    results = {}
    for name, k in sorted(impls.items()):
        for case, fn in kernel_cases(k, rng).items():
            results.setdefault(case, {})[name] = bench(fn, args.repeats)

    for pure in ("0", "1"):
        env = dict(os.environ, RLPOST_PURE_PYTHON=pure)
        out = subprocess.run([sys.executable, __file__, "--child", "--repeats", str(args.repeats)],
                             env=env, capture_output=True, text=True, check=True).stdout.split()
        results.setdefault("train 1 episode (8 clips x 4 envs)", {})[out[0]] = float(out[1])

    names = sorted(impls)
    print(f"{'case':<38}" + "".join(f"{n:>14}" for n in names) + ("       speedup" if len(names) == 2 else ""))
    for case, row in results.items():
        line = f"{case:<38}" + "".join(f"{row.get(n, float('nan')) * 1e3:>11.3f} ms" for n in names)
        if len(names) == 2 and "compiled" in row and "python" in row:
            line += f"{row['python'] / row['compiled']:>13.1f}x"
        print(line)


if __name__ == "__main__":
    importlib.import_module("rlpost")
    main()
