"""Policy-gradient training of the post-processing policy.

``batch_size`` copies of the environment run in lockstep, each with its own
seeded clip order. Every ``update_frequency`` environment steps the recorded
segment of each copy gets advantages (discounted sums of TD residuals,
bootstrapped from the value of the next clip when the episode continues) and
one Adam step is taken on

    -mean(logp * A) - entropy_weight * mean(H) + value_weight * mean((V - target)^2)
"""
from __future__ import annotations

import csv
import json
import logging
from collections import Counter, deque
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..env import REWARD_MODES, PostProcEnv, evaluate_params
from ..errors import ContractError, ValidationError
from ..events import CollarConfig
from ..ndmath import AdamState, Tape, adam_step, backward, mean, mul, square, stack, sub
from ..postproc import ParamGrid, PostProcParams
from .policy import PolicyParams, actions_to_params, init_policy, policy_forward, sample_actions

log = logging.getLogger(__name__)

LOG_COLUMNS = ["episode", "step", "mean_reward", "macro_f1", "loss", "entropy"]


class TrainingError(RuntimeError):
    pass


@dataclass
class TrajectoryStep:
    t: int
    threshold_indices: np.ndarray
    window_indices: np.ndarray
    log_prob: float
    value: float
    reward: float
    done: bool


@dataclass
class TrainerConfig:
    batch_size: int = 4
    memory_size: int = 10000
    learning_rate: float = 0.001
    update_frequency: int = 4
    gamma: float = 0.99
    entropy_weight: float = 0.001
    value_weight: float = 0.5
    episodes: int = 20
    seed: int = 0
    reward_mode: str = "per_segment"
    shuffle: bool = True
    use_median: bool = True
    hidden_size: int = 32

    def validate(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValidationError("gamma must lie in (0, 1]")
        if self.entropy_weight < 0 or self.value_weight < 0:
            raise ValidationError("loss weights must be non-negative")
        if self.batch_size < 1 or self.update_frequency < 1 or self.memory_size < 1:
            raise ValidationError("batch_size, update_frequency and memory_size must be >= 1")
        if self.episodes < 0:
            raise ValidationError("episodes must be >= 0")
        if not self.learning_rate > 0:
            raise ValidationError("learning_rate must be positive")
        if self.reward_mode not in REWARD_MODES:
            raise ValidationError(f"reward_mode must be one of {REWARD_MODES}")


def compute_advantages(trajectory, gamma, bootstrap_value=None):
    """Advantages and value targets for a run of consecutive steps.

    ``A_t = sum_k gamma^k delta_{t+k}`` with
    ``delta_t = r_t + gamma V(s_{t+1}) - V(s_t)``; values after a done step
    are 0. A trajectory whose last step is not done needs ``bootstrap_value``
    (the value estimate of the state that follows it).
    """
    if not trajectory:
        return np.zeros(0), np.zeros(0)
    if not trajectory[-1].done and bootstrap_value is None:
        raise ContractError("trajectory does not terminate and no bootstrap value was given")
    n = len(trajectory)
    adv = np.empty(n)
    next_value = 0.0 if trajectory[-1].done else float(bootstrap_value)
    running = 0.0
    for t in range(n - 1, -1, -1):
        step = trajectory[t]
        if step.done:
            next_value = 0.0
            running = 0.0
        delta = step.reward + gamma * next_value - step.value
        running = delta + gamma * running
        adv[t] = running
        next_value = step.value
    values = np.array([s.value for s in trajectory])
    return adv, adv + values


def pg_objective(logps, advantages, entropies, beta, value_preds, value_targets, value_weight):
    """Scalar loss whose minimization ascends the entropy-regularized PG objective."""
    n = len(logps)
    if not (len(advantages) == len(entropies) == len(value_preds) == len(value_targets) == n):
        raise ContractError("pg_objective inputs must have equal lengths")
    if n == 0:
        raise ContractError("pg_objective needs at least one step")
    adv = np.asarray(advantages, dtype=np.float64)
    targets = np.asarray(value_targets, dtype=np.float64)
    policy_term = mul(mean(mul(stack(logps), adv)), -1.0)
    entropy_term = mul(mean(stack(entropies)), -beta)
    value_term = mul(mean(square(sub(stack(value_preds), targets))), value_weight)
    return policy_term + entropy_term + value_term


@dataclass
class TrainingLog:
    rows: list = field(default_factory=list)

    def append(self, **row):
        self.rows.append({k: row[k] for k in LOG_COLUMNS})

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(LOG_COLUMNS)
            for r in self.rows:
                writer.writerow([r["episode"], r["step"]] + [repr(float(r[k])) for k in LOG_COLUMNS[2:]])

    @staticmethod
    def read_csv(path):
        out = TrainingLog()
        with open(path, newline="") as fh:
            for r in csv.DictReader(fh):
                out.rows.append({"episode": int(r["episode"]), "step": int(r["step"]),
                                 **{k: float(r[k]) for k in LOG_COLUMNS[2:]}})
        return out


def _rng_state(rng):
    return json.dumps(rng.bit_generator.state)


def _restore_rng(text):
    rng = np.random.default_rng()
    rng.bit_generator.state = json.loads(text)
    return rng


def save_checkpoint(path, theta, adam, cfg, grid, episode, sampler, env_rngs, training_log):
    arrays = theta.to_arrays()
    arrays.update(adam.to_arrays())
    meta = {
        "config": asdict(cfg),
        "grid": grid.to_dict(),
        "episode": episode,
        "sampler": _rng_state(sampler),
        "env_rngs": [_rng_state(r) for r in env_rngs],
        "log": training_log.rows,
    }
    arrays["meta"] = np.array(json.dumps(meta))
    tmp = Path(str(path) + ".tmp.npz")
    np.savez(tmp, **arrays)
    tmp.replace(path)


def load_checkpoint(path):
    with np.load(path, allow_pickle=False) as data:
        arrays = {k: data[k] for k in data.files}
    meta = json.loads(str(arrays.pop("meta")))
    theta = PolicyParams.from_arrays(arrays)
    adam = AdamState.from_arrays(arrays)
    return theta, adam, meta


def train(dataset, grid: ParamGrid, cfg: TrainerConfig, collars=CollarConfig(),
          checkpoint=None, resume=False, progress=None):
    """Train a policy; returns (theta, TrainingLog).

    With ``checkpoint`` set, state is saved after every episode; ``resume``
    continues from an existing checkpoint file.
    """
    cfg.validate()
    if len(dataset) == 0:
        raise ContractError("cannot train on an empty dataset")
    if grid.num_classes != dataset.num_classes:
        raise ContractError(f"grid has {grid.num_classes} classes, dataset {dataset.num_classes}")

    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.batch_size + 2)
    init_rng = np.random.default_rng(seeds[0])
    sampler = np.random.default_rng(seeds[1])
    env_rngs = [np.random.default_rng(s) for s in seeds[2:]]
    theta = init_policy(init_rng, dataset.num_classes, grid, cfg.hidden_size)
    adam = AdamState()
    training_log = TrainingLog()
    start_episode = 0
    if resume and checkpoint is not None and Path(checkpoint).exists():
        theta, adam, meta = load_checkpoint(checkpoint)
        start_episode = meta["episode"] + 1
        sampler = _restore_rng(meta["sampler"])
        env_rngs = [_restore_rng(s) for s in meta["env_rngs"]]
        training_log.rows = meta["log"]

    leaves = theta.leaves()
    arrays = {k: t.data for k, t in leaves.items()}
    envs = [PostProcEnv(dataset, cfg.reward_mode, collars, cfg.use_median) for _ in range(cfg.batch_size)]
    memory = deque(maxlen=cfg.memory_size)
    total_steps = training_log.rows[-1]["step"] if training_log.rows else 0

    for episode in range(start_episode, cfg.episodes):
        states = [
            env.reset("shuffled" if cfg.shuffle else "fixed", rng) for env, rng in zip(envs, env_rngs)
        ]
        horizon = len(dataset)
        rewards, entropies, losses = [], [], []
        t = 0
        while t < horizon:
            span = min(cfg.update_frequency, horizon - t)
            segments = [[] for _ in envs]
            records = [[] for _ in envs]
            with Tape() as tape:
                for _ in range(span):
                    for k, env in enumerate(envs):
                        out = policy_forward(states[k].clip, theta)
                        sample = sample_actions(out, sampler)
                        outcome = env.step(states[k], actions_to_params(sample, grid))
                        step = TrajectoryStep(
                            states[k].t, sample.threshold_indices, sample.window_indices,
                            sample.log_prob_value, float(out.value.data), outcome.reward, outcome.done,
                        )
                        segments[k].append(step)
                        records[k].append((sample.log_prob, sample.entropy, out.value))
                        memory.append(step)
                        rewards.append(outcome.reward)
                        entropies.append(float(sample.entropy.data))
                        states[k] = outcome.next_state
                    t += 1
                total_steps += span * len(envs)
                logps, advs, ents, vals, targets = [], [], [], [], []
                for k in range(len(envs)):
                    boot = None
                    if not segments[k][-1].done:
                        boot = float(policy_forward(states[k].clip, theta).value.data)
                    a, ret = compute_advantages(segments[k], cfg.gamma, boot)
                    for (lp, ent, val), ak, rk in zip(records[k], a, ret):
                        logps.append(lp)
                        ents.append(ent)
                        vals.append(val)
                        advs.append(ak)
                        targets.append(rk)
                loss = pg_objective(logps, advs, ents, cfg.entropy_weight, vals, targets, cfg.value_weight)
            loss_value = float(loss.data)
            if not np.isfinite(loss_value):
                raise TrainingError(
                    f"non-finite loss {loss_value} at episode {episode}, step {total_steps}; "
                    f"advantages range [{min(advs)}, {max(advs)}]"
                )
            grads = backward(loss, tape, leaves)
            adam_step(arrays, grads, adam, cfg.learning_rate)
            losses.append(loss_value)

        macro = float(np.mean([env.episode_score().macro_f1 for env in envs]))
        training_log.append(
            episode=episode,
            step=total_steps,
            mean_reward=float(np.mean(rewards)),
            macro_f1=macro,
            loss=float(np.mean(losses)),
            entropy=float(np.mean(entropies)),
        )
        log.info("episode %d macro_f1=%.4f mean_reward=%.4f loss=%.5f entropy=%.3f",
                 episode, macro, np.mean(rewards), np.mean(losses), np.mean(entropies))
        if progress is not None:
            progress(training_log.rows[-1])
        if checkpoint is not None:
            save_checkpoint(checkpoint, theta, adam, cfg, grid, episode, sampler, env_rngs, training_log)
    return theta, training_log


@dataclass
class ExtractedParams:
    per_clip: list  # PostProcParams per clip, dataset order
    modal: PostProcParams
    macro_f1: float  # per-clip greedy params
    modal_macro_f1: float  # modal params applied to every clip
    report: object


def _mode(values):
    counts = Counter(int(v) for v in values)
    top = max(counts.values())
    return min(v for v, n in counts.items() if n == top)


def extract_best_params(theta: PolicyParams, dataset, grid: ParamGrid, collars=CollarConfig(),
                        use_median=True) -> ExtractedParams:
    """Greedy (argmax, lowest index on ties) params per clip plus a summary."""
    per_clip = []
    t_idx, w_idx = [], []
    for clip in dataset.clips:
        sample = sample_actions(policy_forward(clip, theta), greedy=True)
        per_clip.append(actions_to_params(sample, grid))
        t_idx.append(sample.threshold_indices)
        w_idx.append(sample.window_indices)
    report = evaluate_params(dataset, per_clip, collars, use_median)
    t_idx = np.array(t_idx)
    w_idx = np.array(w_idx)
    modal_t = np.array([_mode(t_idx[:, h]) for h in range(t_idx.shape[1])])
    modal_w = np.array([_mode(w_idx[:, h]) for h in range(w_idx.shape[1])])
    if grid.class_dependent:
        modal = grid.params(modal_t, modal_w)
    else:
        modal = grid.params(int(modal_t[0]), int(modal_w[0]))
    modal_report = evaluate_params(dataset, modal, collars, use_median)
    return ExtractedParams(per_clip, modal, report.macro_f1, modal_report.macro_f1, report)
