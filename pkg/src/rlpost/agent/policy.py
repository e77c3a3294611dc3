"""Recurrent policy/value network and categorical action heads.

Two stacked GRU layers read the clip's (T, C) posteriorgram from zero initial
states. The last hidden state of the top layer feeds three linear heads:
threshold logits (heads x n_thresholds), window logits (heads x n_windows)
and a scalar state value. ``heads`` is C for class-dependent control and 1
for class-independent control.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError, DimensionError
from ..ndmath import (
    GruLayerParams,
    LinearParams,
    Tensor,
    exp,
    gru_layer_forward,
    init_gru,
    init_linear,
    linear_forward,
    log_softmax,
    mul,
    reshape,
    sum as tsum,
    take,
)
from ..postproc import ParamGrid, PostProcParams

HIDDEN_SIZE = 32


@dataclass
class PolicyParams:
    gru1: GruLayerParams
    gru2: GruLayerParams
    threshold_head: LinearParams
    window_head: LinearParams
    value_head: LinearParams
    heads: int
    n_thresholds: int
    n_windows: int

    def leaves(self):
        out = {}
        out.update(self.gru1.leaves("gru1"))
        out.update(self.gru2.leaves("gru2"))
        out.update(self.threshold_head.leaves("threshold_head"))
        out.update(self.window_head.leaves("window_head"))
        out.update(self.value_head.leaves("value_head"))
        return out

    def arrays(self):
        return {k: t.data for k, t in self.leaves().items()}

    @property
    def num_inputs(self):
        return self.gru1.input_size

    def to_arrays(self):
        out = {f"theta/{k}": v.copy() for k, v in self.arrays().items()}
        out["theta/meta"] = np.array([self.heads, self.n_thresholds, self.n_windows, self.num_inputs])
        return out

    @classmethod
    def from_arrays(cls, arrays):
        heads, n_thr, n_win, _ = (int(x) for x in arrays["theta/meta"])

        def t(name):
            return Tensor(np.array(arrays[f"theta/{name}"], dtype=np.float64), requires_grad=True)

        return cls(
            GruLayerParams(t("gru1.w"), t("gru1.u"), t("gru1.b")),
            GruLayerParams(t("gru2.w"), t("gru2.u"), t("gru2.b")),
            LinearParams(t("threshold_head.weight"), t("threshold_head.bias")),
            LinearParams(t("window_head.weight"), t("window_head.bias")),
            LinearParams(t("value_head.weight"), t("value_head.bias")),
            heads, n_thr, n_win,
        )


def init_policy(rng, num_classes, grid: ParamGrid, hidden_size=HIDDEN_SIZE):
    heads = num_classes if grid.class_dependent else 1
    return PolicyParams(
        gru1=init_gru(rng, num_classes, hidden_size),
        gru2=init_gru(rng, hidden_size, hidden_size),
        threshold_head=init_linear(rng, hidden_size, heads * grid.n_thresholds),
        window_head=init_linear(rng, hidden_size, heads * grid.n_windows),
        value_head=init_linear(rng, hidden_size, 1),
        heads=heads,
        n_thresholds=grid.n_thresholds,
        n_windows=grid.n_windows,
    )


@dataclass
class PolicyOutput:
    threshold_logits: Tensor  # (heads, n_thresholds)
    window_logits: Tensor  # (heads, n_windows)
    value: Tensor  # scalar


def policy_forward(posteriors, theta: PolicyParams) -> PolicyOutput:
    """Heads' logits and the value estimate for one clip's posteriorgram."""
    x = np.asarray(getattr(posteriors, "posteriors", posteriors), dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise DimensionError(f"posteriorgram must be (T>=1, C), got {x.shape}")
    if x.shape[1] != theta.num_inputs:
        raise DimensionError(f"policy expects {theta.num_inputs} classes, clip has {x.shape[1]}")
    h1 = gru_layer_forward(Tensor(x), theta.gru1)
    h2 = gru_layer_forward(h1, theta.gru2)
    last = take(h2, -1)
    thr = reshape(linear_forward(last, theta.threshold_head), (theta.heads, theta.n_thresholds))
    win = reshape(linear_forward(last, theta.window_head), (theta.heads, theta.n_windows))
    value = reshape(linear_forward(last, theta.value_head), ())
    return PolicyOutput(thr, win, value)


@dataclass
class ActionSample:
    threshold_indices: np.ndarray  # (heads,)
    window_indices: np.ndarray  # (heads,)
    log_prob: Tensor  # scalar, sum over every chosen entry
    entropy: Tensor  # scalar, sum over the two heads of per-head mean entropy
    head_entropies: tuple = (0.0, 0.0)

    @property
    def log_prob_value(self):
        return float(self.log_prob.data)


def categorical_entropy(logp):
    """Mean over rows of -sum(p log p); ``logp`` is a log-softmax output."""
    rows = logp.shape[0]
    return mul(tsum(mul(exp(logp), logp)), -1.0 / rows)


def _sample_rows(logp, rng):
    cdf = np.cumsum(np.exp(logp), axis=1)
    u = rng.random(logp.shape[0]) * cdf[:, -1]
    idx = (cdf < u[:, None]).sum(axis=1)
    return np.minimum(idx, logp.shape[1] - 1)


def _greedy_rows(logits):
    return np.argmax(logits, axis=1)  # first maximum -> lowest index on ties


def sample_actions(out: PolicyOutput, rng=None, greedy=False) -> ActionSample:
    """Categorical choice per head row; greedy takes the argmax instead."""
    if not (np.isfinite(out.threshold_logits.data).all() and np.isfinite(out.window_logits.data).all()):
        raise FloatingPointError("non-finite logits")
    lp_thr = log_softmax(out.threshold_logits)
    lp_win = log_softmax(out.window_logits)
    if greedy:
        ti = _greedy_rows(out.threshold_logits.data)
        wi = _greedy_rows(out.window_logits.data)
    else:
        if rng is None:
            raise ContractError("sampling needs an rng")
        ti = _sample_rows(lp_thr.data, rng)
        wi = _sample_rows(lp_win.data, rng)
    rows = np.arange(ti.shape[0])
    log_prob = tsum(take(lp_thr, (rows, ti))) + tsum(take(lp_win, (rows, wi)))
    h_thr = categorical_entropy(lp_thr)
    h_win = categorical_entropy(lp_win)
    entropy = h_thr + h_win
    return ActionSample(ti, wi, log_prob, entropy, (float(h_thr.data), float(h_win.data)))


def actions_to_params(sample: ActionSample, grid: ParamGrid) -> PostProcParams:
    ti = np.asarray(sample.threshold_indices)
    wi = np.asarray(sample.window_indices)
    if ti.min() < 0 or ti.max() >= grid.n_thresholds or wi.min() < 0 or wi.max() >= grid.n_windows:
        raise ContractError("action index out of grid bounds")
    if ti.size != grid.heads or wi.size != grid.heads:
        raise ContractError(f"expected {grid.heads} indices per head, got {ti.size}/{wi.size}")
    if grid.class_dependent:
        return grid.params(ti, wi)
    return grid.params(int(ti[0]), int(wi[0]))
