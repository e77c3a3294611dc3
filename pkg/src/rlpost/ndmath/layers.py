"""GRU and linear layers built on the tape primitives.

GRU gates (canonical form, biases folded into the input projection)::

    z  = sigmoid(x W_z + h U_z + b_z)        update gate
    r  = sigmoid(x W_r + h U_r + b_r)        reset gate
    c  = tanh(x W_c + (r * h) U_c + b_c)     candidate
    h' = (1 - z) * c + z * h
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError
from .tensor import Tensor, add, as_tensor, gru_sequence, matmul, reshape, take


@dataclass
class LinearParams:
    weight: Tensor  # (in, out)
    bias: Tensor  # (out,)

    @property
    def in_features(self):
        return self.weight.shape[0]

    @property
    def out_features(self):
        return self.weight.shape[1]

    def leaves(self, prefix):
        return {f"{prefix}.weight": self.weight, f"{prefix}.bias": self.bias}


@dataclass
class GruLayerParams:
    """One GRU layer. Gate blocks are stacked [update | reset | candidate]."""

    w: Tensor  # (in, 3H)
    u: Tensor  # (H, 3H)
    b: Tensor  # (3H,)

    @property
    def hidden_size(self):
        return self.u.shape[0]

    @property
    def input_size(self):
        return self.w.shape[0]

    def gate(self, name):
        """(W, U, b) numpy views for gate ``name`` in {'z', 'r', 'c'}."""
        H = self.hidden_size
        k = "zrc".index(name)
        sl = slice(k * H, (k + 1) * H)
        return self.w.data[:, sl], self.u.data[:, sl], self.b.data[sl]

    def leaves(self, prefix):
        return {f"{prefix}.w": self.w, f"{prefix}.u": self.u, f"{prefix}.b": self.b}


def init_linear(rng, in_features, out_features):
    bound = 1.0 / np.sqrt(in_features)
    return LinearParams(
        Tensor(rng.uniform(-bound, bound, (in_features, out_features)), requires_grad=True),
        Tensor(np.zeros(out_features), requires_grad=True),
    )


def init_gru(rng, input_size, hidden_size=32):
    H = hidden_size
    w = np.concatenate(
        [rng.uniform(-1 / np.sqrt(input_size), 1 / np.sqrt(input_size), (input_size, H)) for _ in range(3)],
        axis=1,
    )
    u = np.concatenate(
        [rng.uniform(-1 / np.sqrt(H), 1 / np.sqrt(H), (H, H)) for _ in range(3)], axis=1
    )
    return GruLayerParams(
        Tensor(w, requires_grad=True),
        Tensor(u, requires_grad=True),
        Tensor(np.zeros(3 * H), requires_grad=True),
    )


def linear_forward(x, p: LinearParams):
    x = as_tensor(x)
    if x.shape[-1] != p.in_features:
        raise DimensionError(f"linear expects {p.in_features} inputs, got shape {x.shape}")
    if p.bias.shape != (p.out_features,):
        raise DimensionError(f"bias shape {p.bias.shape} != ({p.out_features},)")
    return add(matmul(x, p.weight), p.bias)


def gru_layer_forward(xs, p: GruLayerParams, h0=None):
    """All hidden states (T, H) of one layer over a (T, in) sequence."""
    xs = as_tensor(xs)
    if h0 is None:
        h0 = Tensor(np.zeros(p.hidden_size))
    if xs.data.ndim != 2 or xs.shape[1] != p.input_size:
        raise DimensionError(f"GRU expects (T, {p.input_size}) input, got {xs.shape}")
    return gru_sequence(xs, h0, p.w, p.u, p.b)


def gru_cell_forward(x, h_prev, p: GruLayerParams):
    """Single GRU step: new hidden state from input ``x`` and ``h_prev``."""
    x, h_prev = as_tensor(x), as_tensor(h_prev)
    if x.shape != (p.input_size,) or h_prev.shape != (p.hidden_size,):
        raise DimensionError(
            f"GRU cell expects x({p.input_size},), h({p.hidden_size},); got {x.shape}, {h_prev.shape}"
        )
    hs = gru_sequence(reshape(x, (1, p.input_size)), h_prev, p.w, p.u, p.b)
    return take(hs, 0)
