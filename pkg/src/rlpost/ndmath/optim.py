"""Adam with bias correction."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionError


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def to_arrays(self, prefix="adam"):
        out = {f"{prefix}/step": np.array(self.step),
               f"{prefix}/betas": np.array([self.beta1, self.beta2, self.eps])}
        for k in self.m:
            out[f"{prefix}/m/{k}"] = self.m[k]
            out[f"{prefix}/v/{k}"] = self.v[k]
        return out

    @classmethod
    def from_arrays(cls, arrays, prefix="adam"):
        b1, b2, eps = (float(x) for x in arrays[f"{prefix}/betas"])
        state = cls(beta1=b1, beta2=b2, eps=eps, step=int(arrays[f"{prefix}/step"]))
        mp, vp = f"{prefix}/m/", f"{prefix}/v/"
        for key in arrays:
            if key.startswith(mp):
                state.m[key[len(mp):]] = np.array(arrays[key], dtype=np.float64)
            elif key.startswith(vp):
                state.v[key[len(vp):]] = np.array(arrays[key], dtype=np.float64)
        return state


def adam_step(params, grads, state: AdamState, lr=1e-3):
    """Update ``params`` (name -> ndarray) in place from ``grads``; returns params."""
    for k, p in params.items():
        if grads[k].shape != p.shape:
            raise DimensionError(f"gradient for {k!r} has shape {grads[k].shape}, param {p.shape}")
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for k, p in params.items():
        g = grads[k]
        if k not in state.m:
            state.m[k] = np.zeros_like(p)
            state.v[k] = np.zeros_like(p)
        m = state.m[k]
        v = state.v[k]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params
