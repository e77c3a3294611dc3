"""Central finite-difference validation of tape gradients."""
from __future__ import annotations

import numpy as np

from ..errors import ContractError
from .tensor import Tape, backward


def grad_check_report(forward_fn, params, eps=1e-5, max_elements=None, rng=None):
    """Per-parameter relative error between tape and numeric gradients.

    ``params`` maps name -> leaf Tensor; ``forward_fn()`` rebuilds the scalar
    loss from those leaves. Each tensor's error is
    ``|a - n| / max(|a|, |n|, 1e-8)`` with Euclidean norms over the checked
    elements. When ``max_elements`` is set, tensors larger than that are
    checked on a random subset of entries.
    """
    base = forward_fn().data.copy()
    if not np.array_equal(base, forward_fn().data):
        raise ContractError("forward_fn is not deterministic; gradient check unreliable")
    with Tape() as tape:
        loss = forward_fn()
    analytic = backward(loss, tape, params)

    rng = rng if rng is not None else np.random.default_rng(0)
    errors = {}
    for name, leaf in params.items():
        flat = leaf.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_elements is not None and flat.size > max_elements:
            idx = np.sort(rng.choice(flat.size, size=max_elements, replace=False))
        numeric = np.empty(idx.size)
        for j, i in enumerate(idx):
            orig = flat[i]
            flat[i] = orig + eps
            up = float(forward_fn().data)
            flat[i] = orig - eps
            down = float(forward_fn().data)
            flat[i] = orig
            numeric[j] = (up - down) / (2 * eps)
        a = analytic[name].reshape(-1)[idx]
        denom = max(np.linalg.norm(a), np.linalg.norm(numeric), 1e-8)
        errors[name] = float(np.linalg.norm(a - numeric) / denom)
    return errors


def grad_check(forward_fn, params, eps=1e-5, max_elements=None, rng=None):
    """Max relative error over parameters; see :func:`grad_check_report`."""
    errors = grad_check_report(forward_fn, params, eps, max_elements, rng)
    return max(errors.values()) if errors else 0.0
