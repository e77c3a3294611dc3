"""Dense float64 tensors with a tape for reverse-mode differentiation.

Only the handful of primitives the policy network needs are provided. Ops
record themselves on the innermost active :class:`Tape` when at least one
input is tracked (a ``requires_grad`` leaf or an already recorded node).
Outside a tape the same functions are plain forward evaluations.
"""
from __future__ import annotations

import numpy as np

from ..errors import ContractError, DimensionError
from .. import kernels

_TAPES: list["Tape"] = []


class Tensor:
    __slots__ = ("data", "requires_grad", "parents", "backward_fn", "recorded", "name")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.parents = ()
        self.backward_fn = None
        self.recorded = False
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _not_scalar(self)

    @property
    def tracked(self):
        return self.requires_grad or self.recorded

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, data={self.data!r})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return take(self, index)


def _not_scalar(t):
    raise ContractError(f"tensor of shape {t.shape} is not a scalar")


class Tape:
    """Ordered record of primitive ops, usable as a context manager."""

    def __init__(self):
        self.nodes: list[Tensor] = []

    def __enter__(self):
        _TAPES.append(self)
        return self

    def __exit__(self, *exc):
        _TAPES.remove(self)
        return False

    def __len__(self):
        return len(self.nodes)

    def __contains__(self, t):
        return any(n is t for n in self.nodes)


def active_tape():
    return _TAPES[-1] if _TAPES else None


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward_fn):
    out = Tensor.__new__(Tensor)
    out.data = data
    out.requires_grad = False
    out.parents = ()
    out.backward_fn = None
    out.recorded = False
    out.name = None
    tape = active_tape()
    if tape is not None and any(p.tracked for p in parents):
        out.parents = parents
        out.backward_fn = backward_fn
        out.recorded = True
        tape.nodes.append(out)
    return out


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise DimensionError(f"cannot broadcast {a.shape} with {b.shape}") from exc


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b)
    return _make(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b)
    return _make(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)),
    )


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b)
    return _make(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def matmul(a, b):
    """Vector-matrix or matrix-matrix product."""
    a, b = as_tensor(a), as_tensor(b)
    if b.data.ndim != 2 or a.data.ndim not in (1, 2) or a.shape[-1] != b.shape[0]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}")

    def backward(g):
        if a.data.ndim == 1:
            return g @ b.data.T, np.outer(a.data, g)
        return g @ b.data.T, a.data.T @ g

    return _make(a.data @ b.data, (a, b), backward)


def square(a):
    a = as_tensor(a)
    return _make(a.data * a.data, (a,), lambda g: (2.0 * a.data * g,))


def exp(a):
    a = as_tensor(a)
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,))


def sigmoid(a):
    a = as_tensor(a)
    out = 1.0 / (1.0 + np.exp(-a.data))
    return _make(out, (a,), lambda g: (g * out * (1.0 - out),))


def tanh(a):
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _make(out, (a,), lambda g: (g * (1.0 - out * out),))


def sum(a):  # noqa: A001 - mirrors numpy naming
    a = as_tensor(a)
    return _make(np.array(a.data.sum()), (a,), lambda g: (np.full(a.shape, float(g)),))


def mean(a):
    a = as_tensor(a)
    n = a.data.size
    if n == 0:
        raise DimensionError("mean of an empty tensor")
    return _make(np.array(a.data.sum() / n), (a,), lambda g: (np.full(a.shape, float(g) / n),))


def reshape(a, shape):
    a = as_tensor(a)
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def take(a, index):
    """Basic or integer-array indexing; gradient scatters back with add.at."""
    a = as_tensor(a)

    def backward(g):
        out = np.zeros(a.shape)
        np.add.at(out, index, g)
        return (out,)

    return _make(np.array(a.data[index]), (a,), backward)


def stack(tensors):
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise DimensionError("stack of no tensors")
    data = np.stack([t.data for t in tensors])
    return _make(data, tuple(tensors), lambda g: tuple(g[i] for i in range(len(tensors))))


def log_softmax(v):
    """Log-softmax along the last axis, stabilized by max-subtraction."""
    v = as_tensor(v)
    if v.data.size == 0 or v.data.shape[-1] == 0:
        raise DimensionError("log_softmax of an empty tensor")
    shifted = v.data - v.data.max(axis=-1, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    probs = np.exp(out)
    return _make(out, (v,), lambda g: (g - probs * g.sum(axis=-1, keepdims=True),))


def gru_sequence(x, h0, w, u, b):
    """Run a GRU layer over a (T, in) sequence, returning all (T, H) states.

    Fused primitive: the recurrence and its backward pass run in the kernel
    backend. Gate blocks in ``w`` (in, 3H), ``u`` (H, 3H) and ``b`` (3H,) are
    ordered update, reset, candidate.
    """
    x, h0, w, u, b = (as_tensor(t) for t in (x, h0, w, u, b))
    H = u.shape[0]
    if x.data.ndim != 2 or w.shape != (x.shape[1], 3 * H) or u.shape != (H, 3 * H):
        raise DimensionError(
            f"gru shapes do not match: x{x.shape} w{w.shape} u{u.shape}"
        )
    if b.shape != (3 * H,) or h0.shape != (H,):
        raise DimensionError(f"gru bias {b.shape} / h0 {h0.shape} do not match H={H}")
    xproj = np.ascontiguousarray(x.data @ w.data + b.data)
    ud = np.ascontiguousarray(u.data)
    h0d = np.ascontiguousarray(h0.data)
    hs, zs, rs, cs = kernels.gru_recurrence(xproj, ud, h0d)
    if not np.isfinite(hs).all():
        raise FloatingPointError("non-finite GRU state")

    def backward(g):
        dxp, du, dh0 = kernels.gru_recurrence_backward(
            np.ascontiguousarray(g, dtype=np.float64), ud, h0d, hs, zs, rs, cs
        )
        return dxp @ w.data.T, dh0, x.data.T @ dxp, du, dxp.sum(axis=0)

    return _make(hs, (x, h0, w, u, b), backward)


def backward(loss, tape, leaves=None):
    """Reverse-mode sweep over ``tape`` starting from scalar ``loss``.

    With ``leaves`` as a name -> Tensor mapping, returns name -> gradient
    (zeros for leaves the loss does not touch); with a list, a list in the same
    order. Without ``leaves``, returns ``id(tensor)`` -> gradient for every
    tracked leaf reached.
    """
    if loss.data.size != 1:
        raise ContractError(f"loss must be scalar, got shape {loss.shape}")
    if not loss.recorded or loss not in tape:
        raise ContractError("loss is not recorded on this tape")
    grads = {id(loss): np.ones(loss.shape)}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        for parent, pg in zip(node.parents, node.backward_fn(g)):
            if not parent.tracked:
                continue
            if id(parent) in grads:
                grads[id(parent)] = grads[id(parent)] + pg
            else:
                grads[id(parent)] = np.asarray(pg, dtype=np.float64)
    if isinstance(leaves, dict):
        return {k: grads.get(id(t), np.zeros(t.shape)) for k, t in leaves.items()}
    if leaves is not None:
        return [grads.get(id(t), np.zeros(t.shape)) for t in leaves]
    return grads
