"""Pure numpy versions of the hot kernels.

Mirrors the API of the compiled ``_kernels`` extension exactly; used when the
extension is not built or when ``RLPOST_PURE_PYTHON=1`` is set.
"""
import numpy as np


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def gru_recurrence(xproj, u, h0):
    """Run the GRU recurrence over precomputed input projections.

    ``xproj`` is (T, 3H) holding ``x_t @ W + b`` with gate blocks ordered
    update, reset, candidate. ``u`` is (H, 3H) in the same block order.
    Returns hidden states and the gate activations needed by the backward pass.
    """
    T = xproj.shape[0]
    H = h0.shape[0]
    hs = np.empty((T, H))
    zs = np.empty((T, H))
    rs = np.empty((T, H))
    cs = np.empty((T, H))
    u_zr = u[:, : 2 * H]
    u_c = u[:, 2 * H :]
    h = h0
    for t in range(T):
        xp = xproj[t]
        zr = _sigmoid(xp[: 2 * H] + h @ u_zr)
        z = zr[:H]
        r = zr[H:]
        c = np.tanh(xp[2 * H :] + (r * h) @ u_c)
        h = (1.0 - z) * c + z * h
        hs[t] = h
        zs[t] = z
        rs[t] = r
        cs[t] = c
    return hs, zs, rs, cs


def gru_recurrence_backward(dhs, u, h0, hs, zs, rs, cs):
    """Backpropagate through :func:`gru_recurrence`.

    ``dhs`` is the loss gradient w.r.t. every hidden state. Returns gradients
    w.r.t. the input projections (T, 3H), the recurrent weights (H, 3H) and h0.
    """
    T, H = hs.shape
    dxproj = np.empty((T, 3 * H))
    du = np.zeros_like(u)
    u_z = u[:, :H]
    u_r = u[:, H : 2 * H]
    u_c = u[:, 2 * H :]
    dh_next = np.zeros(H)
    for t in range(T - 1, -1, -1):
        h_prev = hs[t - 1] if t > 0 else h0
        z = zs[t]
        r = rs[t]
        c = cs[t]
        dh = dhs[t] + dh_next
        dc = dh * (1.0 - z) * (1.0 - c * c)
        dz = dh * (h_prev - c) * z * (1.0 - z)
        a = r * h_prev
        da = u_c @ dc
        dr = da * h_prev * r * (1.0 - r)
        du[:, :H] += np.outer(h_prev, dz)
        du[:, H : 2 * H] += np.outer(h_prev, dr)
        du[:, 2 * H :] += np.outer(a, dc)
        dh_next = dh * z + da * r + u_z @ dz + u_r @ dr
        dxproj[t, :H] = dz
        dxproj[t, H : 2 * H] = dr
        dxproj[t, 2 * H :] = dc
    return dxproj, du, dh_next


def median_filter_binary(column, window):
    """Median of a centered odd window over a 0/1 sequence, replicate padded."""
    col = np.asarray(column, dtype=np.int64)
    half = window // 2
    if col.shape[0] == 0:
        return np.zeros(0, dtype=np.uint8)
    padded = np.concatenate((np.full(half, col[0]), col, np.full(half, col[-1])))
    csum = np.concatenate(([0], np.cumsum(padded)))
    counts = csum[window:] - csum[:-window]
    return (counts > half).astype(np.uint8)


def decode_runs(column):
    """Start (inclusive) and end (exclusive) frame indices of runs of ones."""
    col = np.asarray(column, dtype=np.int8)
    edges = np.diff(np.concatenate(([0], col, [0])))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    return starts.astype(np.int64), ends.astype(np.int64)
