"""Forward and backward passes for the supported layer kinds.

All functions work on a leading batch axis. Sequences are (batch, time,
channels); dense layers take (batch, features).
"""

from __future__ import annotations

import numpy as np


def sigmoid(z: np.ndarray) -> np.ndarray:
    # tanh form: never overflows and needs no sign masking.
    return 0.5 * np.tanh(0.5 * z) + 0.5


# -- dense ------------------------------------------------------------------------


def dense_forward(x, W, b, activation):
    z = x @ W + b
    out = np.maximum(z, 0.0) if activation == "relu" else z
    return out, (x, z, activation)


def dense_backward(dout, cache, W):
    x, z, activation = cache
    dz = dout * (z > 0) if activation == "relu" else dout
    return dz @ W.T, {"W": x.T @ dz, "b": dz.sum(axis=0)}


# -- conv1d over time -------------------------------------------------------------


def _windows(T: int, width: int, stride: int) -> np.ndarray:
    starts = np.arange(0, T - width + 1, stride)
    return starts[:, None] + np.arange(width)[None, :]


def conv1d_forward(x, W, b, stride, activation):
    """x (B, T, C), W (k, C, F) -> (B, T', F) with T' = (T - k) // stride + 1."""
    k = W.shape[0]
    idx = _windows(x.shape[1], k, stride)
    patches = x[:, idx, :]  # (B, T', k, C)
    z = np.einsum("btkc,kcf->btf", patches, W) + b
    out = np.maximum(z, 0.0) if activation == "relu" else z
    return out, (x.shape, idx, patches, z, activation)


def conv1d_backward(dout, cache, W):
    shape, idx, patches, z, activation = cache
    dz = dout * (z > 0) if activation == "relu" else dout
    dW = np.einsum("btkc,btf->kcf", patches, dz)
    db = dz.sum(axis=(0, 1))
    dpatches = np.einsum("btf,kcf->btkc", dz, W)
    dx = np.zeros(shape)
    np.add.at(dx, (slice(None), idx), dpatches)
    return dx, {"W": dW, "b": db}


# -- max pooling over time --------------------------------------------------------


def maxpool1d_forward(x, width, stride):
    idx = _windows(x.shape[1], width, stride)
    win = x[:, idx, :]  # (B, T', w, F)
    arg = win.argmax(axis=2)  # first maximum wins ties
    out = np.take_along_axis(win, arg[:, :, None, :], axis=2)[:, :, 0, :]
    return out, (x.shape, idx, arg)


def maxpool1d_backward(dout, cache):
    shape, idx, arg = cache
    B, Tp, F = dout.shape
    src_t = idx[np.arange(Tp)[None, :, None], arg]  # (B, T', F) source time index
    dx = np.zeros(shape)
    bi = np.broadcast_to(np.arange(B)[:, None, None], src_t.shape)
    fi = np.broadcast_to(np.arange(F)[None, None, :], src_t.shape)
    np.add.at(dx, (bi, src_t, fi), dout)
    return dx


# -- LSTM ---------------------------------------------------------------------------
# Gate blocks along the last axis of Wx/Wh/b are ordered (input, forget, output, cell).


def lstm_forward(x, Wx, Wh, b, return_sequences):
    B, T, _ = x.shape
    u = Wh.shape[0]
    xp = x @ Wx + b  # (B, T, 4u)
    h = np.zeros((B, u))
    c = np.zeros((B, u))
    hs = np.empty((B, T, u))
    cs = np.empty((B, T, u))
    sg = np.empty((B, T, 3 * u))
    gg = np.empty((B, T, u))
    tcs = np.empty((B, T, u))
    for t in range(T):
        z = xp[:, t] + h @ Wh
        s = sigmoid(z[:, : 3 * u])
        g = np.tanh(z[:, 3 * u :])
        c = s[:, u : 2 * u] * c + s[:, :u] * g
        tc = np.tanh(c)
        h = s[:, 2 * u :] * tc
        sg[:, t], gg[:, t], cs[:, t], tcs[:, t], hs[:, t] = s, g, c, tc, h
    out = hs if return_sequences else h
    return out, (x, hs, cs, sg, gg, tcs, return_sequences)


def lstm_backward(dout, cache, Wx, Wh):
    x, hs, cs, sg, gg, tcs, return_sequences = cache
    B, T, u = hs.shape
    if return_sequences:
        dhs = dout
    else:
        dhs = np.zeros((B, T, u))
        dhs[:, -1] = dout
    dZ = np.empty((B, T, 4 * u))
    dh_next = np.zeros((B, u))
    dc_next = np.zeros((B, u))
    WhT = Wh.T
    for t in range(T - 1, -1, -1):
        s, g, tc = sg[:, t], gg[:, t], tcs[:, t]
        i, f, o = s[:, :u], s[:, u : 2 * u], s[:, 2 * u :]
        c_prev = cs[:, t - 1] if t > 0 else 0.0
        dh = dhs[:, t] + dh_next
        dc = dh * o * (1.0 - tc * tc) + dc_next
        ds = np.concatenate([dc * g, dc * c_prev, dh * tc], axis=1) * s * (1.0 - s)
        dZ[:, t, : 3 * u] = ds
        dZ[:, t, 3 * u :] = dc * i * (1.0 - g * g)
        dc_next = dc * f
        dh_next = dZ[:, t] @ WhT
    h_prev = np.concatenate([np.zeros((B, 1, u)), hs[:, :-1]], axis=1)
    flat_dZ = dZ.reshape(B * T, 4 * u)
    grads = {
        "Wx": x.reshape(B * T, -1).T @ flat_dZ,
        "Wh": h_prev.reshape(B * T, u).T @ flat_dZ,
        "b": flat_dZ.sum(axis=0),
    }
    return dZ @ Wx.T, grads
