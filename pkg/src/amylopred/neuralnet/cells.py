"""Recurrent cell math: LSTM and GRU steps, bidirectional layers, and the
corresponding backpropagation-through-time passes.

All functions accept either single vectors (F,) or batches (B, F); matmuls
are written as x @ W.T so both shapes work unchanged.
"""

from __future__ import annotations

import numpy as np


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _check_finite(name: str, *arrays: np.ndarray) -> None:
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"{name}: non-finite input")


# ---------------------------------------------------------------- LSTM cell

def _lstm_step(x, h_prev, c_prev, p):
    """One LSTM step; returns (h, c, cache) with the cache for backprop."""
    i = sigmoid(x @ p["W_i"].T + h_prev @ p["U_i"].T + p["b_i"])
    f = sigmoid(x @ p["W_f"].T + h_prev @ p["U_f"].T + p["b_f"])
    o = sigmoid(x @ p["W_o"].T + h_prev @ p["U_o"].T + p["b_o"])
    g = np.tanh(x @ p["W_g"].T + h_prev @ p["U_g"].T + p["b_g"])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    return h, c, (x, h_prev, c_prev, i, f, o, g, tc)


def lstm_cell_forward(x, h_prev, c_prev, p):
    """i=sig(Wx+Uh+b) etc., c = f*c_prev + i*g, h = o*tanh(c)."""
    x, h_prev, c_prev = np.asarray(x), np.asarray(h_prev), np.asarray(c_prev)
    _check_finite("lstm_cell_forward", x, h_prev, c_prev)
    if x.shape[-1] != p["W_i"].shape[1] or h_prev.shape[-1] != p["U_i"].shape[1]:
        raise ValueError(
            f"lstm_cell_forward: shape mismatch, x {x.shape} h {h_prev.shape} "
            f"vs W {p['W_i'].shape} U {p['U_i'].shape}"
        )
    h, c, _ = _lstm_step(x, h_prev, c_prev, p)
    return h, c


def _lstm_step_backward(dh, dc_next, cache, p, grads, prefix):
    """Backward through one LSTM step.

    dh is the total gradient on h (output + recurrent); dc_next the
    gradient arriving on c from the next step. Accumulates parameter
    gradients into `grads` under `prefix` and returns (dx, dh_prev, dc_prev).
    """
    x, h_prev, c_prev, i, f, o, g, tc = cache
    do = dh * tc
    dc = dc_next + dh * o * (1.0 - tc * tc)
    di = dc * g
    df = dc * c_prev
    dg = dc * i
    dc_prev = dc * f
    da = {
        "i": di * i * (1.0 - i),
        "f": df * f * (1.0 - f),
        "o": do * o * (1.0 - o),
        "g": dg * (1.0 - g * g),
    }
    x2 = np.atleast_2d(x)
    h2 = np.atleast_2d(h_prev)
    dx = np.zeros_like(x)
    dh_prev = np.zeros_like(h_prev)
    for gate, d in da.items():
        d2 = np.atleast_2d(d)
        grads[f"{prefix}.W_{gate}"] += d2.T @ x2
        grads[f"{prefix}.U_{gate}"] += d2.T @ h2
        grads[f"{prefix}.b_{gate}"] += d2.sum(axis=0)
        dx += d @ p[f"W_{gate}"]
        dh_prev += d @ p[f"U_{gate}"]
    return dx, dh_prev, dc_prev


# ----------------------------------------------------------------- GRU cell

def _gru_step(x, h_prev, p):
    z = sigmoid(x @ p["W_z"].T + h_prev @ p["U_z"].T + p["b_z"])
    r = sigmoid(x @ p["W_r"].T + h_prev @ p["U_r"].T + p["b_r"])
    rh = r * h_prev
    hbar = np.tanh(x @ p["W_h"].T + rh @ p["U_h"].T + p["b_h"])
    h = (1.0 - z) * h_prev + z * hbar
    return h, (x, h_prev, z, r, rh, hbar)


def gru_cell_forward(x, h_prev, p):
    """z,r = sig(...), hbar = tanh(W_h x + U_h (r*h_prev) + b_h),
    h = (1-z)*h_prev + z*hbar."""
    x, h_prev = np.asarray(x), np.asarray(h_prev)
    _check_finite("gru_cell_forward", x, h_prev)
    if x.shape[-1] != p["W_z"].shape[1] or h_prev.shape[-1] != p["U_z"].shape[1]:
        raise ValueError(
            f"gru_cell_forward: shape mismatch, x {x.shape} h {h_prev.shape} "
            f"vs W {p['W_z'].shape} U {p['U_z'].shape}"
        )
    h, _ = _gru_step(x, h_prev, p)
    return h


def _gru_step_backward(dh, cache, p, grads, prefix):
    x, h_prev, z, r, rh, hbar = cache
    dz = dh * (hbar - h_prev)
    dhbar = dh * z
    dh_prev = dh * (1.0 - z)
    da_h = dhbar * (1.0 - hbar * hbar)
    drh = da_h @ p["U_h"]
    dr = drh * h_prev
    dh_prev = dh_prev + drh * r
    da_z = dz * z * (1.0 - z)
    da_r = dr * r * (1.0 - r)
    x2 = np.atleast_2d(x)
    h2 = np.atleast_2d(h_prev)
    grads[f"{prefix}.W_z"] += np.atleast_2d(da_z).T @ x2
    grads[f"{prefix}.W_r"] += np.atleast_2d(da_r).T @ x2
    grads[f"{prefix}.W_h"] += np.atleast_2d(da_h).T @ x2
    grads[f"{prefix}.U_z"] += np.atleast_2d(da_z).T @ h2
    grads[f"{prefix}.U_r"] += np.atleast_2d(da_r).T @ h2
    grads[f"{prefix}.U_h"] += np.atleast_2d(da_h).T @ np.atleast_2d(rh)
    grads[f"{prefix}.b_z"] += np.atleast_2d(da_z).sum(axis=0)
    grads[f"{prefix}.b_r"] += np.atleast_2d(da_r).sum(axis=0)
    grads[f"{prefix}.b_h"] += np.atleast_2d(da_h).sum(axis=0)
    dx = da_z @ p["W_z"] + da_r @ p["W_r"] + da_h @ p["W_h"]
    dh_prev = dh_prev + da_z @ p["U_z"] + da_r @ p["U_r"]
    return dx, dh_prev


# --------------------------------------------------------- bidirectional

def _bi_forward_cached(xs, fwd_p, bwd_p, kind):
    """Run a bidirectional layer over xs (B, T, F) -> (ys (B, T, 2H), cache).

    Output t concatenates the forward state after consuming xs[..0..t]
    with the backward state after consuming xs[..T-1..t]; both directions
    start from zero states.
    """
    B, T, _ = xs.shape
    hidden = fwd_p["U_i" if kind == "lstm" else "U_z"].shape[0]
    dtype = xs.dtype
    hs_f = np.empty((B, T, hidden), dtype=dtype)
    hs_b = np.empty((B, T, hidden), dtype=dtype)
    caches_f, caches_b = [], []
    h = np.zeros((B, hidden), dtype=dtype)
    c = np.zeros((B, hidden), dtype=dtype)
    for t in range(T):
        if kind == "lstm":
            h, c, cache = _lstm_step(xs[:, t], h, c, fwd_p)
        else:
            h, cache = _gru_step(xs[:, t], h, fwd_p)
        hs_f[:, t] = h
        caches_f.append(cache)
    h = np.zeros((B, hidden), dtype=dtype)
    c = np.zeros((B, hidden), dtype=dtype)
    for t in range(T - 1, -1, -1):
        if kind == "lstm":
            h, c, cache = _lstm_step(xs[:, t], h, c, bwd_p)
        else:
            h, cache = _gru_step(xs[:, t], h, bwd_p)
        hs_b[:, t] = h
        caches_b.append(cache)  # caches_b[k] belongs to timestep T-1-k
    ys = np.concatenate([hs_f, hs_b], axis=2)
    return ys, (caches_f, caches_b, xs.shape, hidden)


def _bi_backward(dys, cache, fwd_p, bwd_p, kind, grads, prefix_fwd, prefix_bwd):
    """Backward through a bidirectional layer; returns dxs (B, T, F)."""
    caches_f, caches_b, xs_shape, hidden = cache
    B, T, _ = xs_shape
    dxs = np.zeros(xs_shape, dtype=dys.dtype)
    dh = np.zeros((B, hidden), dtype=dys.dtype)
    dc = np.zeros((B, hidden), dtype=dys.dtype)
    for t in range(T - 1, -1, -1):
        dh_total = dys[:, t, :hidden] + dh
        if kind == "lstm":
            dx, dh, dc = _lstm_step_backward(
                dh_total, dc, caches_f[t], fwd_p, grads, prefix_fwd
            )
        else:
            dx, dh = _gru_step_backward(dh_total, caches_f[t], fwd_p, grads, prefix_fwd)
        dxs[:, t] += dx
    dh = np.zeros((B, hidden), dtype=dys.dtype)
    dc = np.zeros((B, hidden), dtype=dys.dtype)
    for k in range(T - 1, -1, -1):
        t = T - 1 - k  # backward direction consumed timesteps in reverse
        dh_total = dys[:, t, hidden:] + dh
        if kind == "lstm":
            dx, dh, dc = _lstm_step_backward(
                dh_total, dc, caches_b[k], bwd_p, grads, prefix_bwd
            )
        else:
            dx, dh = _gru_step_backward(dh_total, caches_b[k], bwd_p, grads, prefix_bwd)
        dxs[:, t] += dx
    return dxs


def bidirectional_forward(xs, fwd_p, bwd_p, kind: str):
    """Bidirectional layer over a single sequence xs (T, F) -> (T, 2H)."""
    xs = np.asarray(xs)
    if xs.ndim != 2 or xs.shape[0] < 1:
        raise ValueError(f"bidirectional_forward: need a non-empty (T, F) input, got {xs.shape}")
    if kind not in ("lstm", "gru"):
        raise ValueError(f"unknown cell kind {kind!r}")
    ys, _ = _bi_forward_cached(xs[None, :, :], fwd_p, bwd_p, kind)
    return ys[0]
