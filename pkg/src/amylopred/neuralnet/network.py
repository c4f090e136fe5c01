"""The classifier stack: input shaping, dropout, forward pass, BCE loss,
and backpropagation through the whole Bi-LSTM -> Bi-GRU -> dense pipeline.
"""

from __future__ import annotations

import numpy as np

from ..embedstore import PooledEmbedding, ResidueEmbeddings, mean_pool
from .cells import _bi_backward, _bi_forward_cached, sigmoid
from .params import Hyperparams, ModelParams, zero_grads

BCE_EPS = 1e-7


def dropout(v: np.ndarray, rate: float, rng: np.random.Generator | None,
            training: bool) -> np.ndarray:
    """Inverted dropout: zero each coordinate with probability `rate` and
    scale survivors by 1/(1-rate); identity in evaluation mode."""
    if not (0.0 <= rate < 1.0):
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return v
    if rng is None:
        raise ValueError("training-mode dropout requires an rng")
    mask = (rng.random(v.shape) >= rate).astype(v.dtype) / (1.0 - rate)
    return v * mask


def _dropout_mask(shape, rate, rng, dtype) -> np.ndarray | None:
    if rate == 0.0:
        return None
    return (rng.random(shape) >= rate).astype(dtype) / (1.0 - rate)


def to_timesteps(inp, hyper: Hyperparams) -> np.ndarray:
    """Convert an embedding input to its (T, F) timestep matrix.

    per_residue consumes an (L, D) matrix as L timesteps; pooled modes
    consume (or first compute) the pooled D-vector as one timestep or as
    reshape_t timesteps of D/reshape_t features, filled in coordinate
    order.
    """
    if isinstance(inp, ResidueEmbeddings):
        if hyper.input_mode == "per_residue":
            return np.asarray(inp.matrix)
        inp = mean_pool(inp)
    if isinstance(inp, PooledEmbedding):
        inp = inp.vector
    arr = np.asarray(inp)
    if hyper.input_mode == "per_residue":
        if arr.ndim != 2:
            raise ValueError(
                f"per_residue mode needs an (L, D) matrix, got shape {arr.shape}"
            )
        return arr
    if arr.ndim != 1:
        raise ValueError(
            f"{hyper.input_mode} mode needs a pooled D-vector, got shape {arr.shape}"
        )
    if hyper.input_mode == "pooled_unit":
        return arr[None, :]
    return arr.reshape(hyper.reshape_t, hyper.feature_dim(arr.shape[0]))


def forward_batch(model: ModelParams, hyper: Hyperparams, xs: np.ndarray,
                  rng: np.random.Generator | None = None, training: bool = False):
    """Forward pass over a batch xs (B, T, F) -> (probabilities (B,), cache)."""
    xs = np.asarray(xs, dtype=model.dtype)
    if xs.ndim != 3:
        raise ValueError(f"forward_batch needs (B, T, F) input, got {xs.shape}")
    if xs.shape[2] != model.input_dim:
        raise ValueError(
            f"input feature dim {xs.shape[2]} != model input_dim {model.input_dim}"
        )
    rate = hyper.dropout_rate if training else 0.0
    if rate > 0.0 and rng is None:
        raise ValueError("training-mode forward with dropout requires an rng")
    y1, cache1 = _bi_forward_cached(xs, model.lstm_fwd, model.lstm_bwd, "lstm")
    mask1 = _dropout_mask(y1.shape, rate, rng, y1.dtype) if training else None
    y1d = y1 * mask1 if mask1 is not None else y1
    y2, cache2 = _bi_forward_cached(y1d, model.gru_fwd, model.gru_bwd, "gru")
    mask2 = _dropout_mask(y2.shape, rate, rng, y2.dtype) if training else None
    y2d = y2 * mask2 if mask2 is not None else y2
    v = y2d.mean(axis=1)  # (B, 2G) readout: mean over timesteps
    u = v @ model.dense_w + model.dense_b
    p = sigmoid(u)
    cache = (cache1, mask1, cache2, mask2, v, p, xs.shape)
    return p, cache


def backward_batch(model: ModelParams, hyper: Hyperparams, cache,
                   labels: np.ndarray) -> dict[str, np.ndarray]:
    """Gradient of the mean batch BCE loss for every parameter array."""
    cache1, mask1, cache2, mask2, v, p, xs_shape = cache
    B, T, _ = xs_shape
    labels = np.asarray(labels, dtype=p.dtype)
    grads = zero_grads(model)
    du = (p - labels) / B  # d(mean BCE)/du through the sigmoid
    grads["dense.w"] += du @ v
    grads["dense.b"] += du.sum().astype(model.dense_b.dtype)
    dv = du[:, None] * model.dense_w[None, :]
    dy2 = np.repeat(dv[:, None, :], T, axis=1) / T
    if mask2 is not None:
        dy2 = dy2 * mask2
    dy1 = _bi_backward(dy2, cache2, model.gru_fwd, model.gru_bwd, "gru",
                       grads, "gru_fwd", "gru_bwd")
    if mask1 is not None:
        dy1 = dy1 * mask1
    _bi_backward(dy1, cache1, model.lstm_fwd, model.lstm_bwd, "lstm",
                 grads, "lstm_fwd", "lstm_bwd")
    return grads


def forward(model: ModelParams, hyper: Hyperparams, inp,
            rng: np.random.Generator | None = None,
            training: bool = False) -> float:
    """Score one input; returns the sigmoid probability in (0, 1).

    Evaluation mode (the default) is a pure deterministic function of
    (model, input)."""
    xs = to_timesteps(inp, hyper)
    p, _ = forward_batch(model, hyper, xs[None, :, :], rng=rng, training=training)
    return float(p[0])


def bce_loss(p: float | np.ndarray, y: int | np.ndarray) -> float:
    """Binary cross-entropy with probabilities clamped to [eps, 1-eps]."""
    p = np.clip(np.asarray(p, dtype=np.float64), BCE_EPS, 1.0 - BCE_EPS)
    y = np.asarray(y, dtype=np.float64)
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))))


def backward(model: ModelParams, hyper: Hyperparams,
             batch: list[tuple[np.ndarray, int]],
             rng: np.random.Generator | None = None,
             training: bool = False) -> tuple[dict[str, np.ndarray], float]:
    """Gradients of the mean BCE loss over a batch of (input, label) pairs.

    All inputs in the batch must share a timestep count. Returns
    (gradients, mean loss)."""
    if not batch:
        raise ValueError("backward needs a non-empty batch")
    xs = np.stack([to_timesteps(x, hyper) for x, _ in batch])
    labels = np.asarray([y for _, y in batch])
    p, cache = forward_batch(model, hyper, xs, rng=rng, training=training)
    grads = backward_batch(model, hyper, cache, labels)
    return grads, bce_loss(p, labels)
