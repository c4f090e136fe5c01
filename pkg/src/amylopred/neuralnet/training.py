"""Adam optimizer and the deterministic training loop.

All randomness (initialization, shuffling, dropout) is driven by a single
numpy Generator seeded from Hyperparams.seed, so identical seeds give
bit-identical models. The generator algorithm is numpy's PCG64.
"""

from __future__ import annotations

import logging

import numpy as np

from .network import backward_batch, bce_loss, forward_batch, to_timesteps
from .params import Hyperparams, ModelParams, init_model, named_params

log = logging.getLogger(__name__)


class Adam:
    """Adam with bias correction; beta1=0.9, beta2=0.999, eps=1e-8."""

    def __init__(self, model: ModelParams, lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.model = model
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(arr) for name, arr in named_params(model)}
        self.v = {name: np.zeros_like(arr) for name, arr in named_params(model)}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for name, arr in named_params(self.model):
            g = grads[name]
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            m_hat = self.m[name] / b1t
            v_hat = self.v[name] / b2t
            arr -= (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(arr.dtype)


def _eval_loss(model, hyper, grouped):
    """Mean evaluation-mode BCE over all examples (grouped by timestep count)."""
    total, count = 0.0, 0
    for xs, labels in grouped:
        p, _ = forward_batch(model, hyper, xs, training=False)
        total += bce_loss(p, labels) * len(labels)
        count += len(labels)
    return total / count


def _group_by_timesteps(items):
    """Group (x, label, T) items into dense (B, T, F) batches per T."""
    by_t: dict[int, list] = {}
    for xs, label in items:
        by_t.setdefault(xs.shape[0], []).append((xs, label))
    out = []
    for _, group in sorted(by_t.items()):
        out.append(
            (np.stack([x for x, _ in group]), np.asarray([y for _, y in group]))
        )
    return out


def train(examples, hyper: Hyperparams,
          rng: np.random.Generator | None = None) -> tuple[ModelParams, list[float]]:
    """Train the stack on labeled embedding inputs.

    `examples` is a sequence of (input, label) pairs; inputs are anything
    to_timesteps accepts. Returns the trained model and the per-epoch loss
    history (evaluation-mode mean BCE over the full training set after each
    epoch, so the curve is deterministic and dropout-free).
    """
    examples = list(examples)
    if not examples:
        raise ValueError("train needs a non-empty example list")
    labels = {int(y) for _, y in examples}
    if not labels <= {0, 1}:
        raise ValueError(f"labels must be 0/1, got {sorted(labels)}")
    if len(labels) == 1:
        log.warning("training set contains a single class (%d); proceeding", labels.pop())

    if rng is None:
        rng = np.random.default_rng(hyper.seed)
    shaped = [(to_timesteps(x, hyper), int(y)) for x, y in examples]
    feat = shaped[0][0].shape[1]
    for xs, _ in shaped:
        if xs.shape[1] != feat:
            raise ValueError("all examples must share a feature dimension")

    model = init_model(hyper, feat, rng)
    opt = Adam(model, hyper.learning_rate)
    eval_groups = _group_by_timesteps(shaped)
    history: list[float] = []
    n = len(shaped)
    for _ in range(hyper.epochs):
        order = rng.permutation(n)
        for start in range(0, n, hyper.batch_size):
            batch = [shaped[i] for i in order[start : start + hyper.batch_size]]
            # variable-length inputs: one dense sub-batch per timestep count,
            # gradients averaged with weights proportional to sub-batch size
            groups = _group_by_timesteps(batch)
            merged = None
            for xs, ys in groups:
                p, cache = forward_batch(model, hyper, xs, rng=rng, training=True)
                grads = backward_batch(model, hyper, cache, ys)
                weight = len(ys) / len(batch)
                if merged is None:
                    merged = {k: g * weight for k, g in grads.items()}
                else:
                    for k, g in grads.items():
                        merged[k] += g * weight
            opt.step(merged)
        history.append(_eval_loss(model, hyper, eval_groups))
    return model, history
