"""From-scratch Bi-LSTM -> Bi-GRU -> sigmoid classifier with hand-written
backpropagation through time and deterministic Adam training."""

from .params import (
    Hyperparams,
    ModelParams,
    init_model,
    load_model,
    named_params,
    save_model,
)
from .cells import bidirectional_forward, gru_cell_forward, lstm_cell_forward
from .network import backward, bce_loss, dropout, forward, to_timesteps
from .training import Adam, train

__all__ = [
    "Hyperparams",
    "ModelParams",
    "init_model",
    "named_params",
    "save_model",
    "load_model",
    "lstm_cell_forward",
    "gru_cell_forward",
    "bidirectional_forward",
    "dropout",
    "forward",
    "backward",
    "bce_loss",
    "to_timesteps",
    "Adam",
    "train",
]
