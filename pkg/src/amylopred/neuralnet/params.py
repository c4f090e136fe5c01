"""Hyperparameters, trainable parameters, initialization, and model JSON."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, replace
from typing import Iterator

import numpy as np

MODEL_FORMAT_VERSION = 1

INPUT_MODES = ("pooled_unit", "pooled_reshape", "per_residue")

# Gate/weight names, in the fixed order used for initialization, Adam state,
# gradient dictionaries, and serialization.
LSTM_KEYS = ("W_i", "W_f", "W_o", "W_g", "U_i", "U_f", "U_o", "U_g",
             "b_i", "b_f", "b_o", "b_g")
GRU_KEYS = ("W_z", "W_r", "W_h", "U_z", "U_r", "U_h", "b_z", "b_r", "b_h")
LAYER_NAMES = ("lstm_fwd", "lstm_bwd", "gru_fwd", "gru_bwd")


@dataclass(frozen=True)
class Hyperparams:
    """Every knob of the classifier stack.

    input_mode:
        "pooled_unit"    -- the pooled D-vector as a single timestep
        "pooled_reshape" -- the pooled D-vector reshaped to reshape_t
                            timesteps of D/reshape_t features (default)
        "per_residue"    -- L timesteps of the raw L x D matrix
    """

    input_mode: str = "pooled_reshape"
    reshape_t: int = 8
    lstm_hidden: int = 64
    gru_hidden: int = 64
    dropout_rate: float = 0.3
    learning_rate: float = 1e-3
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    threshold: float = 0.5
    window_w: int = 6
    dtype: str = "float32"  # "float64" build mode is used by gradient checks

    def __post_init__(self):
        if self.input_mode not in INPUT_MODES:
            raise ValueError(f"unknown input_mode {self.input_mode!r}")
        if self.input_mode == "pooled_reshape" and self.reshape_t < 1:
            raise ValueError("reshape_t must be >= 1")
        if self.lstm_hidden < 1 or self.gru_hidden < 1:
            raise ValueError("hidden sizes must be positive")
        if not (0.0 <= self.dropout_rate < 1.0):
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if not (0.0 < self.threshold < 1.0):
            raise ValueError("threshold must lie in (0, 1)")
        if self.window_w < 1:
            raise ValueError("window_w must be positive")
        if self.dtype not in ("float32", "float64"):
            raise ValueError(f"dtype must be float32 or float64, got {self.dtype!r}")

    @property
    def np_dtype(self) -> np.dtype:
        return np.dtype(self.dtype)

    def feature_dim(self, embed_dim: int) -> int:
        """Per-timestep feature width for embeddings of width embed_dim."""
        if self.input_mode == "pooled_reshape":
            if embed_dim % self.reshape_t != 0:
                raise ValueError(
                    f"reshape_t={self.reshape_t} does not divide D={embed_dim}"
                )
            return embed_dim // self.reshape_t
        return embed_dim

    def with_overrides(self, **kwargs) -> "Hyperparams":
        return replace(self, **kwargs)


@dataclass
class ModelParams:
    """All trainable weights; each layer is a name -> ndarray mapping."""

    input_dim: int
    lstm_fwd: dict[str, np.ndarray] = field(default_factory=dict)
    lstm_bwd: dict[str, np.ndarray] = field(default_factory=dict)
    gru_fwd: dict[str, np.ndarray] = field(default_factory=dict)
    gru_bwd: dict[str, np.ndarray] = field(default_factory=dict)
    dense_w: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dense_b: np.ndarray = field(default_factory=lambda: np.zeros(()))

    def layer(self, name: str) -> dict[str, np.ndarray]:
        return getattr(self, name)

    @property
    def dtype(self) -> np.dtype:
        return self.dense_w.dtype

    def astype(self, dtype) -> "ModelParams":
        out = ModelParams(input_dim=self.input_dim)
        for layer_name in LAYER_NAMES:
            out_layer = out.layer(layer_name)
            for key, arr in self.layer(layer_name).items():
                out_layer[key] = arr.astype(dtype)
        out.dense_w = self.dense_w.astype(dtype)
        out.dense_b = self.dense_b.astype(dtype)
        return out


def named_params(model: ModelParams) -> Iterator[tuple[str, np.ndarray]]:
    """All parameter arrays with dotted names, in a fixed stable order."""
    for layer_name in LAYER_NAMES:
        keys = LSTM_KEYS if layer_name.startswith("lstm") else GRU_KEYS
        layer = model.layer(layer_name)
        for key in keys:
            yield f"{layer_name}.{key}", layer[key]
    yield "dense.w", model.dense_w
    yield "dense.b", model.dense_b


def set_param(model: ModelParams, name: str, value: np.ndarray) -> None:
    head, key = name.split(".")
    if head == "dense":
        if key == "w":
            model.dense_w = value
        else:
            model.dense_b = value
    else:
        model.layer(head)[key] = value


def zero_grads(model: ModelParams) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(arr) for name, arr in named_params(model)}


def _uniform(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def init_model(hyper: Hyperparams, input_dim: int, rng: np.random.Generator) -> ModelParams:
    """Initialize weights: uniform(+-1/sqrt(fan_in)), zero biases, LSTM
    forget-gate bias 1.0.

    Draw order is fixed (layer order of LAYER_NAMES, then key order of
    LSTM_KEYS/GRU_KEYS, then dense) so a given seed always yields the same
    model.
    """
    dtype = hyper.np_dtype
    H, G = hyper.lstm_hidden, hyper.gru_hidden
    model = ModelParams(input_dim=input_dim)
    for layer_name in ("lstm_fwd", "lstm_bwd"):
        layer = model.layer(layer_name)
        for key in LSTM_KEYS:
            if key.startswith("W"):
                layer[key] = _uniform(rng, (H, input_dim), input_dim, dtype)
            elif key.startswith("U"):
                layer[key] = _uniform(rng, (H, H), H, dtype)
            elif key == "b_f":
                layer[key] = np.ones(H, dtype=dtype)
            else:
                layer[key] = np.zeros(H, dtype=dtype)
    gru_in = 2 * H
    for layer_name in ("gru_fwd", "gru_bwd"):
        layer = model.layer(layer_name)
        for key in GRU_KEYS:
            if key.startswith("W"):
                layer[key] = _uniform(rng, (G, gru_in), gru_in, dtype)
            elif key.startswith("U"):
                layer[key] = _uniform(rng, (G, G), G, dtype)
            else:
                layer[key] = np.zeros(G, dtype=dtype)
    model.dense_w = _uniform(rng, (2 * G,), 2 * G, dtype)
    model.dense_b = np.zeros((), dtype=dtype)
    return model


def model_to_json(model: ModelParams, hyper: Hyperparams) -> dict:
    weights = {}
    shapes = {}
    for name, arr in named_params(model):
        weights[name] = [float(v) for v in np.asarray(arr, dtype=np.float64).ravel()]
        shapes[name] = list(arr.shape)
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "hyperparams": asdict(hyper),
        "input_dim": model.input_dim,
        "shapes": shapes,
        "weights": weights,  # row-major flattening of each array
    }


def save_model(model: ModelParams, hyper: Hyperparams, path) -> None:
    doc = model_to_json(model, hyper)
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")
    os.replace(tmp, path)


def load_model(path) -> tuple[ModelParams, Hyperparams]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {version!r}")
    hyper = Hyperparams(**doc["hyperparams"])
    dtype = hyper.np_dtype
    model = ModelParams(input_dim=int(doc["input_dim"]))
    for name, flat in doc["weights"].items():
        shape = tuple(doc["shapes"][name])
        arr = np.asarray(flat, dtype=np.float64).astype(dtype).reshape(shape)
        set_param(model, name, arr)
    return model, hyper
