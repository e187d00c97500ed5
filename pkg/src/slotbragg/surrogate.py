"""From-scratch multilayer perceptron regressor for corrugation -> I.

Plain NumPy: tanh hidden layers, sigmoid output (targets live in [0, 1]),
mean-squared-error loss, mini-batch gradient descent with a fixed learning
rate. Input features are z-scored with statistics taken from the training
split only. Everything is seeded and single-threaded, so training is
bit-reproducible.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    InvalidInputError,
    ModelFormatError,
    TrainingDivergedError,
    UnsupportedVersionError,
)

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class Dataset:
    """Training pairs (corrugation vector, indistinguishability)."""

    inputs: np.ndarray
    targets: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=float)
        y = np.asarray(self.targets, dtype=float)
        if x.ndim != 2 or y.ndim != 1 or len(x) != len(y):
            raise InvalidInputError("inputs must be (n, d), targets (n,)")
        if np.any(~np.isfinite(x)) or np.any(~np.isfinite(y)):
            raise InvalidInputError("dataset contains non-finite entries")
        if np.any((y < 0) | (y > 1)):
            raise InvalidInputError("targets must lie in [0, 1]")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "targets", y)

    def __len__(self):
        return len(self.targets)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 3000
    batch_size: int = 32
    learning_rate: float = 1e-2
    holdout_fraction: float = 0.2
    patience: int = 50
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.holdout_fraction < 1):
            raise InvalidInputError("holdout_fraction must be in (0, 1)")
        if min(self.epochs, self.batch_size, self.patience) <= 0:
            raise InvalidInputError("epochs, batch_size, patience must be positive")
        if self.learning_rate <= 0:
            raise InvalidInputError("learning_rate must be positive")


@dataclass(frozen=True)
class TrainHistory:
    train_loss: np.ndarray
    holdout_loss: np.ndarray
    best_epoch: int


@dataclass(frozen=True)
class SurrogateModel:
    """Weights, biases and input normalisation of the regressor.

    weights[l] has shape (fan_out, fan_in); the final layer has one output
    unit and a sigmoid squash, hidden layers use `activation`.
    """

    layer_sizes: tuple
    weights: tuple
    biases: tuple
    activation: str = "tanh"
    input_mean: np.ndarray = None
    input_std: np.ndarray = None
    seed: int = 0

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise InvalidInputError("layer_sizes needs at least input and output")
        if sizes[-1] != 1:
            raise InvalidInputError("output layer must have size 1")
        if self.activation not in ("tanh",):
            raise InvalidInputError(f"unsupported activation {self.activation!r}")
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise InvalidInputError("one weight and bias block per layer pair")
        ws, bs = [], []
        for l, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            W = np.asarray(self.weights[l], dtype=float)
            b = np.asarray(self.biases[l], dtype=float)
            if W.shape != (fan_out, fan_in):
                raise InvalidInputError(
                    f"layer {l} weight shape {W.shape} != {(fan_out, fan_in)}")
            if b.shape != (fan_out,):
                raise InvalidInputError(f"layer {l} bias shape {b.shape}")
            ws.append(W)
            bs.append(b)
        mean = (np.zeros(sizes[0]) if self.input_mean is None
                else np.asarray(self.input_mean, dtype=float))
        std = (np.ones(sizes[0]) if self.input_std is None
               else np.asarray(self.input_std, dtype=float))
        if mean.shape != (sizes[0],) or std.shape != (sizes[0],):
            raise InvalidInputError("normalisation must be per input feature")
        if np.any(std <= 0):
            raise InvalidInputError("input_std must be positive")
        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "weights", tuple(ws))
        object.__setattr__(self, "biases", tuple(bs))
        object.__setattr__(self, "input_mean", mean)
        object.__setattr__(self, "input_std", std)

    @property
    def input_size(self) -> int:
        return self.layer_sizes[0]

    def parameter_count(self) -> int:
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases))


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def init_model(layer_sizes, seed: int = 0) -> SurrogateModel:
    """Deterministic scaled-uniform initialisation; biases start at zero."""
    sizes = tuple(int(s) for s in layer_sizes)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return SurrogateModel(layer_sizes=sizes, weights=tuple(weights),
                          biases=tuple(biases), seed=seed)


def _forward(model: SurrogateModel, x: np.ndarray):
    """Return activations per layer; x is already normalised, shape (n, d)."""
    acts = [x]
    h = x
    last = len(model.weights) - 1
    for l, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ W.T + b
        h = _sigmoid(z) if l == last else np.tanh(z)
        acts.append(h)
    return acts


def predict(model: SurrogateModel, omega) -> float:
    """Surrogate indistinguishability for one corrugation vector."""
    x = np.asarray(omega, dtype=float)
    if x.shape != (model.input_size,):
        raise InvalidInputError(
            f"expected {model.input_size} widths, got shape {x.shape}")
    return float(predict_batch(model, x[None, :])[0])


def predict_batch(model: SurrogateModel, omegas: np.ndarray) -> np.ndarray:
    x = np.asarray(omegas, dtype=float)
    if x.ndim != 2 or x.shape[1] != model.input_size:
        raise InvalidInputError(f"expected (n, {model.input_size}) inputs")
    z = (x - model.input_mean) / model.input_std
    return _forward(model, z)[-1][:, 0]


def _loss_and_gradients(model: SurrogateModel, x: np.ndarray, y: np.ndarray):
    """MSE loss and its gradients for a normalised batch."""
    acts = _forward(model, x)
    out = acts[-1][:, 0]
    n = len(y)
    loss = float(np.mean((out - y) ** 2))
    grad_out = (2.0 / n) * (out - y)
    delta = (grad_out * out * (1.0 - out))[:, None]      # sigmoid derivative
    gW, gb = [None] * len(model.weights), [None] * len(model.biases)
    for l in range(len(model.weights) - 1, -1, -1):
        gW[l] = delta.T @ acts[l]
        gb[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ model.weights[l]) * (1.0 - acts[l] ** 2)
    return loss, gW, gb


def train(model: SurrogateModel, dataset: Dataset,
          config: TrainConfig) -> tuple:
    """Mini-batch gradient descent; returns (trained model, history).

    The split is by seeded index shuffle, normalisation statistics come from
    the training split only, and early stopping restores the best-holdout
    weights.
    """
    if len(dataset) < 2 or len(np.unique(dataset.targets)) < 2:
        raise InvalidInputError("dataset must contain at least 2 distinct targets")
    if dataset.inputs.shape[1] != model.input_size:
        raise InvalidInputError("dataset width does not match the model input")
    rng = np.random.default_rng(config.seed)
    order = rng.permutation(len(dataset))
    n_hold = max(1, int(round(config.holdout_fraction * len(dataset))))
    if n_hold >= len(dataset):
        raise InvalidInputError("holdout fraction leaves no training rows")
    hold_idx, train_idx = order[:n_hold], order[n_hold:]
    x_train = dataset.inputs[train_idx]
    y_train = dataset.targets[train_idx]
    x_hold = dataset.inputs[hold_idx]
    y_hold = dataset.targets[hold_idx]

    mean = x_train.mean(axis=0)
    std = x_train.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    model = replace(model, input_mean=mean, input_std=std,
                    seed=config.seed)
    zt = (x_train - mean) / std
    zh = (x_hold - mean) / std

    weights = [W.copy() for W in model.weights]
    biases = [b.copy() for b in model.biases]

    def snapshot():
        return replace(model, weights=tuple(W.copy() for W in weights),
                       biases=tuple(b.copy() for b in biases))

    def full_loss(x, y):
        m = replace(model, weights=tuple(weights), biases=tuple(biases))
        out = _forward(m, x)[-1][:, 0]
        return float(np.mean((out - y) ** 2))

    train_hist, hold_hist = [], []
    best = (math.inf, 0, snapshot())
    n = len(zt)
    for epoch in range(config.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = perm[start:start + config.batch_size]
            m = replace(model, weights=tuple(weights), biases=tuple(biases))
            loss, gW, gb = _loss_and_gradients(m, zt[idx], y_train[idx])
            if not math.isfinite(loss):
                raise TrainingDivergedError(epoch)
            for l in range(len(weights)):
                weights[l] -= config.learning_rate * gW[l]
                biases[l] -= config.learning_rate * gb[l]
        tl = full_loss(zt, y_train)
        hl = full_loss(zh, y_hold)
        if not (math.isfinite(tl) and math.isfinite(hl)):
            raise TrainingDivergedError(epoch)
        train_hist.append(tl)
        hold_hist.append(hl)
        if hl < best[0]:
            best = (hl, epoch, snapshot())
        elif epoch - best[1] >= config.patience:
            break
    history = TrainHistory(train_loss=np.array(train_hist),
                           holdout_loss=np.array(hold_hist),
                           best_epoch=best[1])
    return best[2], history


def gradient_check(model: SurrogateModel, inputs: np.ndarray,
                   targets: np.ndarray, step: float = 1e-6) -> float:
    """Max relative error between backprop and central finite differences.

    Intended for small models; cost is two forward passes per parameter.
    Inputs are taken as already normalised.
    """
    if model.parameter_count() > 1000:
        raise InvalidInputError("gradient_check is for models with <= 1e3 parameters")
    x = np.asarray(inputs, dtype=float)
    y = np.asarray(targets, dtype=float)
    _, gW, gb = _loss_and_gradients(model, x, y)

    def loss_with(weights, biases):
        m = replace(model, weights=tuple(weights), biases=tuple(biases))
        out = _forward(m, x)[-1][:, 0]
        return float(np.mean((out - y) ** 2))

    worst = 0.0
    weights = [W.copy() for W in model.weights]
    biases = [b.copy() for b in model.biases]
    for l in range(len(weights)):
        for arr, grad in ((weights[l], gW[l]), (biases[l], gb[l])):
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                keep = arr[idx]
                arr[idx] = keep + step
                up = loss_with(weights, biases)
                arr[idx] = keep - step
                down = loss_with(weights, biases)
                arr[idx] = keep
                fd = (up - down) / (2.0 * step)
                bp = float(grad[idx])
                scale = max(abs(fd), abs(bp), 1e-8)
                worst = max(worst, abs(fd - bp) / scale)
    return worst


def save(model: SurrogateModel, path: str) -> None:
    doc = {
        "version": MODEL_FORMAT_VERSION,
        "layer_sizes": list(model.layer_sizes),
        "activation": model.activation,
        "weights": [W.tolist() for W in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "input_mean": model.input_mean.tolist(),
        "input_std": model.input_std.tolist(),
        "seed": int(model.seed),
    }
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")
    os.replace(tmp, path)


def load(path: str) -> SurrogateModel:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"unparseable model file: {exc.msg}",
                               byte_offset=exc.pos) from exc
    if not isinstance(doc, dict) or "version" not in doc:
        raise ModelFormatError("model file missing version field")
    if doc["version"] != MODEL_FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"model version {doc['version']!r} not supported "
            f"(expected {MODEL_FORMAT_VERSION})")
    try:
        return SurrogateModel(
            layer_sizes=tuple(doc["layer_sizes"]),
            weights=tuple(np.array(W, dtype=float) for W in doc["weights"]),
            biases=tuple(np.array(b, dtype=float) for b in doc["biases"]),
            activation=doc["activation"],
            input_mean=np.array(doc["input_mean"], dtype=float),
            input_std=np.array(doc["input_std"], dtype=float),
            seed=int(doc["seed"]),
        )
    except (KeyError, TypeError, ValueError, InvalidInputError) as exc:
        raise ModelFormatError(f"malformed model file: {exc}") from exc
