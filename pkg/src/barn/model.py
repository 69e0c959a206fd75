"""Small fully connected regressor from normalized metrics to seconds per meter.

Architecture 5 -> 64 -> 64 -> 1, rectified hidden units, identity output,
squared-error loss, plain mini-batch gradient descent.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DivergenceError
from .metrics import MetricStats, MetricVector, normalize

LAYERS = (5, 64, 64, 1)
MAGIC = "BARNMLP1"
PARAM_NAMES = ("W1", "b1", "W2", "b2", "W3", "b3")


@dataclass
class MlpModel:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    W3: np.ndarray
    b3: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, shape in zip(PARAM_NAMES, _shapes()):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != shape:
                raise ConfigurationError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.isfinite(arr).all():
                raise ConfigurationError(f"{name} contains non-finite values")
            setattr(self, name, arr)

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self) -> "MlpModel":
        return MlpModel(**{k: v.copy() for k, v in self.params().items()}, meta=dict(self.meta))

    @classmethod
    def zeros(cls) -> "MlpModel":
        return cls(*(np.zeros(s) for s in _shapes()))

    @classmethod
    def initialize(cls, seed: int) -> "MlpModel":
        """Weights uniform in +-1/sqrt(fan_in), biases zero."""
        rng = np.random.Generator(np.random.PCG64(seed))
        arrays = []
        for fan_in, fan_out in zip(LAYERS[:-1], LAYERS[1:]):
            bound = 1.0 / math.sqrt(fan_in)
            arrays.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            arrays.append(np.zeros(fan_out))
        return cls(*arrays, meta={"init": "uniform_fan_in", "init_seed": seed})

    # -- persistence ------------------------------------------------------

    def to_text(self) -> str:
        lines = [MAGIC + " " + " ".join(str(n) for n in LAYERS)]
        for name in PARAM_NAMES:
            arr = getattr(self, name)
            rows = arr if arr.ndim == 2 else arr[None, :]
            lines.extend(" ".join(repr(float(v)) for v in row) for row in rows)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, meta: dict | None = None) -> "MlpModel":
        lines = text.split("\n")
        header = lines[0].split()
        if header != [MAGIC, *map(str, LAYERS)]:
            raise ConfigurationError(f"unsupported model header {lines[0]!r}")
        values = np.array([float(tok) for line in lines[1:] for tok in line.split()])
        expected = sum(int(np.prod(s)) for s in _shapes())
        if values.size != expected:
            raise ConfigurationError(f"model file holds {values.size} parameters, expected {expected}")
        arrays, pos = [], 0
        for shape in _shapes():
            n = int(np.prod(shape))
            arrays.append(values[pos:pos + n].reshape(shape))
            pos += n
        return cls(*arrays, meta=meta or {})

    def save(self, path, extra_meta: dict | None = None) -> None:
        path = Path(path)
        path.write_text(self.to_text(), encoding="utf-8")
        meta = {
            "format": MAGIC,
            "layers": list(LAYERS),
            "hidden_activation": "relu",
            "output_activation": "identity",
            "loss": "mse",
            **self.meta,
            **(extra_meta or {}),
        }
        sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "MlpModel":
        path = Path(path)
        side = sidecar_path(path)
        meta = json.loads(side.read_text(encoding="utf-8")) if side.exists() else {}
        return cls.from_text(path.read_text(encoding="utf-8"), meta)


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def _shapes():
    shapes = []
    for fan_in, fan_out in zip(LAYERS[:-1], LAYERS[1:]):
        shapes += [(fan_in, fan_out), (fan_out,)]
    return shapes


def _forward(model: MlpModel, X: np.ndarray):
    z1 = X @ model.W1 + model.b1
    h1 = np.maximum(z1, 0.0)
    z2 = h1 @ model.W2 + model.b2
    h2 = np.maximum(z2, 0.0)
    out = h2 @ model.W3 + model.b3
    return out[:, 0], (X, z1, h1, z2, h2)


def _as_batch(features) -> np.ndarray:
    X = np.asarray(features, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != LAYERS[0]:
        raise ValueError(f"expected features of width {LAYERS[0]}, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise ValueError("features must be finite")
    return X


def forward(model: MlpModel, features) -> float | np.ndarray:
    """Prediction for one feature vector (float) or a batch of rows (array)."""
    single = np.ndim(features) == 1
    out, _ = _forward(model, _as_batch(features))
    return float(out[0]) if single else out


def batch_grad(model: MlpModel, X: np.ndarray, y: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
    """Mean squared error over the batch and its exact parameter gradients."""
    pred, (X, z1, h1, z2, h2) = _forward(model, X)
    n = X.shape[0]
    err = pred - y
    loss = float(np.mean(err**2))
    d_out = (2.0 / n) * err[:, None]
    g = {"W3": h2.T @ d_out, "b3": d_out.sum(axis=0)}
    d_h2 = d_out @ model.W3.T
    d_z2 = d_h2 * (z2 > 0)
    g["W2"] = h1.T @ d_z2
    g["b2"] = d_z2.sum(axis=0)
    d_h1 = d_z2 @ model.W2.T
    d_z1 = d_h1 * (z1 > 0)
    g["W1"] = X.T @ d_z1
    g["b1"] = d_z1.sum(axis=0)
    return loss, g


def grad(model: MlpModel, features, label: float) -> dict[str, np.ndarray]:
    """Gradients of ``(forward(features) - label) ** 2`` for a single example."""
    _, g = batch_grad(model, _as_batch(features), np.array([float(label)]))
    return g


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 2000
    learning_rate: float = 0.01
    batch_size: int = 32

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.learning_rate < 0:
            raise ConfigurationError("epochs, batch_size and learning_rate must be non-negative")


@dataclass(frozen=True)
class LabeledExample:
    features: tuple[float, ...]
    label: float

    def __post_init__(self):
        if len(self.features) != LAYERS[0] or not all(math.isfinite(f) for f in self.features):
            raise ValueError("features must be five finite numbers")
        if not self.label > 0:
            raise ValueError("label must be positive")


def mse(model: MlpModel, X, y) -> float:
    return float(np.mean((forward(model, np.asarray(X)) - np.asarray(y)) ** 2))


def train(
    examples: Sequence[LabeledExample],
    config: TrainConfig = TrainConfig(),
    seed: int = 0,
) -> MlpModel:
    """Fit a fresh model. Initialization and shuffling draw from separate seeded streams.

    ``meta["loss_history"]`` holds the full-dataset MSE after every epoch.
    """
    if len(examples) == 0:
        raise ConfigurationError("cannot train on an empty dataset")
    X = np.array([e.features for e in examples], dtype=np.float64)
    y = np.array([e.label for e in examples], dtype=np.float64)
    init_seq, shuffle_seq = np.random.SeedSequence(seed).spawn(2)
    model = MlpModel.initialize(int(init_seq.generate_state(1, np.uint64)[0]))
    rng = np.random.Generator(np.random.PCG64(shuffle_seq))
    history = []
    n = len(y)
    # overflow is expected once training blows up; it surfaces as DivergenceError
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(config.epochs):
            order = rng.permutation(n)
            for lo in range(0, n, config.batch_size):
                idx = order[lo:lo + config.batch_size]
                loss, g = batch_grad(model, X[idx], y[idx])
                if not math.isfinite(loss):
                    raise DivergenceError(epoch, loss)
                for name in PARAM_NAMES:
                    getattr(model, name)[...] -= config.learning_rate * g[name]
            epoch_loss = mse(model, X, y)
            if not math.isfinite(epoch_loss):
                raise DivergenceError(epoch, epoch_loss)
            history.append(epoch_loss)
    model.meta.update(
        epochs=config.epochs,
        learning_rate=config.learning_rate,
        batch_size=config.batch_size,
        seed=seed,
        final_loss=history[-1] if history else mse(model, X, y),
        loss_history=history,
    )
    return model


def predict_difficulty(model: MlpModel, stats: MetricStats, raw: MetricVector) -> float:
    return forward(model, normalize(raw, stats))
