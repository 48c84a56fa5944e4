"""Fully-connected classifier head: 300 -> dropout -> 100 -> softmax.

Training minimizes mean categorical cross-entropy with minibatch Adam
(b1=0.9, b2=0.999, eps=1e-8), inverted dropout after the first hidden
layer, and patience-based early stopping on validation accuracy: any
improvement over the best value seen (by more than min_delta) resets the
counter and snapshots the parameters; the best snapshot is returned.

All math runs at float64. Every source of randomness (init, epoch
shuffles, dropout masks) flows from the config seed, so identical config
and data reproduce identical training histories.

FCNN v1 model file layout, little-endian:

    magic   "FCNN"                      4 bytes
    version u32 = 1                     4 bytes
    conflen u32, config UTF-8 "key = value" lines
    nlayers u32
    per layer: rows u32, cols u32, weight f32 * rows*cols (row-major),
               blen u32, bias f32 * blen
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Callable, NamedTuple

import numpy as np

from .errors import (
    ConfigError,
    DimensionError,
    MagicError,
    NonFiniteError,
    NonFiniteLossError,
    TruncationError,
    VersionError,
)
from .feature_core import FeatureSet, _read_exact

FCNN_MAGIC = b"FCNN"
FCNN_VERSION = 1

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class FcnnConfig:
    input_dim: int
    hidden: tuple[int, ...] = (300, 100)
    dropout_rate: float = 0.5
    classes: int = 10
    learning_rate: float = 1e-3
    batch_size: int = 128
    max_epochs: int = 200
    patience: int = 10
    min_delta: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if self.input_dim < 1:
            raise ConfigError(f"input_dim must be >= 1, got {self.input_dim}")
        if not self.hidden or any(w < 1 for w in self.hidden):
            raise ConfigError(f"hidden widths must all be >= 1, got {self.hidden}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.classes < 2:
            raise ConfigError(f"classes must be >= 2, got {self.classes}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ConfigError("batch_size, max_epochs, and patience must be >= 1")

    def layer_dims(self) -> list[tuple[int, int]]:
        widths = [self.input_dim, *self.hidden, self.classes]
        return list(zip(widths[:-1], widths[1:]))


class EpochStats(NamedTuple):
    train_loss: float
    val_accuracy: float


@dataclass
class FcnnModel:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    config: FcnnConfig
    history: list[EpochStats] = field(default_factory=list)

    def validate(self) -> None:
        dims = self.config.layer_dims()
        if len(self.weights) != len(dims) or len(self.biases) != len(dims):
            raise ConfigError("layer count does not match config")
        for (fan_in, fan_out), w, b in zip(dims, self.weights, self.biases):
            if w.shape != (fan_in, fan_out) or b.shape != (fan_out,):
                raise ConfigError(
                    f"layer shapes {w.shape}/{b.shape} inconsistent with "
                    f"config ({fan_in}, {fan_out})"
                )
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise NonFiniteError("model parameters contain non-finite values")


@dataclass(frozen=True)
class TrainOutcome:
    model: FcnnModel
    best_val_accuracy: float
    stop_epoch: int
    stopped_early: bool


class EarlyStopper:
    """Counts epochs without improvement over the best value seen."""

    def __init__(self, patience: int, min_delta: float = 0.0):
        self.patience = patience
        self.min_delta = min_delta
        self.best = -np.inf
        self.counter = 0

    def update(self, value: float) -> bool:
        """Record one epoch's metric; True when it improved on the best."""
        if value > self.best + self.min_delta:
            self.best = value
            self.counter = 0
            return True
        self.counter += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.counter >= self.patience


def _init_params(
    cfg: FcnnConfig, rng: np.random.Generator
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    weights, biases = [], []
    for fan_in, fan_out in cfg.layer_dims():
        limit = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def init_model(cfg: FcnnConfig) -> FcnnModel:
    """Fan-in-scaled uniform weights, zero biases, deterministic per seed."""
    cfg.validate()
    weights, biases = _init_params(cfg, np.random.default_rng(cfg.seed))
    return FcnnModel(weights, biases, cfg)


def _dropout_mask(
    rng: np.random.Generator, shape: tuple[int, int], rate: float
) -> np.ndarray:
    # Inverted dropout: surviving units are pre-scaled by 1/(1-rate) so
    # inference applies no correction.
    return (rng.random(shape) >= rate) / (1.0 - rate)


def _forward_pass(
    weights: list[np.ndarray],
    biases: list[np.ndarray],
    X: np.ndarray,
    dropout_mask: np.ndarray | None,
) -> tuple[list[np.ndarray], list[np.ndarray], np.ndarray]:
    """Returns (layer inputs, pre-activations, log-probabilities)."""
    inputs = [X]
    pre = []
    a = X
    last = len(weights) - 1
    for layer, (w, b) in enumerate(zip(weights, biases)):
        z = a @ w + b
        pre.append(z)
        if layer < last:
            a = np.maximum(z, 0.0)
            if layer == 0 and dropout_mask is not None:
                a = a * dropout_mask
            inputs.append(a)
    z_out = pre[-1]
    shifted = z_out - z_out.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return inputs, pre, log_probs


def forward(
    model: FcnnModel,
    X: np.ndarray,
    mode: str = "infer",
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Class probabilities, one row per sample, each summing to 1.

    mode 'train' applies inverted dropout after the first hidden layer
    (needs rng when dropout_rate > 0); 'infer' applies none.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.config.input_dim:
        raise DimensionError(
            f"X has shape {X.shape}, model expects (m, {model.config.input_dim})"
        )
    mask = _training_mask(model.config, X.shape[0], mode, rng)
    _, _, log_probs = _forward_pass(model.weights, model.biases, X, mask)
    return np.exp(log_probs)


def _training_mask(
    cfg: FcnnConfig, m: int, mode: str, rng: np.random.Generator | None
) -> np.ndarray | None:
    if mode == "infer":
        return None
    if mode != "train":
        raise ConfigError(f"mode must be 'train' or 'infer', got {mode!r}")
    if cfg.dropout_rate == 0.0:
        return None
    if rng is None:
        raise ConfigError("train-mode forward with dropout needs an rng")
    return _dropout_mask(rng, (m, cfg.hidden[0]), cfg.dropout_rate)


def first_hidden_activations(
    model: FcnnModel,
    X: np.ndarray,
    mode: str = "infer",
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Activations after the first hidden layer (post-dropout in train mode)."""
    X = np.asarray(X, dtype=np.float64)
    mask = _training_mask(model.config, X.shape[0], mode, rng)
    inputs, _, _ = _forward_pass(model.weights, model.biases, X, mask)
    return inputs[1]


def _loss_and_grads(
    weights: list[np.ndarray],
    biases: list[np.ndarray],
    X: np.ndarray,
    y: np.ndarray,
    dropout_mask: np.ndarray | None,
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    m = X.shape[0]
    inputs, pre, log_probs = _forward_pass(weights, biases, X, dropout_mask)
    loss = float(-log_probs[np.arange(m), y].mean())

    delta = np.exp(log_probs)
    delta[np.arange(m), y] -= 1.0
    delta /= m

    grads_w = [np.empty(0)] * len(weights)
    grads_b = [np.empty(0)] * len(weights)
    for layer in reversed(range(len(weights))):
        grads_w[layer] = inputs[layer].T @ delta
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            upstream = delta @ weights[layer].T
            if layer - 1 == 0 and dropout_mask is not None:
                upstream = upstream * dropout_mask
            delta = upstream * (pre[layer - 1] > 0.0)
    return loss, grads_w, grads_b


def _batch_loss(
    weights: list[np.ndarray], biases: list[np.ndarray], X: np.ndarray, y: np.ndarray
) -> float:
    _, _, log_probs = _forward_pass(weights, biases, X, None)
    return float(-log_probs[np.arange(X.shape[0]), y].mean())


def predict(model: FcnnModel, X: np.ndarray) -> np.ndarray:
    """Most probable class per row, lowest index winning ties."""
    return np.argmax(forward(model, X, mode="infer"), axis=1)


def accuracy(model: FcnnModel, feature_set: FeatureSet) -> float:
    return float(
        np.mean(predict(model, feature_set.values64()) == feature_set.labels)
    )


def train(
    cfg: FcnnConfig,
    train_set: FeatureSet,
    val_set: FeatureSet,
    val_metric: Callable[[FcnnModel, int], float] | None = None,
) -> TrainOutcome:
    """Minibatch Adam with per-epoch validation and early stopping.

    val_metric, when given, replaces the default validation-accuracy
    computation (the model passed to it holds the live parameters).
    Raises NonFiniteLossError with the epoch index if the loss diverges.
    """
    cfg.validate()
    if train_set.d != cfg.input_dim:
        raise DimensionError(
            f"training features have d={train_set.d}, config expects {cfg.input_dim}"
        )
    if val_set.d != cfg.input_dim:
        raise DimensionError(
            f"validation features have d={val_set.d}, config expects {cfg.input_dim}"
        )
    X = train_set.values64()
    y = train_set.labels
    n = X.shape[0]

    rng = np.random.default_rng(cfg.seed)
    weights, biases = _init_params(cfg, rng)
    mom_w = [np.zeros_like(w) for w in weights]
    vel_w = [np.zeros_like(w) for w in weights]
    mom_b = [np.zeros_like(b) for b in biases]
    vel_b = [np.zeros_like(b) for b in biases]
    step = 0

    def adam_update(params, grads, mom, vel):
        for p, g, m_, v_ in zip(params, grads, mom, vel):
            m_ *= ADAM_BETA1
            m_ += (1 - ADAM_BETA1) * g
            v_ *= ADAM_BETA2
            v_ += (1 - ADAM_BETA2) * g * g
            m_hat = m_ / (1.0 - ADAM_BETA1**step)
            v_hat = v_ / (1.0 - ADAM_BETA2**step)
            p -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS)

    history: list[EpochStats] = []
    live = FcnnModel(weights, biases, cfg, history)
    stopper = EarlyStopper(cfg.patience, cfg.min_delta)
    best_weights = [w.copy() for w in weights]
    best_biases = [b.copy() for b in biases]
    stopped_early = False
    epoch = 0

    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            mask = None
            if cfg.dropout_rate > 0.0:
                mask = _dropout_mask(
                    rng, (idx.size, cfg.hidden[0]), cfg.dropout_rate
                )
            # Divergence surfaces as a non-finite loss below; the interim
            # overflow warnings are expected noise on that path.
            with np.errstate(over="ignore", invalid="ignore"):
                loss, gw, gb = _loss_and_grads(
                    weights, biases, X[idx], y[idx], mask
                )
            if not np.isfinite(loss):
                raise NonFiniteLossError(
                    f"training loss diverged at epoch {epoch}", epoch=epoch
                )
            step += 1
            adam_update(weights, gw, mom_w, vel_w)
            adam_update(biases, gb, mom_b, vel_b)
            epoch_loss += loss * idx.size

        if val_metric is not None:
            val_accuracy = float(val_metric(live, epoch))
        else:
            val_accuracy = accuracy(live, val_set)
        history.append(EpochStats(epoch_loss / n, val_accuracy))

        if stopper.update(val_accuracy):
            best_weights = [w.copy() for w in weights]
            best_biases = [b.copy() for b in biases]
        elif stopper.should_stop:
            stopped_early = True
            break

    model = FcnnModel(best_weights, best_biases, cfg, history)
    return TrainOutcome(
        model=model,
        best_val_accuracy=float(stopper.best),
        stop_epoch=epoch,
        stopped_early=stopped_early,
    )


def gradient_check(cfg: FcnnConfig, X: np.ndarray, y: np.ndarray) -> float:
    """Max relative error between analytic and central-difference gradients.

    Dropout must be disabled (rate 0) so the loss is deterministic; every
    parameter of the network is perturbed by h=1e-5 in both directions.
    """
    cfg.validate()
    if cfg.dropout_rate != 0.0:
        raise ConfigError("gradient_check requires dropout_rate = 0")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    weights, biases = _init_params(cfg, np.random.default_rng(cfg.seed))
    _, grads_w, grads_b = _loss_and_grads(weights, biases, X, y, None)

    h = 1e-5
    worst = 0.0
    for params, grads in ((weights, grads_w), (biases, grads_b)):
        for tensor, grad in zip(params, grads):
            flat = tensor.ravel()
            for i in range(flat.size):
                original = flat[i]
                flat[i] = original + h
                plus = _batch_loss(weights, biases, X, y)
                flat[i] = original - h
                minus = _batch_loss(weights, biases, X, y)
                flat[i] = original
                numeric = (plus - minus) / (2 * h)
                analytic = grad.ravel()[i]
                rel = abs(analytic - numeric) / max(
                    abs(analytic), abs(numeric), 1e-8
                )
                worst = max(worst, rel)
    return worst


def _config_to_lines(cfg: FcnnConfig) -> str:
    return (
        f"input_dim = {cfg.input_dim}\n"
        f"hidden = {','.join(str(w) for w in cfg.hidden)}\n"
        f"dropout_rate = {cfg.dropout_rate!r}\n"
        f"classes = {cfg.classes}\n"
        f"learning_rate = {cfg.learning_rate!r}\n"
        f"batch_size = {cfg.batch_size}\n"
        f"max_epochs = {cfg.max_epochs}\n"
        f"patience = {cfg.patience}\n"
        f"min_delta = {cfg.min_delta!r}\n"
        f"seed = {cfg.seed}\n"
    )


def _config_from_lines(text: str) -> FcnnConfig:
    fields: dict[str, str] = {}
    for line in text.splitlines():
        if "=" in line:
            key, value = line.split("=", 1)
            fields[key.strip()] = value.strip()
    return FcnnConfig(
        input_dim=int(fields["input_dim"]),
        hidden=tuple(int(w) for w in fields["hidden"].split(",")),
        dropout_rate=float(fields["dropout_rate"]),
        classes=int(fields["classes"]),
        learning_rate=float(fields["learning_rate"]),
        batch_size=int(fields["batch_size"]),
        max_epochs=int(fields["max_epochs"]),
        patience=int(fields["patience"]),
        min_delta=float(fields["min_delta"]),
        seed=int(fields["seed"]),
    )


def write_model(model: FcnnModel, sink: BinaryIO) -> int:
    model.validate()
    config_bytes = _config_to_lines(model.config).encode("utf-8")
    written = 0
    chunks = [
        struct.pack("<4sI", FCNN_MAGIC, FCNN_VERSION),
        struct.pack("<I", len(config_bytes)),
        config_bytes,
        struct.pack("<I", len(model.weights)),
    ]
    for w, b in zip(model.weights, model.biases):
        chunks.append(struct.pack("<II", w.shape[0], w.shape[1]))
        chunks.append(np.ascontiguousarray(w, dtype="<f4").tobytes())
        chunks.append(struct.pack("<I", b.shape[0]))
        chunks.append(b.astype("<f4").tobytes())
    for chunk in chunks:
        sink.write(chunk)
        written += len(chunk)
    return written


def read_model(source: BinaryIO) -> FcnnModel:
    """Load a model saved by write_model; training history is not stored."""
    magic = _read_exact(source, 4, 0, "magic")
    if magic != FCNN_MAGIC:
        raise MagicError(f"bad magic {magic!r} at offset 0 (want b'FCNN')", offset=0)
    (version,) = struct.unpack("<I", _read_exact(source, 4, 4, "version"))
    if version != FCNN_VERSION:
        raise VersionError(f"unsupported FCNN version {version} at offset 4", offset=4)
    (config_len,) = struct.unpack("<I", _read_exact(source, 4, 8, "config length"))
    offset = 12
    cfg = _config_from_lines(
        _read_exact(source, config_len, offset, "config").decode("utf-8")
    )
    offset += config_len
    (n_layers,) = struct.unpack("<I", _read_exact(source, 4, offset, "layer count"))
    offset += 4
    weights, biases = [], []
    for _ in range(n_layers):
        rows, cols = struct.unpack("<II", _read_exact(source, 8, offset, "shape"))
        offset += 8
        w = np.frombuffer(
            _read_exact(source, rows * cols * 4, offset, "weights"), dtype="<f4"
        ).reshape(rows, cols)
        offset += rows * cols * 4
        (blen,) = struct.unpack("<I", _read_exact(source, 4, offset, "bias length"))
        offset += 4
        b = np.frombuffer(_read_exact(source, blen * 4, offset, "bias"), dtype="<f4")
        offset += blen * 4
        weights.append(w.astype(np.float64))
        biases.append(b.astype(np.float64))
    model = FcnnModel(weights, biases, cfg)
    model.validate()
    return model


def save_model(model: FcnnModel, path: str) -> int:
    with open(path, "wb") as fh:
        return write_model(model, fh)


def load_model(path: str) -> FcnnModel:
    with open(path, "rb") as fh:
        return read_model(fh)
