"""Batch-1 Adam training with early stopping on validation MAE."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidValue, SchemaMismatch, SpanOverlap
from ..windowing import SupervisedDataset, _span_index
from .network import INIT_SCHEMES, NeuralForecaster, backward, forecast, forward
from .optim import AdamState, adam_step


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 5e-5
    epochs: int = 1000
    batch_size: int = 1
    patience: int = 50
    seed: int = 0
    loss: str = "mae"
    clip_norm: float | None = 5.0
    shuffle: bool = False
    lr_decay_patience: int | None = None
    scale_targets: bool = False
    init: str = "uniform"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self) -> None:
        if not self.learning_rate > 0:
            raise InvalidValue("learning_rate must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise InvalidValue("epochs and batch_size must be positive")
        if self.patience < 0:
            raise InvalidValue("patience must be >= 0")
        if self.init not in INIT_SCHEMES:
            raise InvalidValue(f"unknown init scheme {self.init!r}")
        if self.loss != "mae":
            raise InvalidValue(f"unsupported loss {self.loss!r}")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_mae: list[float] = field(default_factory=list)
    learning_rate: list[float] = field(default_factory=list)
    best_epoch: int = 0
    best_val_mae: float = math.inf

    @property
    def epochs_run(self) -> int:
        return len(self.train_loss)


def _clip(grads: dict[str, np.ndarray], max_norm: float | None) -> dict[str, np.ndarray]:
    if max_norm is None:
        return grads
    norm = math.sqrt(sum(float(np.vdot(g, g)) for g in grads.values()))
    if norm <= max_norm:
        return grads
    s = max_norm / norm
    return {k: g * s for k, g in grads.items()}


def check_spans(train_idx: np.ndarray, val_idx: np.ndarray) -> None:
    if train_idx.size == 0:
        raise InvalidValue("training span is empty")
    if val_idx.size and (np.intersect1d(train_idx, val_idx).size or val_idx.min() <= train_idx.max()):
        raise SpanOverlap("validation span must follow the training span without overlap")


def train(
    net: NeuralForecaster,
    dataset: SupervisedDataset,
    train_span,
    val_span,
    config: TrainConfig = TrainConfig(),
) -> tuple[NeuralForecaster, TrainHistory]:
    """Fit a fresh copy of ``net`` (weights re-drawn from ``config.seed``).

    Each epoch runs Adam over the training samples in chronological order
    (unless shuffling is on). Training stops once ``patience`` epochs pass
    without a new best validation MAE; the best weights are restored.
    """
    n = len(dataset)
    tr = _span_index(train_span, n)
    va = _span_index(val_span, n) if val_span is not None else np.array([], dtype=int)
    check_spans(tr, va)
    if (dataset.window, len(dataset.input_names)) != (net.window, net.n_vars):
        raise SchemaMismatch("dataset window/variables do not match the network")
    if dataset.targets.shape[1] != net.horizon:
        raise SchemaMismatch(f"network predicts {net.horizon} values, dataset has {dataset.targets.shape[1]}")

    x = dataset.inputs
    y = dataset.targets
    shift, scale = 0.0, 1.0
    if config.scale_targets:
        shift = float(y[tr].mean())
        sd = float(y[tr].std())
        scale = sd if sd > 0 else 1.0
    model = NeuralForecaster(net.specs, net.window, net.n_vars, target_shift=shift, target_scale=scale)
    model.init_weights(config.seed, config.init)

    rng = np.random.default_rng(config.seed)
    state = AdamState(config.beta1, config.beta2, config.eps)
    hist = TrainHistory()
    best = model.copy_params()
    lr = config.learning_rate
    since_decay = 0
    for epoch in range(config.epochs):
        order = rng.permutation(tr) if config.shuffle else tr
        total = 0.0
        for start in range(0, order.size, config.batch_size):
            b = order[start : start + config.batch_size]
            z, caches = forward(model, x[b])
            t = (y[b] - shift) / scale
            total += float(np.abs(z - t).sum())
            grads = _clip(backward(model, caches, z, y[b]), config.clip_norm)
            model.params = adam_step(state, model.params, grads, lr)
        hist.train_loss.append(total * scale / (order.size * y.shape[1]))
        hist.learning_rate.append(lr)

        if va.size:
            score = float(np.mean(np.abs(forecast(model, x[va]) - y[va])))
        else:
            score = hist.train_loss[-1]
        hist.val_mae.append(score)
        if score < hist.best_val_mae:
            hist.best_val_mae, hist.best_epoch = score, epoch
            best = model.copy_params()
            since_decay = 0
        else:
            since_decay += 1
            if config.lr_decay_patience and since_decay >= config.lr_decay_patience:
                lr *= 0.5
                since_decay = 0
        if epoch - hist.best_epoch >= config.patience:
            break
    model.params = best
    return model, hist


def predict(net: NeuralForecaster, dataset: SupervisedDataset, span=None) -> np.ndarray:
    """Forecasts in target units, shape (samples, horizon)."""
    idx = _span_index(span, len(dataset)) if span is not None else np.arange(len(dataset))
    if idx.size == 0:
        return np.empty((0, net.horizon))
    return np.atleast_2d(forecast(net, dataset.inputs[idx]))
