"""One interface over every model kind: fit on spans of a dataset, forecast, save, load."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from datetime import date, timedelta
from typing import Sequence

import numpy as np

from .errors import InvalidValue, SchemaMismatch, TooShort, UnknownVariable
from .ingestion import TimeSeriesTable
from .modeltree import M5Config, ModelTree, fit_tree, m5_predict
from .neural import NeuralForecaster, TrainConfig, TrainHistory, cnn, mtl_lstm, stl_lstm, train
from .neural.network import forecast as net_forecast
from .windowing import Normalizer, SupervisedDataset, _span_index, apply_normalizer, fit_normalizer

MODEL_KINDS = ("persistence", "m5", "cnn", "lstm-stl", "lstm-mtl")
NEURAL_KINDS = ("cnn", "lstm-stl", "lstm-mtl")
TARGET_MODES = ("level", "relative")
FORMAT_VERSION = 1


@dataclass(frozen=True)
class ModelSpec:
    """Everything needed to rebuild and retrain one forecaster."""

    kind: str
    inputs: tuple[str, ...]
    target: str
    window: int = 14
    horizon: int = 1
    normalize: str = "minmax"
    target_mode: str = "level"
    train: TrainConfig = field(default_factory=TrainConfig)
    m5: M5Config = field(default_factory=M5Config)
    cnn_filters: int = 32
    cnn_kernel: int = 3
    cnn_dense: int = 16

    def __post_init__(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise InvalidValue(f"unknown model kind {self.kind!r}; choose from {', '.join(MODEL_KINDS)}")
        object.__setattr__(self, "inputs", tuple(self.inputs))
        if self.kind in ("m5", "cnn", "lstm-stl") and self.horizon != 1:
            raise InvalidValue(f"{self.kind} forecasts a single day; use lstm-mtl for longer horizons")
        if self.kind != "persistence" and not self.inputs:
            raise InvalidValue(f"{self.kind} needs at least one input variable")
        if self.target_mode not in TARGET_MODES:
            raise InvalidValue(f"target_mode must be one of {TARGET_MODES}")
        if self.target_mode == "relative" and self.target not in self.inputs:
            raise InvalidValue("relative targets need the target among the inputs")

    def last_observed(self, raw_inputs: np.ndarray) -> np.ndarray:
        """The target's value on each window's final day, shape (samples, 1)."""
        j = self.inputs.index(self.target)
        return raw_inputs[:, -1, j : j + 1]

    def encode_targets(self, targets: np.ndarray, raw_inputs: np.ndarray) -> np.ndarray:
        """Map targets into the space the model is trained in."""
        if self.target_mode == "level":
            return targets
        if np.any(targets <= -1) or np.any(self.last_observed(raw_inputs) <= -1):
            raise InvalidValue("relative targets need values above -1")
        return np.log1p(targets) - np.log1p(self.last_observed(raw_inputs))

    def decode_forecasts(self, z: np.ndarray, raw_inputs: np.ndarray) -> np.ndarray:
        if self.target_mode == "level":
            return z
        return np.expm1(z + np.log1p(self.last_observed(raw_inputs)))

    @property
    def layout(self) -> str:
        return "flat" if self.kind == "m5" else "sequence"

    def architecture(self):
        if self.kind == "lstm-stl":
            return stl_lstm()
        if self.kind == "lstm-mtl":
            return mtl_lstm(self.horizon)
        if self.kind == "cnn":
            return cnn(self.cnn_filters, self.cnn_kernel, self.cnn_dense)
        raise InvalidValue(f"{self.kind} has no network architecture")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["inputs"] = list(self.inputs)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        d = dict(d)
        d["train"] = TrainConfig(**d.get("train", {}))
        d["m5"] = M5Config(**d.get("m5", {}))
        return cls(**d)


def input_windows(table: TimeSeriesTable, inputs: Sequence[str], window: int) -> tuple[list[date], np.ndarray]:
    """Every complete input window, including ones with no future target yet."""
    for name in inputs:
        if name not in table.columns:
            raise UnknownVariable(name)
        if np.isnan(table.columns[name]).any():
            raise InvalidValue(f"{name!r} has missing values; clean the table first")
    n = len(table)
    if window > n:
        raise TooShort(f"{n} days cannot hold a {window}-day window")
    data = np.stack([table.columns[v] for v in inputs], axis=1)
    idx = np.arange(n - window + 1)[:, None] + np.arange(window)[None, :]
    anchors = [table.start_date + timedelta(days=i + window - 1) for i in range(n - window + 1)]
    return anchors, data[idx]


@dataclass
class FittedModel:
    spec: ModelSpec
    normalizer: Normalizer | None = None
    model: ModelTree | NeuralForecaster | None = None
    history: TrainHistory | None = None

    def predict_inputs(self, raw_inputs: np.ndarray) -> np.ndarray:
        """Forecasts (samples, horizon) from raw, unnormalised (samples, W, V) windows."""
        x = np.asarray(raw_inputs, dtype=np.float64)
        if x.ndim != 3 or x.shape[1:] != (self.spec.window, len(self.spec.inputs)):
            raise SchemaMismatch(f"expected windows of shape ({self.spec.window}, {len(self.spec.inputs)})")
        if self.spec.kind == "persistence":
            if self.spec.target not in self.spec.inputs:
                raise SchemaMismatch("persistence needs the target among the inputs")
            return np.repeat(self.spec.last_observed(x), self.spec.horizon, axis=1)
        z = self.normalizer.apply(x) if self.normalizer else x
        if self.spec.kind == "m5":
            out = np.asarray(m5_predict(self.model, z.reshape(len(z), -1))).reshape(-1, 1)
        else:
            out = np.atleast_2d(net_forecast(self.model, z))
        return self.spec.decode_forecasts(out, x)

    def forecast_table(self, table: TimeSeriesTable, latest: int | None = None):
        """Anchor dates and forecasts for the table's windows (the last ``latest`` if given)."""
        if self.spec.kind == "persistence":
            if self.spec.target not in table.columns:
                raise UnknownVariable(self.spec.target)
            y = table.columns[self.spec.target]
            anchors = [table.start_date + timedelta(days=i) for i in range(len(table))]
            preds = np.repeat(y[:, None], self.spec.horizon, axis=1)
        else:
            missing = [v for v in self.spec.inputs if v not in table.columns]
            if missing:
                raise SchemaMismatch(f"table lacks model inputs: {', '.join(missing)}")
            anchors, x = input_windows(table, self.spec.inputs, self.spec.window)
            preds = self.predict_inputs(x)
        if latest is not None:
            anchors, preds = anchors[-latest:], preds[-latest:]
        return anchors, preds

    # -- serialization ---------------------------------------------------------

    def to_dict(self) -> dict:
        if self.model is None:
            model = None
        elif isinstance(self.model, ModelTree):
            model = json.loads(self.model.to_json())
        else:
            model = self.model.to_dict()
        return {
            "format_version": FORMAT_VERSION,
            "kind": "fitted-model",
            "spec": self.spec.to_dict(),
            "normalizer": self.normalizer.to_dict() if self.normalizer else None,
            "model": model,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "FittedModel":
        if d.get("format_version") != FORMAT_VERSION or d.get("kind") != "fitted-model":
            raise SchemaMismatch("not a saved model document")
        spec = ModelSpec.from_dict(d["spec"])
        norm = Normalizer.from_dict(d["normalizer"]) if d["normalizer"] else None
        m = d["model"]
        if m is None:
            model = None
        elif m.get("kind") == "m5":
            model = ModelTree.from_json(json.dumps(m))
        else:
            model = NeuralForecaster.from_dict(m)
        return cls(spec, norm, model)

    @classmethod
    def from_json(cls, text: str) -> "FittedModel":
        return cls.from_dict(json.loads(text))


def fit_model(
    spec: ModelSpec,
    dataset: SupervisedDataset,
    train_span,
    val_span=None,
    seed: int = 0,
) -> FittedModel:
    """Fit ``spec`` on raw (unnormalised) windows.

    The normaliser sees only the training span's input days. Relative
    targets are encoded per sample from that sample's own final input day. Neural models
    early-stop on ``val_span``; the tree has no use for a validation set and
    trains on training and validation samples together.
    """
    if dataset.input_names != spec.inputs or dataset.window != spec.window:
        raise SchemaMismatch("dataset inputs or window differ from the model spec")
    if dataset.horizon != spec.horizon:
        raise SchemaMismatch(f"dataset horizon {dataset.horizon} != spec horizon {spec.horizon}")
    if spec.kind == "persistence":
        return FittedModel(spec)
    tr = _span_index(train_span, len(dataset))
    va = _span_index(val_span, len(dataset)) if val_span is not None else np.array([], dtype=int)
    norm = fit_normalizer(dataset, tr, spec.normalize) if spec.normalize != "none" else None
    ds = apply_normalizer(norm, dataset) if norm else dataset
    ds = replace(ds, targets=spec.encode_targets(dataset.targets, dataset.inputs))
    if spec.kind == "m5":
        idx = np.concatenate([tr, va])
        flat = ds.with_layout("flat")
        tree = fit_tree(flat.X[idx], flat.targets[idx, 0], flat.variable_names, spec.m5, spec.target)
        return FittedModel(spec, norm, tree)
    net = NeuralForecaster(tuple(spec.architecture()), spec.window, len(spec.inputs))
    cfg = replace(spec.train, seed=seed)
    net, hist = train(net, ds, tr, va if va.size else None, cfg)
    return FittedModel(spec, norm, net, hist)
