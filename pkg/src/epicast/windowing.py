"""Supervised windows over a daily table, plus per-variable input scaling."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, replace
from datetime import date, timedelta
from typing import Sequence

import numpy as np

from .errors import InvalidValue, SchemaMismatch, TooShort, UnknownVariable, ZeroVariance
from .ingestion import TimeSeriesTable

LAYOUTS = ("sequence", "flat")
FORMAT_VERSION = 1


def flat_name(offset: int, name: str) -> str:
    return f"D-{offset}|{name}"


@dataclass(frozen=True, eq=False)
class SupervisedDataset:
    """Windowed samples.

    ``inputs`` always has shape (samples, window, variables); ``X`` presents it
    in the dataset's layout. Flat columns are day-major, oldest day first.
    """

    inputs: np.ndarray
    targets: np.ndarray
    anchor_dates: tuple[date, ...]
    layout: str
    input_names: tuple[str, ...]
    target_names: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.layout not in LAYOUTS:
            raise InvalidValue(f"layout must be one of {LAYOUTS}, got {self.layout!r}")
        inputs = np.array(self.inputs, dtype=np.float64)
        targets = np.array(self.targets, dtype=np.float64)
        if inputs.ndim != 3 or targets.ndim != 2 or inputs.shape[0] != targets.shape[0]:
            raise SchemaMismatch(f"bad shapes {inputs.shape} / {targets.shape}")
        if inputs.shape[2] != len(self.input_names):
            raise SchemaMismatch("input_names does not match the variable axis")
        if len(self.anchor_dates) != inputs.shape[0]:
            raise SchemaMismatch("one anchor date per sample is required")
        inputs.setflags(write=False)
        targets.setflags(write=False)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "anchor_dates", tuple(self.anchor_dates))
        object.__setattr__(self, "input_names", tuple(self.input_names))
        object.__setattr__(self, "target_names", tuple(self.target_names))

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def window(self) -> int:
        return self.inputs.shape[1]

    @property
    def horizon(self) -> int:
        return self.targets.shape[1]

    @property
    def X(self) -> np.ndarray:
        if self.layout == "flat":
            return self.inputs.reshape(len(self), -1)
        return self.inputs

    @property
    def variable_names(self) -> list[str]:
        if self.layout == "sequence":
            return list(self.input_names)
        w = self.window
        return [flat_name(w - 1 - t, v) for t in range(w) for v in self.input_names]

    def target_dates(self, i: int) -> list[date]:
        d0 = self.anchor_dates[i]
        return [d0 + timedelta(days=h) for h in range(1, self.horizon + 1)]

    def subset(self, span) -> "SupervisedDataset":
        idx = _span_index(span, len(self))
        return replace(
            self,
            inputs=self.inputs[idx],
            targets=self.targets[idx],
            anchor_dates=tuple(self.anchor_dates[i] for i in idx),
        )

    def with_layout(self, layout: str) -> "SupervisedDataset":
        return replace(self, layout=layout)


def _span_index(span, n: int) -> np.ndarray:
    if isinstance(span, slice):
        return np.arange(n)[span]
    return np.asarray(list(span) if isinstance(span, range) else span, dtype=int)


def unflatten(flat: np.ndarray, window: int, n_vars: int) -> np.ndarray:
    flat = np.asarray(flat)
    return flat.reshape(flat.shape[0], window, n_vars)


def build_windows(
    table: TimeSeriesTable,
    inputs: Sequence[str],
    targets: Sequence[str],
    window: int,
    horizon: int = 1,
    layout: str = "sequence",
) -> SupervisedDataset:
    """Sample i reads input days [i, i+window) and targets [i+window, i+window+horizon)."""
    if window < 1 or horizon < 1:
        raise InvalidValue("window and horizon must both be >= 1")
    n = len(table)
    if window + horizon > n:
        raise TooShort(f"{n} days cannot hold window={window} plus horizon={horizon}")
    for name in [*inputs, *targets]:
        if name not in table.columns:
            raise UnknownVariable(name)
        if np.isnan(table.columns[name]).any():
            raise InvalidValue(f"{name!r} has missing values; clean the table first")
    if len(targets) != 1 and horizon != 1:
        raise InvalidValue("multi-day horizons take exactly one target variable")

    data = np.stack([table.columns[v] for v in inputs], axis=1) if inputs else np.empty((n, 0))
    count = n - window - horizon + 1
    idx = np.arange(count)[:, None] + np.arange(window)[None, :]
    x = data[idx]
    if len(targets) == 1:
        tgt = table.columns[targets[0]]
        y = tgt[np.arange(count)[:, None] + window + np.arange(horizon)[None, :]]
    else:
        y = np.stack([table.columns[t][window : window + count] for t in targets], axis=1)
    anchors = tuple(table.start_date + timedelta(days=i + window - 1) for i in range(count))
    return SupervisedDataset(x, y, anchors, layout, tuple(inputs), tuple(targets))


@dataclass(frozen=True)
class Normalizer:
    names: tuple[str, ...]
    shift: np.ndarray
    scale: np.ndarray
    method: str = "minmax"

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x) - self.shift) / self.scale

    def invert(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z) * self.scale + self.shift

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "names": list(self.names),
            "shift": self.shift.tolist(),
            "scale": self.scale.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Normalizer":
        return cls(tuple(d["names"]), np.array(d["shift"], float), np.array(d["scale"], float), d["method"])

    @classmethod
    def identity(cls, names: Sequence[str]) -> "Normalizer":
        k = len(names)
        return cls(tuple(names), np.zeros(k), np.ones(k), "identity")


def training_days(dataset: SupervisedDataset, span) -> np.ndarray:
    """Distinct input days covered by the samples in ``span``, shape (days, variables)."""
    idx = _span_index(span, len(dataset))
    if idx.size == 0:
        raise InvalidValue("training span is empty")
    x = dataset.inputs
    contiguous = np.all(np.diff(idx) == 1) and all(
        (dataset.anchor_dates[b] - dataset.anchor_dates[a]).days == 1 for a, b in zip(idx, idx[1:])
    )
    if contiguous:
        return np.concatenate([x[idx, 0, :], x[idx[-1], 1:, :]], axis=0)
    return x[idx].reshape(-1, x.shape[2])


def fit_normalizer(dataset: SupervisedDataset, train_span, method: str = "minmax") -> Normalizer:
    """Per-variable shift/scale fitted on the training span's input days only."""
    vals = training_days(dataset, train_span)
    if method == "minmax":
        shift = vals.min(axis=0)
        scale = vals.max(axis=0) - shift
    elif method == "zscore":
        shift = vals.mean(axis=0)
        scale = vals.std(axis=0)
    else:
        raise InvalidValue(f"unknown normalization method {method!r}")
    for name, s in zip(dataset.input_names, scale):
        if not s > 0:
            raise ZeroVariance(name)
    return Normalizer(dataset.input_names, shift, scale, method)


def apply_normalizer(normalizer: Normalizer, dataset: SupervisedDataset) -> SupervisedDataset:
    if tuple(normalizer.names) != tuple(dataset.input_names):
        raise SchemaMismatch(
            f"normalizer variables {list(normalizer.names)} != dataset {list(dataset.input_names)}"
        )
    return replace(dataset, inputs=normalizer.apply(dataset.inputs))


def invert_normalizer(normalizer: Normalizer, dataset: SupervisedDataset) -> SupervisedDataset:
    if tuple(normalizer.names) != tuple(dataset.input_names):
        raise SchemaMismatch("normalizer and dataset variables differ")
    return replace(dataset, inputs=normalizer.invert(dataset.inputs))


# -- export -----------------------------------------------------------------


def _target_header(ds: SupervisedDataset) -> list[str]:
    if ds.horizon == 1:
        return [f"D+1|{t}" for t in ds.target_names]
    return [f"D+{h}|{ds.target_names[0]}" for h in range(1, ds.horizon + 1)]


def flat_csv(dataset: SupervisedDataset) -> str:
    """Flat rows: anchor date, W*V input columns named D-k|name, then targets."""
    ds = dataset.with_layout("flat")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["anchor_date", *ds.variable_names, *_target_header(ds)])
    for d, xrow, yrow in zip(ds.anchor_dates, ds.X, ds.targets):
        w.writerow([d.isoformat(), *map(repr, xrow.tolist()), *map(repr, yrow.tolist())])
    return buf.getvalue()


def sequence_manifest(dataset: SupervisedDataset) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "layout": "sequence",
        "samples": len(dataset),
        "window": dataset.window,
        "horizon": dataset.horizon,
        "input_names": list(dataset.input_names),
        "target_names": list(dataset.target_names),
        "anchor_dates": [d.isoformat() for d in dataset.anchor_dates],
        "inputs_block": "inputs.csv",
        "targets_block": "targets.csv",
        "block_format": "csv rows: sample, timestep, one column per input variable",
    }


def sequence_blocks(dataset: SupervisedDataset) -> tuple[str, str]:
    xb, yb = io.StringIO(), io.StringIO()
    wx = csv.writer(xb, lineterminator="\n")
    wx.writerow(["sample", "timestep", *dataset.input_names])
    for i, sample in enumerate(dataset.inputs):
        for t, row in enumerate(sample):
            wx.writerow([i, t, *map(repr, row.tolist())])
    wy = csv.writer(yb, lineterminator="\n")
    wy.writerow(["sample", *_target_header(dataset)])
    for i, row in enumerate(dataset.targets):
        wy.writerow([i, *map(repr, row.tolist())])
    return xb.getvalue(), yb.getvalue()


def load_sequence(manifest: dict, inputs_csv: str, targets_csv: str) -> SupervisedDataset:
    if manifest.get("format_version") != FORMAT_VERSION:
        raise SchemaMismatch(f"unsupported format_version {manifest.get('format_version')!r}")
    n, w = manifest["samples"], manifest["window"]
    v = len(manifest["input_names"])
    xr = list(csv.reader(io.StringIO(inputs_csv)))[1:]
    x = np.array([[float(c) for c in r[2:]] for r in xr]).reshape(n, w, v)
    yr = list(csv.reader(io.StringIO(targets_csv)))[1:]
    y = np.array([[float(c) for c in r[1:]] for r in yr]).reshape(n, -1)
    anchors = tuple(date.fromisoformat(s) for s in manifest["anchor_dates"])
    return SupervisedDataset(x, y, anchors, "sequence", manifest["input_names"], manifest["target_names"])


def dump_sequence(dataset: SupervisedDataset, directory) -> None:
    from pathlib import Path

    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    xs, ys = sequence_blocks(dataset)
    (out / "manifest.json").write_text(json.dumps(sequence_manifest(dataset), indent=2))
    (out / "inputs.csv").write_text(xs)
    (out / "targets.csv").write_text(ys)
