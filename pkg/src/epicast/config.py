"""Serializable run configuration and the bundled experiment presets."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from datetime import date
from importlib import resources
from pathlib import Path

from .errors import InvalidValue, SchemaMismatch
from .evaluation.folds import FoldPlan, chronological_folds
from .forecasters import FORMAT_VERSION, ModelSpec
from .ingestion import (
    AVG7_CASES,
    DAILY_CASES,
    DEFAULT_INPUTS,
    TimeSeriesTable,
    clean_table,
    load_metadata,
    parse_table,
    rolling_average,
    synth_generate,
)
from .modeltree import M5Config
from .neural import TrainConfig

TARGET_NAMES = (DAILY_CASES, AVG7_CASES)


def _iso(d: date | None) -> str | None:
    return d.isoformat() if d else None


def _date(s) -> date | None:
    if s is None or isinstance(s, date):
        return s
    try:
        return date.fromisoformat(s)
    except (TypeError, ValueError):
        raise InvalidValue(f"bad date {s!r}") from None


@dataclass(frozen=True)
class FoldSettings:
    """Fold geometry; ``start``/``end`` default to the table's first/last day."""

    k: int = 5
    test_span: int = 14
    val_span: int = 14
    start: date | None = None
    end: date | None = None
    anchor: date | None = None
    min_train: int = 28

    def __post_init__(self) -> None:
        for name in ("start", "end", "anchor"):
            object.__setattr__(self, name, _date(getattr(self, name)))

    def plan(self, table: TimeSeriesTable) -> FoldPlan:
        return chronological_folds(
            self.start or table.start_date,
            self.end or table.end_date,
            k=self.k,
            test_span=self.test_span,
            val_span=self.val_span,
            anchor=self.anchor,
            min_train=self.min_train,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        for name in ("start", "end", "anchor"):
            d[name] = _iso(d[name])
        return d


@dataclass(frozen=True)
class RunConfig:
    """One experiment: data source, variables, model, training and folds.

    With no ``input`` path the table comes from the synthetic generator.
    An empty ``inputs`` list means every default driver present in the table.
    """

    name: str = "custom"
    input: str | None = None
    metadata: str | None = None
    date_column: str = "date"
    stage_column: str | None = None
    max_missing: float = 0.5
    synthetic_seed: int = 0
    synthetic_days: int = 306
    synthetic_noise: float = 0.05
    inputs: tuple[str, ...] = ()
    target: str = DAILY_CASES
    autoregressive: bool = True
    window: int = 14
    horizon: int = 1
    model: str = "lstm-stl"
    target_mode: str = "level"
    normalize: str = "minmax"
    train: TrainConfig = field(default_factory=TrainConfig)
    m5: M5Config = field(default_factory=M5Config)
    cnn_filters: int = 32
    cnn_kernel: int = 3
    cnn_dense: int = 16
    folds: FoldSettings = field(default_factory=FoldSettings)
    seeds: tuple[int, ...] = (0,)
    out: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.seeds:
            raise InvalidValue("at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise InvalidValue("seeds must be distinct")

    # -- data ------------------------------------------------------------------

    def load_table(self) -> TimeSeriesTable:
        """Read (or generate) the table, clean it and add the 7-day average."""
        if self.input is None:
            return synth_generate(self.synthetic_seed, self.synthetic_days, self.synthetic_noise)
        meta = load_metadata(Path(self.metadata).read_text()) if self.metadata else None
        raw = parse_table(Path(self.input).read_text(), self.date_column, meta, self.stage_column)
        table = clean_table(raw, self.max_missing)
        if DAILY_CASES in table.columns and AVG7_CASES not in table.columns:
            table = rolling_average(table, DAILY_CASES, 7, name=AVG7_CASES)
        return table

    def resolved_inputs(self, table: TimeSeriesTable) -> tuple[str, ...]:
        if self.inputs:
            names = [n for n in self.inputs if n != self.target]
        else:
            names = [n for n in DEFAULT_INPUTS if n in table.columns and n not in TARGET_NAMES]
        if self.autoregressive:
            names.append(self.target)
        return tuple(names)

    def model_spec(self, table: TimeSeriesTable) -> ModelSpec:
        inputs = self.resolved_inputs(table)
        if self.model == "persistence" and self.target not in inputs:
            inputs = (*inputs, self.target)
        return ModelSpec(
            kind=self.model,
            inputs=inputs,
            target=self.target,
            window=self.window,
            horizon=self.horizon,
            normalize=self.normalize,
            target_mode=self.target_mode,
            train=self.train,
            m5=self.m5,
            cnn_filters=self.cnn_filters,
            cnn_kernel=self.cnn_kernel,
            cnn_dense=self.cnn_dense,
        )

    def fold_plan(self, table: TimeSeriesTable) -> FoldPlan:
        return self.folds.plan(table)

    def with_overrides(self, **changes) -> "RunConfig":
        """Copy with the non-None entries of ``changes`` applied."""
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    # -- serialization -------------------------------------------------------------

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["inputs"] = list(self.inputs)
        d["seeds"] = list(self.seeds)
        d["train"] = self.train.to_dict()
        d["m5"] = self.m5.to_dict()
        d["folds"] = self.folds.to_dict()
        return {"format_version": FORMAT_VERSION, "kind": "run-config", **d}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        version = d.pop("format_version", FORMAT_VERSION)
        if version != FORMAT_VERSION or d.pop("kind", "run-config") != "run-config":
            raise SchemaMismatch("not a run configuration document")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise InvalidValue(f"unknown config field(s): {', '.join(unknown)}")
        try:
            if "train" in d:
                d["train"] = TrainConfig(**d["train"])
            if "m5" in d:
                d["m5"] = M5Config(**d["m5"])
            if "folds" in d:
                d["folds"] = FoldSettings(**d["folds"])
        except TypeError as exc:
            raise InvalidValue(str(exc)) from None
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidValue(f"config is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise InvalidValue("config must be a JSON object")
        return cls.from_dict(doc)

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_json(Path(path).read_text())


def preset_names() -> list[str]:
    files = resources.files("epicast").joinpath("configs").iterdir()
    return sorted(p.name[:-5] for p in files if p.name.endswith(".json"))


def load_preset(name: str) -> RunConfig:
    if name not in preset_names():
        raise InvalidValue(f"unknown preset {name!r}; choose from {', '.join(preset_names())}")
    return RunConfig.from_json(resources.files("epicast").joinpath("configs", f"{name}.json").read_text())


def resolve_config(ref: str) -> RunConfig:
    """A preset name or a path to a JSON config file."""
    if Path(ref).is_file():
        return RunConfig.load(ref)
    return load_preset(ref)
