"""Chronological cross-validation with repeated seeds and a persistence baseline."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Callable, Sequence

import numpy as np

from ..errors import InvalidValue, TooShort, TrainingError
from ..forecasters import FittedModel, ModelSpec, fit_model
from ..ingestion import TimeSeriesTable
from ..windowing import SupervisedDataset, build_windows
from .folds import DateRange, Fold, FoldPlan
from .metrics import confidence_interval, mae, mape, t_test

FORMAT_VERSION = 1
DETERMINISTIC_KINDS = ("persistence", "m5")


def span_indices(dataset: SupervisedDataset, span: DateRange | None) -> np.ndarray:
    """Samples whose every target date lies inside ``span``."""
    if span is None:
        return np.array([], dtype=int)
    lo, hi = span
    h = dataset.horizon
    return np.array(
        [i for i, a in enumerate(dataset.anchor_dates) if a + timedelta(days=1) >= lo and a + timedelta(days=h) <= hi],
        dtype=int,
    )


def _stat(values: Sequence[float]) -> dict:
    v = np.asarray(values, dtype=np.float64)
    if v.size >= 2:
        return {"mean": float(v.mean()), "stdev": float(v.std(ddof=1)), "ci95": confidence_interval(v)}
    return {"mean": float(v.mean()), "stdev": 0.0, "ci95": None}


def _scores(pred: np.ndarray, actual: np.ndarray, base: np.ndarray) -> dict:
    per_h = [
        {
            "horizon": h + 1,
            "mae": mae(pred[:, h], actual[:, h]),
            "mape": mape(pred[:, h], actual[:, h]),
            "baseline_mae": mae(base[:, h], actual[:, h]),
            "baseline_mape": mape(base[:, h], actual[:, h]),
        }
        for h in range(actual.shape[1])
    ]
    return {"mae": mae(pred, actual), "mape": mape(pred, actual), "per_horizon": per_h}


@dataclass
class FoldResult:
    fold: Fold
    n_test: int
    mae: float
    mape: float
    baseline_mae: float
    baseline_mape: float
    seed_mae: list[float]
    seed_mape: list[float]
    per_horizon: list[dict]
    epochs: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "fold": self.fold.index,
            "train": self.fold.to_dict()["train"],
            "validation": self.fold.to_dict()["validation"],
            "test": self.fold.to_dict()["test"],
            "n_test": self.n_test,
            "mae": self.mae,
            "mape": self.mape,
            "baseline_mae": self.baseline_mae,
            "baseline_mape": self.baseline_mape,
            "seed_mae": self.seed_mae,
            "seed_mape": self.seed_mape,
            "per_horizon": self.per_horizon,
            "epochs": self.epochs,
        }


@dataclass
class EvalReport:
    spec: ModelSpec
    seeds: tuple[int, ...]
    plan: FoldPlan
    folds: list[FoldResult]
    predictions: list[tuple] = field(default_factory=list)  # (date, horizon, fold, actual, predicted, baseline)
    models: dict = field(default_factory=dict, repr=False)  # (fold, seed) -> FittedModel, never serialised

    @property
    def aggregate(self) -> dict:
        return {k: _stat([getattr(f, k) for f in self.folds]) for k in ("mae", "mape", "baseline_mae", "baseline_mape")}

    @property
    def per_horizon(self) -> list[dict]:
        out = []
        for h in range(self.spec.horizon):
            row = {"horizon": h + 1}
            for k in ("mae", "mape", "baseline_mae", "baseline_mape"):
                row[k] = float(np.mean([f.per_horizon[h][k] for f in self.folds]))
            out.append(row)
        return out

    @property
    def significance(self) -> dict | None:
        """Welch test of per-fold model MAPE against per-fold baseline MAPE."""
        if len(self.folds) < 2:
            return None
        try:
            t, p = t_test([f.mape for f in self.folds], [f.baseline_mape for f in self.folds])
        except InvalidValue:
            return None
        return {"t": t, "p": p}

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "model": self.spec.kind,
            "target": self.spec.target,
            "horizon": self.spec.horizon,
            "seeds": list(self.seeds),
            "spec": self.spec.to_dict(),
            "plan": self.plan.to_dict(),
            "folds": [f.to_dict() for f in self.folds],
            "aggregate": self.aggregate,
            "per_horizon": self.per_horizon,
            "significance": self.significance,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def predictions_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["date", "horizon", "fold", "actual", "predicted", "baseline"])
        for d, h, k, a, p, b in self.predictions:
            w.writerow([d.isoformat(), h, k, repr(a), repr(p), repr(b)])
        return buf.getvalue()


def format_table(report: EvalReport, accuracy: bool = False) -> str:
    """Per-fold rows followed by Average and Stdev rows."""
    head = f"{'Fold':<8}{'Test window':<25}{'MAE':>10}{'MAPE %':>10}{'Base MAE':>10}{'Base MAPE':>11}"
    lines = [f"{report.spec.kind} -> {report.spec.target} (H={report.spec.horizon}, seeds={list(report.seeds)})", head]
    for f in report.folds:
        t0, t1 = f.fold.test
        lines.append(
            f"{f.fold.index:<8}{t0.isoformat() + ' .. ' + t1.isoformat():<25}"
            f"{f.mae:>10.2f}{f.mape:>10.2f}{f.baseline_mae:>10.2f}{f.baseline_mape:>11.2f}"
        )
    agg = report.aggregate
    for label, key in (("Average", "mean"), ("Stdev", "stdev")):
        lines.append(
            f"{label:<33}{agg['mae'][key]:>10.2f}{agg['mape'][key]:>10.2f}"
            f"{agg['baseline_mae'][key]:>10.2f}{agg['baseline_mape'][key]:>11.2f}"
        )
    if agg["mape"]["ci95"] is not None:
        lines.append(f"{'95% CI (+/-)':<33}{agg['mae']['ci95']:>10.2f}{agg['mape']['ci95']:>10.2f}")
    if report.spec.horizon > 1:
        lines.append("Per horizon:")
        for row in report.per_horizon:
            lines.append(f"  D+{row['horizon']:<5}{'':<25}{row['mae']:>10.2f}{row['mape']:>10.2f}"
                         f"{row['baseline_mae']:>10.2f}{row['baseline_mape']:>11.2f}")
    if accuracy:
        lines.append(f"accuracy (100 - MAPE): {100.0 - agg['mape']['mean']:.2f}%")
    return "\n".join(lines)


def run_cv(
    table: TimeSeriesTable,
    spec: ModelSpec,
    plan: FoldPlan,
    seeds: Sequence[int] = (0,),
    keep_models: bool = False,
    progress: Callable[[str], None] | None = None,
) -> EvalReport:
    """Fit and score ``spec`` on every fold for every seed.

    Samples belong to a span when all their target dates fall inside it. A
    failure in any fold or seed aborts the whole run.
    """
    seeds = tuple(seeds)
    if not seeds:
        raise InvalidValue("at least one seed is required")
    if plan.folds[-1].test[1] > table.end_date or plan.folds[0].train[0] < table.start_date:
        raise TooShort("the fold plan reaches outside the table's dates")
    ds = build_windows(table, spec.inputs, [spec.target], spec.window, spec.horizon)
    y = table.columns[spec.target]
    base_all = np.repeat(y[spec.window - 1 : spec.window - 1 + len(ds), None], spec.horizon, axis=1)

    results, rows, models = [], [], {}
    for fold in plan.folds:
        tr = span_indices(ds, fold.train)
        va = span_indices(ds, fold.validation)
        te = span_indices(ds, fold.test)
        if tr.size == 0 or te.size == 0:
            raise TooShort(f"fold {fold.index}: no complete training or test samples")
        actual = ds.targets[te]
        base = base_all[te]
        seed_preds, seed_scores, epochs = [], [], []
        fitted = None
        for seed in seeds:
            if progress:
                progress(f"fold {fold.index} seed {seed}")
            if fitted is None or spec.kind not in DETERMINISTIC_KINDS:
                try:
                    fitted = fit_model(spec, ds, tr, va if va.size else None, seed)
                except TrainingError as exc:
                    raise type(exc)(f"fold {fold.index}, seed {seed}: {exc}") from exc
            if keep_models:
                models[(fold.index, seed)] = fitted
            pred = base if spec.kind == "persistence" else fitted.predict_inputs(ds.inputs[te])
            seed_preds.append(pred)
            seed_scores.append(_scores(pred, actual, base))
            if fitted.history is not None:
                epochs.append(fitted.history.epochs_run)
        per_h = []
        for h in range(spec.horizon):
            row = {"horizon": h + 1}
            for k in ("mae", "mape", "baseline_mae", "baseline_mape"):
                row[k] = float(np.mean([s["per_horizon"][h][k] for s in seed_scores]))
            per_h.append(row)
        results.append(
            FoldResult(
                fold=fold,
                n_test=int(te.size),
                mae=float(np.mean([s["mae"] for s in seed_scores])),
                mape=float(np.mean([s["mape"] for s in seed_scores])),
                baseline_mae=mae(base, actual),
                baseline_mape=mape(base, actual),
                seed_mae=[s["mae"] for s in seed_scores],
                seed_mape=[s["mape"] for s in seed_scores],
                per_horizon=per_h,
                epochs=epochs,
            )
        )
        mean_pred = np.mean(seed_preds, axis=0)
        for r, i in enumerate(te):
            for h in range(spec.horizon):
                d = ds.anchor_dates[i] + timedelta(days=h + 1)
                rows.append((d, h + 1, fold.index, float(actual[r, h]), float(mean_pred[r, h]), float(base[r, h])))
    return EvalReport(spec, seeds, plan, results, rows, models)
