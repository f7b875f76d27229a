"""Command-line front end: ``epicast <ingest|analyze|window|train|evaluate|forecast>``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace
from datetime import timedelta
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import rank_reports, scan_all
from .config import RunConfig, preset_names, resolve_config
from .errors import InputError, InvalidValue, SchemaMismatch, TrainingError
from .evaluation import format_table, run_cv, span_indices
from .forecasters import FORMAT_VERSION, MODEL_KINDS, FittedModel, fit_model
from .ingestion import (
    AVG7_CASES,
    DAILY_CASES,
    TimeSeriesTable,
    clean_table,
    dropped_variables,
    load_metadata,
    metadata_json,
    parse_table,
    rolling_average,
    serialize_table,
)
from .windowing import build_windows, dump_sequence, flat_csv

EXIT_OK, EXIT_INPUT, EXIT_TRAINING = 0, 2, 3


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _dump(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def read_table(path, metadata=None, date_column="date", stage_column=None) -> TimeSeriesTable:
    """Parse a table, picking up a ``metadata.json`` sitting next to it."""
    path = Path(path)
    meta_path = Path(metadata) if metadata else path.with_name("metadata.json")
    meta = load_metadata(meta_path.read_text()) if meta_path.is_file() else None
    return parse_table(path.read_text(), date_column, meta, stage_column)


def _rolling_name(variable: str, width: int) -> str:
    return AVG7_CASES if (variable, width) == (DAILY_CASES, 7) else f"{variable}_avg{width}"


def _run_config(args) -> RunConfig:
    """The --config run with any explicitly given flags applied on top."""
    cfg = resolve_config(args.config) if args.config else RunConfig()
    cfg = cfg.with_overrides(
        input=getattr(args, "input", None),
        metadata=getattr(args, "metadata", None),
        model=getattr(args, "model", None),
        target=getattr(args, "target", None),
        seeds=tuple(args.seed) if getattr(args, "seed", None) else None,
        out=getattr(args, "out", None),
    )
    if cfg.out is None:
        raise InvalidValue("--out is required (or set 'out' in the config)")
    return cfg


# -- commands -------------------------------------------------------------------------


def cmd_ingest(args) -> int:
    raw = read_table(args.input, args.metadata, args.date_column, args.stage_column)
    table = clean_table(raw, args.max_missing)
    for width in args.rolling or ():
        table = rolling_average(table, args.target, width, name=_rolling_name(args.target, width))
    out = Path(args.out)
    _write(out / "table.csv", serialize_table(table))
    _write(out / "metadata.json", metadata_json(table) + "\n")
    dropped = dropped_variables(raw, table)
    print(f"records: {len(table)} ({table.start_date} .. {table.end_date})")
    print(f"variables kept ({len(table.names)}): {', '.join(table.names)}")
    if dropped:
        pct = {m.name: m.missing_fraction for m in raw.variables}
        detail = ", ".join(f"{n} ({pct[n]:.0%} missing)" for n in dropped)
        print(f"variables dropped (> {args.max_missing:.0%} missing): {detail}")
    else:
        print("variables dropped: none")
    return EXIT_OK


def cmd_analyze(args) -> int:
    table = clean_table(read_table(args.table, args.metadata), 1.0)
    if args.target not in table.columns:
        raise InvalidValue(f"unknown target {args.target!r}; table has {', '.join(table.names)}")
    drivers = [n for n in table.names if n != args.target and not n.startswith(args.target)]
    drivers = [n for n in drivers if n not in (DAILY_CASES, AVG7_CASES)]
    reports = scan_all(table, args.target, args.max_lag, drivers)
    ranked = rank_reports(reports)
    doc = {
        "format_version": FORMAT_VERSION,
        "target": args.target,
        "max_lag": args.max_lag,
        "span": [table.start_date.isoformat(), table.end_date.isoformat()],
        "reports": [r.to_dict() for r in reports],
        "ranking": [
            {"rank": i, "variable": r.variable, "best_lag": r.best_lag, "best_r": r.best_r}
            for i, r in enumerate(ranked, start=1)
        ],
    }
    out = Path(args.out)
    _write(out / "analysis.json", _dump(doc))
    for r in reports:
        _write(out / "lags" / f"{r.variable}.csv", r.to_csv())
    print(f"{'Rank':<6}{'Variable':<28}{'Best lag':>9}{'r':>9}")
    for row in doc["ranking"]:
        print(f"{row['rank']:<6}{row['variable']:<28}{row['best_lag']:>9}{row['best_r']:>9.3f}")
    return EXIT_OK


def cmd_window(args) -> int:
    cfg = _run_config(args)
    table = cfg.load_table()
    inputs = cfg.resolved_inputs(table)
    ds = build_windows(table, inputs, [cfg.target], cfg.window, cfg.horizon, args.layout)
    out = Path(cfg.out)
    if args.layout == "flat":
        _write(out / "windows.csv", flat_csv(ds))
    else:
        dump_sequence(ds, out)
    print(f"{len(ds)} samples, window {cfg.window}, horizon {cfg.horizon}, {len(inputs)} input variables ({args.layout})")
    return EXIT_OK


def cmd_train(args) -> int:
    """Fit on the final fold's training and validation spans, one model per seed."""
    cfg = _run_config(args)
    table = cfg.load_table()
    spec = cfg.model_spec(table)
    fold = cfg.fold_plan(table).folds[-1]
    ds = build_windows(table, spec.inputs, [spec.target], spec.window, spec.horizon)
    tr, va = span_indices(ds, fold.train), span_indices(ds, fold.validation)
    out = Path(cfg.out)
    for seed in cfg.seeds:
        try:
            fitted = fit_model(spec, ds, tr, va if va.size else None, seed)
        except TrainingError as exc:
            raise type(exc)(f"seed {seed}: {exc}") from exc
        _write(out / f"model-seed{seed}.json", fitted.to_json() + "\n")
        line = f"seed {seed}: {spec.kind} trained on {tr.size} samples"
        if fitted.history is not None:
            h = fitted.history
            line += f", {h.epochs_run} epochs, best validation MAE {h.best_val_mae:.3f} at epoch {h.best_epoch + 1}"
            hist = {"format_version": FORMAT_VERSION, "seed": seed, "train_loss": h.train_loss,
                    "val_mae": h.val_mae, "learning_rate": h.learning_rate, "best_epoch": h.best_epoch}
            _write(out / f"history-seed{seed}.json", _dump(hist))
        print(line)
    _write(out / "config.json", cfg.to_json())
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _run_config(args)
    table = cfg.load_table()
    report = run_cv(table, cfg.model_spec(table), cfg.fold_plan(table), cfg.seeds)
    out = Path(cfg.out)
    _write(out / "report.json", report.to_json())
    _write(out / "predictions.csv", report.predictions_csv())
    _write(out / "config.json", cfg.to_json())
    print(format_table(report, accuracy=True))
    return EXIT_OK


def forecast_rows(model: FittedModel, table: TimeSeriesTable, horizon: int | None = None, latest: int = 1):
    h_max = model.spec.horizon
    if horizon is not None and not 1 <= horizon <= h_max:
        raise SchemaMismatch(f"the model forecasts 1..{h_max} days ahead, not {horizon}")
    anchors, preds = model.forecast_table(table, latest)
    rows = []
    for d0, p in zip(anchors, preds):
        for h in range(horizon or h_max):
            v = float(p[h])
            rows.append((d0, d0 + timedelta(days=h + 1), h + 1, v, int(np.rint(v))))
    return rows


def cmd_forecast(args) -> int:
    try:
        model = FittedModel.from_json(Path(args.model).read_text())
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise SchemaMismatch(f"cannot read model {args.model}: {exc}") from None
    table = clean_table(read_table(args.table, args.metadata), 1.0)
    rows = forecast_rows(model, table, args.horizon, args.latest)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["anchor_date", "target_date", "horizon_index", "forecast", "rounded_forecast"])
    for d0, d1, h, v, r in rows:
        w.writerow([d0.isoformat(), d1.isoformat(), h, repr(v), r])
    _write(Path(args.out) / "forecast.csv", buf.getvalue())
    sys.stdout.write(buf.getvalue())
    return EXIT_OK


# -- parser ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="epicast", description="Forecast daily case counts from lagged drivers.")
    p.add_argument("--version", action="version", version=f"epicast {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    ing = sub.add_parser("ingest", help="parse, clean and enrich a daily CSV")
    ing.add_argument("input")
    ing.add_argument("--out", required=True)
    ing.add_argument("--metadata", help="JSON sidecar with variable units and roles")
    ing.add_argument("--date-column", default="date")
    ing.add_argument("--stage-column", help="text column of restriction stages to encode as levels")
    ing.add_argument("--max-missing", type=float, default=0.5)
    ing.add_argument("--rolling", type=int, action="append", metavar="DAYS", help="add a trailing mean of the target")
    ing.add_argument("--target", default=DAILY_CASES)
    ing.set_defaults(func=cmd_ingest)

    ana = sub.add_parser("analyze", help="lag correlation of every driver against the target")
    ana.add_argument("table")
    ana.add_argument("--out", required=True)
    ana.add_argument("--metadata")
    ana.add_argument("--target", default=DAILY_CASES)
    ana.add_argument("--max-lag", type=int, default=21)
    ana.set_defaults(func=cmd_analyze)

    def run_flags(sp, model_flags=True):
        sp.add_argument("--config", help=f"JSON RunConfig path or preset ({', '.join(preset_names())})")
        sp.add_argument("--input", help="table CSV (default: the config's source)")
        sp.add_argument("--metadata")
        sp.add_argument("--target")
        sp.add_argument("--out")
        if model_flags:
            sp.add_argument("--model", choices=MODEL_KINDS)
            sp.add_argument("--seed", type=int, action="append", help="repeatable")

    win = sub.add_parser("window", help="write supervised windows")
    run_flags(win, model_flags=False)
    win.add_argument("--layout", choices=("flat", "sequence"), default="flat")
    win.set_defaults(func=cmd_window)

    tr = sub.add_parser("train", help="fit a model on the last fold's development data")
    run_flags(tr)
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("evaluate", help="chronological cross-validation against persistence")
    run_flags(ev)
    ev.set_defaults(func=cmd_evaluate)

    fc = sub.add_parser("forecast", help="forecast from the latest windows of a table")
    fc.add_argument("model")
    fc.add_argument("table")
    fc.add_argument("--out", required=True)
    fc.add_argument("--metadata")
    fc.add_argument("--horizon", type=int, help="emit days 1..HORIZON (default: all the model predicts)")
    fc.add_argument("--latest", type=int, default=1, help="number of most recent anchor dates")
    fc.set_defaults(func=cmd_forecast)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TrainingError as exc:
        print(f"error: training failed: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    except (InputError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
