"""Correlation and lag analysis between drivers and the target."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from datetime import date

import numpy as np

from .errors import InsufficientOverlap, InvalidValue, LengthMismatch, ZeroVariance
from .ingestion import TimeSeriesTable


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"series lengths differ: {x.shape} vs {y.shape}")
    if x.size < 3:
        raise InsufficientOverlap(f"need at least 3 points, got {x.size}")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0:
        raise ZeroVariance("x")
    if syy == 0.0:
        raise ZeroVariance("y")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


@dataclass(frozen=True)
class LagCorrelationReport:
    variable: str
    target: str
    correlations: tuple[tuple[int, float], ...]
    best_lag: int
    best_r: float
    span: tuple[date, date]

    def to_dict(self) -> dict:
        return {
            "variable": self.variable,
            "target": self.target,
            "best_lag": self.best_lag,
            "best_r": self.best_r,
            "span": [self.span[0].isoformat(), self.span[1].isoformat()],
            "correlations": [{"lag": lag, "r": r} for lag, r in self.correlations],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lag", "r"])
        for lag, r in self.correlations:
            w.writerow([lag, repr(r)])
        return buf.getvalue()


def lag_scan(table: TimeSeriesTable, variable: str, target: str, max_lag: int) -> LagCorrelationReport:
    """Correlate ``variable`` on day d with ``target`` on day d+L for L = 0..max_lag.

    Each lag uses the full overlap that remains after shifting; the best lag
    maximises |r|, ties going to the smaller lag.
    """
    x = table.column(variable)
    y = table.column(target)
    n = len(table)
    if max_lag < 0:
        raise InvalidValue(f"max_lag must be >= 0, got {max_lag}")
    if n - max_lag < 3:
        raise InsufficientOverlap(f"max_lag={max_lag} leaves {n - max_lag} overlapping days")
    if np.isnan(x).any() or np.isnan(y).any():
        raise InvalidValue("lag_scan needs complete series; clean the table first")
    corrs = []
    best_lag, best_r = 0, 0.0
    for lag in range(max_lag + 1):
        r = pearson(x[: n - lag], y[lag:])
        corrs.append((lag, r))
        if lag == 0 or abs(r) > abs(best_r):
            best_lag, best_r = lag, r
    return LagCorrelationReport(
        variable, target, tuple(corrs), best_lag, best_r, (table.start_date, table.end_date)
    )


def scan_all(
    table: TimeSeriesTable, target: str, max_lag: int, variables=None
) -> list[LagCorrelationReport]:
    """Lag-scan every variable against ``target``; constant series are skipped."""
    names = variables or [n for n in table.names if n != target]
    out = []
    for name in names:
        try:
            out.append(lag_scan(table, name, target, max_lag))
        except ZeroVariance:
            continue
    return out


def rank_reports(reports: list[LagCorrelationReport]) -> list[LagCorrelationReport]:
    return sorted(reports, key=lambda r: (-abs(r.best_r), r.variable))


def reports_json(reports: list[LagCorrelationReport]) -> str:
    return json.dumps(
        {"format_version": 1, "reports": [r.to_dict() for r in reports]}, indent=2
    )


@dataclass(frozen=True)
class VariableSummary:
    name: str
    min: float
    max: float
    mean: float
    stdev: float
    missing_fraction: float

    def to_dict(self) -> dict:
        return self.__dict__.copy()


def summarize(table: TimeSeriesTable) -> dict[str, VariableSummary]:
    """Min/max/mean/sample-stdev over present values, per variable."""
    out = {}
    for m in table.variables:
        col = table.columns[m.name]
        vals = col[~np.isnan(col)]
        if vals.size == 0:
            out[m.name] = VariableSummary(m.name, math.nan, math.nan, math.nan, math.nan, 1.0)
            continue
        sd = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        out[m.name] = VariableSummary(
            m.name, float(vals.min()), float(vals.max()), float(vals.mean()), sd, m.missing_fraction
        )
    return out
