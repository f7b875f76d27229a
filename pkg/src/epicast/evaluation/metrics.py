"""Forecast error metrics, the persistence baseline and small-sample statistics."""

from __future__ import annotations

import math
from datetime import date, timedelta

import numpy as np
from scipy import special, stats

from ..errors import EmptyInput, LengthMismatch, TooFewSamples, UnknownVariable, ZeroTarget, ZeroVariance
from ..ingestion import TimeSeriesTable


def _pair(predicted, actual) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(predicted, dtype=np.float64).ravel()
    a = np.asarray(actual, dtype=np.float64).ravel()
    if p.size != a.size:
        raise LengthMismatch(f"{p.size} predictions vs {a.size} actual values")
    if p.size == 0:
        raise EmptyInput("metrics need at least one point")
    return p, a


def mae(predicted, actual) -> float:
    p, a = _pair(predicted, actual)
    return float(np.mean(np.abs(a - p)))


def mape(predicted, actual) -> float:
    """Mean absolute percentage error relative to the actual values, in percent."""
    p, a = _pair(predicted, actual)
    zero = np.flatnonzero(a == 0)
    if zero.size:
        raise ZeroTarget(int(zero[0]))
    return float(100.0 * np.mean(np.abs(a - p) / np.abs(a)))


def accuracy(mape_value: float) -> float:
    """The "accuracy" figure quoted in summaries: 100 - MAPE."""
    return 100.0 - mape_value


def persistence_forecast(table: TimeSeriesTable, target: str, horizon: int = 1) -> tuple[list[date], np.ndarray]:
    """Anchor dates and (anchors, horizon) forecasts repeating each day's value.

    Anchor ``d`` forecasts days d+1..d+H, so only days with H later days
    available are anchors.
    """
    if target not in table.columns:
        raise UnknownVariable(target)
    if horizon < 1:
        raise LengthMismatch("horizon must be >= 1")
    y = table.columns[target]
    count = max(len(table) - horizon, 0)
    anchors = [table.start_date + timedelta(days=i) for i in range(count)]
    return anchors, np.repeat(y[:count, None], horizon, axis=1)


def t_test(sample_a, sample_b) -> tuple[float, float]:
    """Welch's unequal-variance t statistic and two-sided p-value."""
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise TooFewSamples("each sample needs at least 2 values")
    va = a.var(ddof=1) / a.size
    vb = b.var(ddof=1) / b.size
    diff = a.mean() - b.mean()
    se2 = va + vb
    if se2 == 0:
        if diff == 0:
            return 0.0, 1.0
        raise ZeroVariance("both samples")
    t = diff / math.sqrt(se2)
    df = se2**2 / ((va**2 / (a.size - 1) if va else 0.0) + (vb**2 / (b.size - 1) if vb else 0.0))
    # Two-sided tail of Student's t through the regularized incomplete beta.
    p = float(special.betainc(df / 2.0, 0.5, df / (df + t * t)))
    return float(t), min(p, 1.0)


def confidence_interval(samples, level: float = 0.95) -> float:
    """Half-width of the t-based confidence interval for the mean."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size < 2:
        raise TooFewSamples("a confidence interval needs at least 2 samples")
    tcrit = stats.t.ppf((1.0 + level) / 2.0, x.size - 1)
    return float(tcrit * x.std(ddof=1) / math.sqrt(x.size))
