from datetime import date

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy import stats

from epicast.analysis import lag_scan, pearson, rank_reports, reports_json, scan_all, summarize
from epicast.errors import InsufficientOverlap, InvalidValue, LengthMismatch, ZeroVariance
from epicast.ingestion import AVG7_CASES, DAILY_CASES, TimeSeriesTable

finite = st.floats(-1e3, 1e3, allow_nan=False)


@given(st.lists(st.tuples(finite, finite), min_size=3, max_size=50))
def test_pearson_matches_scipy(pairs):
    x, y = map(np.array, zip(*pairs))
    assume(np.ptp(x) > 1e-3 and np.ptp(y) > 1e-3)
    assert pearson(x, y) == pytest.approx(stats.pearsonr(x, y)[0], abs=1e-9)


@given(st.lists(finite, min_size=3, max_size=30), st.floats(0.1, 10), st.floats(-5, 5))
def test_pearson_affine_invariance(xs, a, b):
    x = np.array(xs)
    assume(np.ptp(x) > 1e-3)
    y = np.sin(x) + x
    assume(np.ptp(y) > 1e-3)
    assert abs(pearson(a * x + b, y) - pearson(x, y)) < 1e-9
    assert abs(pearson(-x, y) + pearson(x, y)) < 1e-9


def test_pearson_errors():
    with pytest.raises(LengthMismatch):
        pearson([1, 2, 3], [1, 2])
    with pytest.raises(InsufficientOverlap):
        pearson([1, 2], [1, 2])
    with pytest.raises(ZeroVariance):
        pearson([1, 1, 1], [1, 2, 3])


def _shifted_table(lag, n=120, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=n + lag)
    y = np.empty(n + lag)
    y[lag:] = -2.0 * x[:n]
    y[:lag] = rng.normal(size=lag)
    return TimeSeriesTable(date(2020, 1, 1), {"x": x[:n], "y": y[:n]})


@pytest.mark.parametrize("lag", [0, 3, 9])
def test_lag_scan_recovers_planted_lag(lag):
    rep = lag_scan(_shifted_table(lag), "x", "y", 12)
    assert rep.best_lag == lag
    assert rep.best_r == pytest.approx(-1.0)
    assert [c[0] for c in rep.correlations] == list(range(13))


def test_lag_scan_max_lag_zero_has_one_entry(synth):
    reps = scan_all(synth, DAILY_CASES, 0)
    assert reps and all(len(r.correlations) == 1 for r in reps)


def test_lag_scan_errors(synth):
    with pytest.raises(InvalidValue):
        lag_scan(synth, "IRH", DAILY_CASES, -1)
    with pytest.raises(InsufficientOverlap):
        lag_scan(synth, "IRH", DAILY_CASES, len(synth) - 2)


def test_scan_all_skips_constant_series():
    t = TimeSeriesTable(date(2020, 1, 1), {"y": np.arange(10.0), "c": np.ones(10), "x": np.arange(10.0) ** 2})
    assert [r.variable for r in scan_all(t, "y", 2)] == ["x"]


def test_ranking_and_json(synth_clean):
    drivers = [n for n in synth_clean.names if n not in (DAILY_CASES, AVG7_CASES)]
    reps = rank_reports(scan_all(synth_clean, DAILY_CASES, 21, drivers))
    assert reps[0].variable == "avg_temperature" and reps[0].best_lag == 10
    rs = [abs(r.best_r) for r in reps]
    assert rs == sorted(rs, reverse=True)
    assert '"format_version": 1' in reports_json(reps)
    assert reps[0].to_csv().splitlines()[0] == "lag,r"


def test_summarize_matches_numpy():
    vals = np.array([1.0, np.nan, 4.0, 7.0])
    s = summarize(TimeSeriesTable(date(2020, 1, 1), {"v": vals}))["v"]
    present = vals[~np.isnan(vals)]
    assert (s.min, s.max) == (1.0, 7.0)
    assert s.mean == pytest.approx(present.mean())
    assert s.stdev == pytest.approx(present.std(ddof=1))
    assert s.missing_fraction == 0.25
