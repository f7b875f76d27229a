import json
import math
from dataclasses import replace
from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy import stats

from epicast.errors import (
    EmptyInput,
    InvalidValue,
    LengthMismatch,
    TooFewSamples,
    TooShort,
    ZeroTarget,
    ZeroVariance,
)
from epicast.evaluation import (
    chronological_folds,
    confidence_interval,
    format_table,
    mae,
    mape,
    persistence_forecast,
    reproduction_plan,
    run_cv,
    span_indices,
    t_test,
)
from epicast.evaluation.metrics import accuracy
from epicast.forecasters import ModelSpec
from epicast.neural import TrainConfig
from epicast.windowing import build_windows

from helpers import make_table

pos = st.floats(1.0, 1e4)
real = st.floats(-1e4, 1e4)


def hand_mae(p, a):
    return sum(abs(x - y) for x, y in zip(a, p)) / len(a)


def hand_mape(p, a):
    return 100.0 * sum(abs(y - x) / abs(y) for x, y in zip(p, a)) / len(a)


# -- metrics ---------------------------------------------------------------------------


def test_metrics_known_values():
    assert mae([110, 90], [100, 100]) == 10.0
    assert mape([110, 90], [100, 100]) == pytest.approx(10.0)
    assert mape([0], [50]) == 100.0
    assert accuracy(8.76) == pytest.approx(91.24)


@given(st.lists(st.tuples(real, pos), min_size=1, max_size=40))
def test_metrics_match_hand_sums(pairs):
    p, a = zip(*pairs)
    assert abs(mae(p, a) - hand_mae(p, a)) <= 1e-9 * max(1.0, hand_mae(p, a))
    assert abs(mape(p, a) - hand_mape(p, a)) <= 1e-9 * max(1.0, hand_mape(p, a))


@given(st.lists(st.tuples(real, pos), min_size=1, max_size=30), st.sampled_from([0.5, 2.0, 4.0, 0.25]))
def test_mape_scale_invariant_and_mae_homogeneous(pairs, k):
    p, a = map(np.array, zip(*pairs))
    # powers of two keep the scaling exact in binary floating point
    assert mape(k * p, k * a) == mape(p, a)
    assert mae(k * p, k * a) == k * mae(p, a)


@given(st.lists(pos, min_size=1, max_size=20))
def test_perfect_forecast_scores_zero(a):
    assert mae(a, a) == 0.0 and mape(a, a) == 0.0


def test_metric_errors():
    with pytest.raises(ZeroTarget) as exc:
        mape([1, 2, 3], [5, 0, 1])
    assert exc.value.index == 1
    with pytest.raises(LengthMismatch):
        mae([1, 2], [1])
    with pytest.raises(EmptyInput):
        mae([], [])


def test_persistence_forecast_repeats_today():
    t = make_table(10)
    anchors, f = persistence_forecast(t, "y", 3)
    assert len(anchors) == 7 and f.shape == (7, 3)
    y = t.columns["y"]
    assert (f[4] == y[4]).all() and anchors[4] == t.start_date + timedelta(days=4)


# -- statistics ------------------------------------------------------------------------


@given(st.lists(real, min_size=2, max_size=15), st.lists(real, min_size=2, max_size=15))
def test_t_test_matches_scipy_welch(a, b):
    assume(np.var(a) > 1e-6 and np.var(b) > 1e-6)
    t, p = t_test(a, b)
    ref = stats.ttest_ind(a, b, equal_var=False)
    assert t == pytest.approx(ref.statistic, rel=1e-9, abs=1e-9)
    assert p == pytest.approx(ref.pvalue, rel=1e-7, abs=1e-12)


def test_t_test_degenerate_cases():
    assert t_test([1, 1], [1, 1]) == (0.0, 1.0)
    with pytest.raises(ZeroVariance):
        t_test([1, 1], [2, 2])
    with pytest.raises(TooFewSamples):
        t_test([1], [1, 2])


@given(st.lists(st.floats(-100, 100), min_size=2, max_size=20))
def test_confidence_interval_matches_scipy(xs):
    x = np.array(xs)
    assume(x.std() > 1e-6)
    lo, hi = stats.t.interval(0.95, x.size - 1, loc=x.mean(), scale=stats.sem(x))
    assert confidence_interval(x) == pytest.approx((hi - lo) / 2, rel=1e-9)


def test_confidence_interval_known_value():
    # n=5, sd=sqrt(2.5), t(0.975, 4)=2.7764451...
    assert confidence_interval([1, 2, 3, 4, 5]) == pytest.approx(2.7764451051977987 * math.sqrt(2.5) / math.sqrt(5))
    with pytest.raises(TooFewSamples):
        confidence_interval([1.0])


# -- folds -----------------------------------------------------------------------------


def test_reproduction_plan_geometry():
    plan = reproduction_plan()
    f1 = plan.folds[0]
    assert plan.k == 5
    assert f1.development == (date(2020, 3, 1), date(2020, 10, 14))
    assert f1.test == (date(2020, 10, 15), date(2020, 10, 28))
    assert plan.folds[-1].test[1] == date(2020, 12, 23)


@given(st.integers(1, 6), st.integers(1, 20), st.integers(0, 20), st.integers(0, 60))
def test_folds_are_strictly_chronological(k, test_span, val_span, slack):
    start = date(2020, 1, 1)
    end = start + timedelta(days=28 + val_span + k * test_span + slack)
    plan = chronological_folds(start, end, k, test_span, val_span)
    plan.check()
    assert plan.folds[-1].test[1] == end
    for f in plan.folds:
        assert f.train[0] == start
        assert (f.test[1] - f.test[0]).days + 1 == test_span
        if f.validation:
            assert f.validation[1] + timedelta(days=1) == f.test[0]
        assert f.development[1] < f.test[0]
    for a, b in zip(plan.folds, plan.folds[1:]):
        assert b.train[1] > a.train[1]


def test_fold_errors():
    with pytest.raises(TooShort):
        chronological_folds(date(2020, 1, 1), date(2020, 2, 1), k=5, test_span=14)
    with pytest.raises(InvalidValue):
        chronological_folds(date(2020, 1, 1), date(2020, 12, 1), k=0)
    with pytest.raises(TooShort):
        chronological_folds(date(2020, 1, 1), date(2020, 3, 1), k=1, anchor=date(2020, 2, 25))


# -- cross-validation ------------------------------------------------------------------------


def _plan(t, k=3, span=7):
    return chronological_folds(t.start_date, t.end_date, k=k, test_span=span, val_span=span, min_train=10)


def test_span_indices_use_every_target_date():
    t = make_table(30)
    ds = build_windows(t, ["a"], ["y"], 3, 3)
    lo, hi = date(2020, 3, 10), date(2020, 3, 15)
    idx = span_indices(ds, (lo, hi))
    for i in idx:
        assert lo <= ds.target_dates(i)[0] and ds.target_dates(i)[-1] <= hi
    assert len(idx) == 4


def test_persistence_self_comparison():
    t = make_table(60)
    spec = ModelSpec("persistence", ("y",), "y")
    rep = run_cv(t, spec, _plan(t), seeds=(0, 1))
    for f in rep.folds:
        assert f.mae == f.baseline_mae and f.mape == f.baseline_mape
    agg = rep.aggregate
    assert agg["mape"]["mean"] == agg["baseline_mape"]["mean"]


def test_report_contents_and_table():
    t = make_table(70)
    spec = ModelSpec("m5", ("a", "y"), "y", window=4)
    rep = run_cv(t, spec, _plan(t), seeds=(0, 1, 2))
    doc = json.loads(rep.to_json())
    assert doc["format_version"] == 1 and len(doc["folds"]) == 3
    fold_mapes = [f["mape"] for f in doc["folds"]]
    assert doc["aggregate"]["mape"]["mean"] == pytest.approx(np.mean(fold_mapes))
    assert doc["aggregate"]["mape"]["stdev"] == pytest.approx(np.std(fold_mapes, ddof=1))
    assert all(len(set(f["seed_mape"])) == 1 for f in doc["folds"])  # deterministic model
    rows = rep.predictions_csv().splitlines()
    assert rows[0] == "date,horizon,fold,actual,predicted,baseline"
    assert len(rows) == 1 + sum(f["n_test"] for f in doc["folds"])
    text = format_table(rep, accuracy=True)
    assert "Average" in text and "Stdev" in text and "accuracy (100 - MAPE)" in text


def test_multi_horizon_report_has_entry_per_day():
    t = make_table(80)
    spec = ModelSpec("persistence", ("y",), "y", horizon=7)
    rep = run_cv(t, spec, _plan(t, k=2, span=10))
    assert [r["horizon"] for r in rep.per_horizon] == list(range(1, 8))
    assert all(len(f.per_horizon) == 7 for f in rep.folds)


def test_run_cv_errors():
    t = make_table(60)
    spec = ModelSpec("persistence", ("y",), "y")
    with pytest.raises(InvalidValue):
        run_cv(t, spec, _plan(t), seeds=())
    far = chronological_folds(t.start_date, t.end_date + timedelta(days=30), k=2, test_span=7, val_span=7)
    with pytest.raises(TooShort):
        run_cv(t, spec, far)


def test_training_failure_names_fold_and_seed(monkeypatch):
    from epicast.errors import NumericOverflow
    from epicast.evaluation import cv

    def boom(*args, **kwargs):
        raise NumericOverflow("diverged")

    monkeypatch.setattr(cv, "fit_model", boom)
    t = make_table(60)
    spec = ModelSpec("cnn", ("a", "y"), "y", window=5, train=TrainConfig(epochs=1))
    with pytest.raises(NumericOverflow, match="fold 1, seed 4"):
        run_cv(t, spec, _plan(t), seeds=(4,))
