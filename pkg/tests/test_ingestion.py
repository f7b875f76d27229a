import math
from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from epicast.errors import (
    DateGap,
    DuplicateDate,
    EmptyTable,
    InvalidValue,
    MissingTarget,
    ParseError,
    TooShort,
    UnknownStage,
    UnknownVariable,
)
from epicast.ingestion import (
    AVG7_CASES,
    DAILY_CASES,
    IRH_LAG,
    TEMPERATURE_LAG,
    TimeSeriesTable,
    VariableMeta,
    clean_table,
    dropped_variables,
    encode_restrictions,
    load_metadata,
    metadata_json,
    parse_table,
    rolling_average,
    serialize_table,
    synth_generate,
)

CSV = "date,daily_cases,temp\n2020-03-01,10,1.5\n2020-03-02,12,\n2020-03-03,9,2.5\n"


def test_parse_basic():
    t = parse_table(CSV)
    assert len(t) == 3
    assert t.start_date == date(2020, 3, 1)
    assert t.names == ["daily_cases", "temp"]
    assert math.isnan(t.columns["temp"][1])
    assert t.meta("temp").missing_fraction == pytest.approx(1 / 3)


def test_parse_sorts_rows():
    text = "date,x\n2020-03-02,2\n2020-03-01,1\n"
    t = parse_table(text)
    assert t.columns["x"].tolist() == [1.0, 2.0]


def test_duplicate_date_names_the_date():
    with pytest.raises(DuplicateDate, match="2020-03-01"):
        parse_table("date,x\n2020-03-01,1\n2020-03-01,2\n")


def test_gap_names_missing_day():
    with pytest.raises(DateGap, match="2020-03-02"):
        parse_table("date,x\n2020-03-01,1\n2020-03-03,2\n")


def test_bad_number_reports_row_and_column():
    with pytest.raises(ParseError) as exc:
        parse_table("date,x,y\n2020-03-01,1,2\n2020-03-02,1,abc\n")
    assert exc.value.row == 3 and exc.value.column == "y"


@pytest.mark.parametrize("text", ["", "day,x\n2020-03-01,1\n", "date,x,x\n2020-03-01,1,2\n", "date,x\n2020-3-1x,1\n"])
def test_malformed_inputs(text):
    with pytest.raises(ParseError):
        parse_table(text)


def test_header_only_is_empty():
    with pytest.raises(EmptyTable):
        parse_table("date,x\n")


def test_sidecar_units_are_range_checked():
    meta = [{"name": "h", "unit": "%", "role": "driver"}]
    with pytest.raises(InvalidValue, match="out of range"):
        parse_table("date,h\n2020-03-01,101\n", meta=meta)
    with pytest.raises(InvalidValue):
        parse_table("date,c\n2020-03-01,-1\n", meta={"c": {"unit": "count", "role": "target"}})


def test_restriction_encoding():
    assert encode_restrictions(["Normal", "Opening 3", "Opening 2", "Opening 1", "Lockdown"]) == [0, 1, 2, 3, 4]
    with pytest.raises(UnknownStage):
        encode_restrictions(["Curfew"])
    t = parse_table("date,stage\n2020-03-01,Lockdown\n2020-03-02,Normal\n", stage_column="stage")
    assert t.columns["stage"].tolist() == [4.0, 0.0]
    with pytest.raises(ParseError):
        parse_table("date,stage\n2020-03-01,Curfew\n", stage_column="stage")


def test_clean_drops_sparse_and_interpolates():
    n = 10
    sparse = np.full(n, np.nan)
    sparse[:4] = 1.0  # 60% missing
    gappy = np.arange(n, dtype=float)
    gappy[[3, 4]] = np.nan
    t = TimeSeriesTable(date(2020, 3, 1), {"y": np.ones(n), "sparse": sparse, "gappy": gappy})
    out = clean_table(t, 0.5)
    assert "sparse" not in out.columns
    assert dropped_variables(t, out) == ["sparse"]
    np.testing.assert_allclose(out.columns["gappy"], np.arange(n))
    assert out.meta("gappy").missing_fraction == 0.0


def test_clean_refuses_missing_target():
    y = np.array([1.0, np.nan, 3.0])
    t = TimeSeriesTable(date(2020, 3, 1), {"y": y}, (VariableMeta("y", "count", "target"),))
    with pytest.raises(MissingTarget, match="2020-03-02"):
        clean_table(t)


def test_clean_threshold_bounds():
    t = TimeSeriesTable(date(2020, 3, 1), {"y": [1.0]})
    with pytest.raises(InvalidValue):
        clean_table(t, 1.5)


def test_rolling_average_by_hand():
    t = TimeSeriesTable(date(2020, 3, 1), {DAILY_CASES: [7, 0, 0, 0, 0, 0, 0, 14.0]})
    out = rolling_average(t, DAILY_CASES, 7, name=AVG7_CASES)
    got = out.columns[AVG7_CASES]
    assert got[0] == 7.0
    assert got[6] == pytest.approx(1.0)
    assert got[7] == pytest.approx(2.0)
    assert out.meta(AVG7_CASES).role == "derived"


@given(st.lists(st.floats(0, 1e4), min_size=1, max_size=40), st.integers(1, 10))
def test_rolling_average_matches_cumsum(values, width):
    t = TimeSeriesTable(date(2020, 1, 1), {"x": values})
    got = rolling_average(t, "x", width).columns[f"x_avg{width}"]
    c = np.concatenate([[0.0], np.cumsum(values)])
    i = np.arange(len(values))
    lo = np.maximum(i + 1 - width, 0)
    np.testing.assert_allclose(got, (c[i + 1] - c[lo]) / (i + 1 - lo), rtol=1e-9, atol=1e-9)


@given(
    st.lists(st.one_of(st.none(), st.floats(-1e6, 1e6, allow_nan=False)), min_size=1, max_size=30),
    st.dates(date(2000, 1, 1), date(2030, 1, 1)),
)
def test_serialize_parse_round_trip(values, start):
    col = np.array([np.nan if v is None else v for v in values])
    t = TimeSeriesTable(start, {"x": col, "y": np.arange(col.size, dtype=float)})
    assert parse_table(serialize_table(t)) == t


def test_metadata_round_trip(synth):
    back = parse_table(serialize_table(synth), meta=load_metadata(metadata_json(synth)))
    assert back == synth


def test_table_accessors(synth):
    assert synth.end_date == synth.start_date + timedelta(days=len(synth) - 1)
    assert synth.index_of(date(2020, 3, 2)) == 1
    with pytest.raises(IndexError):
        synth.index_of(date(2019, 1, 1))
    with pytest.raises(UnknownVariable):
        synth.column("nope")
    part = synth.slice_days(date(2020, 4, 1), date(2020, 4, 10))
    assert len(part) == 10 and part.start_date == date(2020, 4, 1)
    assert synth.records[0].values[DAILY_CASES] == synth.columns[DAILY_CASES][0]


def test_columns_are_read_only(synth):
    with pytest.raises(ValueError):
        synth.columns[DAILY_CASES][0] = 1.0


def test_synthetic_shape_and_determinism():
    a, b = synth_generate(3), synth_generate(3)
    assert a == b
    assert len(a) == 306 and a.start_date == date(2020, 3, 1) and a.end_date == date(2020, 12, 31)
    assert {DAILY_CASES, AVG7_CASES, "IRH", "avg_temperature"} <= set(a.names)
    assert (a.columns[DAILY_CASES] > 0).all()
    assert synth_generate(4) != a
    with pytest.raises(TooShort):
        synth_generate(0, days=10)


def test_generator_lags_are_documented_constants():
    assert (TEMPERATURE_LAG, IRH_LAG) == (10, 6)
