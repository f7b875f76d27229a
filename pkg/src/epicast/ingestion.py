"""Daily tables: parsing, cleaning, derived columns and a synthetic generator."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from datetime import date, timedelta
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
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

ROLES = ("target", "driver", "derived")

RESTRICTION_LEVELS = {
    "Normal": 0,
    "Opening 3": 1,
    "Opening 2": 2,
    "Opening 1": 3,
    "Lockdown": 4,
}

# Identifiers for the variables modelled in the study; the daily count is
# the default target and the remaining names form the default input set.
DAILY_CASES = "daily_cases"
AVG7_CASES = "avg7_cases"
PAPER_VARIABLES = (
    DAILY_CASES,
    AVG7_CASES,
    "Age",
    "Male_percentage",
    "DOY",
    "DOW",
    "avg_temperature",
    "avg_relative_humidity",
    "IRH",
    "avg_wind_speed",
    "max_wind_gust",
    "avg_pressure_station",
    "avg_visibility",
    "avg_health_index",
    "precipitation",
    "Movement_rel_to_baseline",
    "Restrictions",
)
DEFAULT_INPUTS = tuple(v for v in PAPER_VARIABLES if v != DAILY_CASES)


@dataclass(frozen=True)
class VariableMeta:
    name: str
    unit: str = ""
    role: str = "driver"
    missing_fraction: float = 0.0

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "unit": self.unit,
            "role": self.role,
            "missing_fraction": self.missing_fraction,
        }


@dataclass(frozen=True)
class DailyRecord:
    date: date
    values: dict[str, float | None]


@dataclass(frozen=True, eq=False)
class TimeSeriesTable:
    """Consecutive daily rows of named float columns; NaN marks a missing value.

    Columns are stored as read-only float64 arrays keyed by variable name.
    """

    start_date: date
    columns: Mapping[str, np.ndarray]
    variables: tuple[VariableMeta, ...] = field(default=())

    def __post_init__(self) -> None:
        cols = {}
        n = None
        for name, values in self.columns.items():
            arr = np.array(values, dtype=np.float64)
            if arr.ndim != 1:
                raise InvalidValue(f"column {name!r} must be one-dimensional")
            if n is None:
                n = arr.size
            elif arr.size != n:
                raise InvalidValue(f"column {name!r} has {arr.size} values, expected {n}")
            arr.setflags(write=False)
            cols[name] = arr
        if not cols or n == 0:
            raise EmptyTable("table needs at least one variable and one record")
        given = {m.name: m for m in self.variables}
        unknown = set(given) - set(cols)
        if unknown:
            raise UnknownVariable(sorted(unknown)[0])
        metas = []
        for name, arr in cols.items():
            meta = given.get(name, VariableMeta(name))
            if meta.role not in ROLES:
                raise InvalidValue(f"variable {name!r} has unknown role {meta.role!r}")
            _check_range(meta, arr, self.start_date)
            frac = float(np.isnan(arr).sum()) / n
            metas.append(replace(meta, missing_fraction=frac))
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "variables", tuple(metas))

    def __len__(self) -> int:
        return next(iter(self.columns.values())).size

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TimeSeriesTable):
            return NotImplemented
        if self.start_date != other.start_date or self.variables != other.variables:
            return False
        return all(
            np.array_equal(self.columns[k], other.columns[k], equal_nan=True)
            for k in self.columns
        )

    @property
    def names(self) -> list[str]:
        return [m.name for m in self.variables]

    @property
    def end_date(self) -> date:
        return self.start_date + timedelta(days=len(self) - 1)

    @property
    def dates(self) -> list[date]:
        return [self.start_date + timedelta(days=i) for i in range(len(self))]

    @property
    def records(self) -> list[DailyRecord]:
        out = []
        for i, d in enumerate(self.dates):
            vals = {}
            for k, col in self.columns.items():
                v = col[i]
                vals[k] = None if math.isnan(v) else float(v)
            out.append(DailyRecord(d, vals))
        return out

    def meta(self, name: str) -> VariableMeta:
        for m in self.variables:
            if m.name == name:
                return m
        raise UnknownVariable(name)

    def column(self, name: str) -> np.ndarray:
        try:
            return self.columns[name]
        except KeyError:
            raise UnknownVariable(name) from None

    def index_of(self, day: date) -> int:
        i = (day - self.start_date).days
        if not 0 <= i < len(self):
            raise IndexError(f"{day.isoformat()} is outside the table")
        return i

    def with_columns(
        self, new: Mapping[str, np.ndarray], metas: Iterable[VariableMeta] = ()
    ) -> "TimeSeriesTable":
        cols = dict(self.columns)
        cols.update(new)
        by_name = {m.name: m for m in self.variables}
        by_name.update({m.name: m for m in metas})
        return TimeSeriesTable(self.start_date, cols, tuple(by_name[k] for k in cols if k in by_name))

    def select(self, names: Sequence[str]) -> "TimeSeriesTable":
        cols = {n: self.column(n) for n in names}
        return TimeSeriesTable(self.start_date, cols, tuple(self.meta(n) for n in names))

    def slice_days(self, first: date, last: date) -> "TimeSeriesTable":
        i, j = self.index_of(first), self.index_of(last)
        cols = {k: v[i : j + 1] for k, v in self.columns.items()}
        return TimeSeriesTable(first, cols, self.variables)


def _check_range(meta: VariableMeta, arr: np.ndarray, start: date) -> None:
    present = ~np.isnan(arr)
    if meta.unit == "%":
        bad = present & ((arr < 0) | (arr > 100))
    elif meta.unit == "count":
        bad = present & (arr < 0)
    else:
        bad = present & ~np.isfinite(arr)
    if bad.any():
        i = int(np.argmax(bad))
        day = (start + timedelta(days=i)).isoformat()
        raise InvalidValue(f"{meta.name}={arr[i]!r} on {day} is out of range for unit {meta.unit!r}")


def encode_restrictions(stage_names: Iterable[str]) -> list[int]:
    levels = []
    for name in stage_names:
        try:
            levels.append(RESTRICTION_LEVELS[name.strip()])
        except KeyError:
            raise UnknownStage(name) from None
    return levels


def parse_table(
    csv_text: str,
    date_column: str = "date",
    meta: Mapping[str, Mapping] | Sequence[Mapping] | None = None,
    stage_column: str | None = None,
) -> TimeSeriesTable:
    """Parse CSV text into a table sorted by date.

    ``meta`` is the JSON sidecar (a list of variable dicts, or a mapping by
    name) supplying unit and role. ``stage_column`` names a text column of
    restriction stages to be encoded as integer levels.
    """
    reader = csv.reader(io.StringIO(csv_text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ParseError(1, date_column, "empty input") from None
    if date_column not in header:
        raise ParseError(1, date_column, "date column not found in header")
    if len(set(header)) != len(header):
        raise ParseError(1, ",".join(header), "duplicate column names")
    di = header.index(date_column)
    value_names = [h for h in header if h != date_column]

    rows: list[tuple[date, list[float]]] = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(lineno, date_column, f"expected {len(header)} cells, got {len(row)}")
        try:
            day = date.fromisoformat(row[di].strip())
        except ValueError:
            raise ParseError(lineno, date_column, f"bad date {row[di]!r}") from None
        values = []
        for name, cell in zip(header, row):
            if name == date_column:
                continue
            cell = cell.strip()
            if cell == "":
                values.append(math.nan)
            elif name == stage_column:
                try:
                    values.append(float(encode_restrictions([cell])[0]))
                except UnknownStage as exc:
                    raise ParseError(lineno, name, str(exc)) from None
            else:
                try:
                    values.append(float(cell))
                except ValueError:
                    raise ParseError(lineno, name, f"not a number: {cell!r}") from None
        rows.append((day, values))

    if not rows:
        raise EmptyTable("no data rows")
    rows.sort(key=lambda r: r[0])
    for (a, _), (b, _) in zip(rows, rows[1:]):
        if a == b:
            raise DuplicateDate(a)
        if (b - a).days != 1:
            raise DateGap(a + timedelta(days=1))

    data = np.array([v for _, v in rows], dtype=np.float64).reshape(len(rows), len(value_names))
    cols = {name: data[:, j] for j, name in enumerate(value_names)}
    metas = _metas_from_sidecar(meta, value_names)
    return TimeSeriesTable(rows[0][0], cols, metas)


def _metas_from_sidecar(meta, names: Sequence[str]) -> tuple[VariableMeta, ...]:
    if meta is None:
        return ()
    if isinstance(meta, Mapping):
        entries = {k: dict(v, name=k) for k, v in meta.items()}
    else:
        entries = {m["name"]: dict(m) for m in meta}
    out = []
    for n in names:
        if n in entries:
            e = entries[n]
            out.append(VariableMeta(n, unit=e.get("unit", ""), role=e.get("role", "driver")))
    return tuple(out)


def _fmt(v: float) -> str:
    return "" if math.isnan(v) else repr(float(v))


def serialize_table(table: TimeSeriesTable, date_column: str = "date") -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([date_column, *table.names])
    cols = [table.columns[n] for n in table.names]
    for i, d in enumerate(table.dates):
        writer.writerow([d.isoformat(), *(_fmt(c[i]) for c in cols)])
    return buf.getvalue()


def metadata_json(table: TimeSeriesTable) -> str:
    doc = {"format_version": 1, "variables": [m.to_dict() for m in table.variables]}
    return json.dumps(doc, indent=2)


def load_metadata(text: str) -> list[dict]:
    doc = json.loads(text)
    return doc["variables"] if isinstance(doc, dict) else doc


def clean_table(table: TimeSeriesTable, max_missing: float = 0.5) -> TimeSeriesTable:
    """Drop sparse variables, then fill remaining gaps by linear interpolation."""
    if not 0.0 <= max_missing <= 1.0:
        raise InvalidValue(f"max_missing must lie in [0, 1], got {max_missing}")
    dates = table.dates
    for m in table.variables:
        if m.role == "target":
            col = table.columns[m.name]
            gaps = np.flatnonzero(np.isnan(col))
            if gaps.size:
                raise MissingTarget(m.name, dates[gaps[0]])

    idx = np.arange(len(table), dtype=np.float64)
    cols, metas = {}, []
    for m in table.variables:
        col = table.columns[m.name]
        missing = np.isnan(col)
        if m.missing_fraction > max_missing or missing.all():
            continue
        if missing.any():
            col = col.copy()
            col[missing] = np.interp(idx[missing], idx[~missing], col[~missing])
        cols[m.name] = col
        metas.append(m)
    if not cols:
        raise EmptyTable("every variable exceeded the missing-value threshold")
    return TimeSeriesTable(table.start_date, cols, tuple(metas))


def dropped_variables(before: TimeSeriesTable, after: TimeSeriesTable) -> list[str]:
    kept = set(after.names)
    return [n for n in before.names if n not in kept]


def rolling_average(
    table: TimeSeriesTable, variable: str, width: int, name: str | None = None
) -> TimeSeriesTable:
    """Append the trailing ``width``-day mean of ``variable`` (D-(width-1)..D0).

    The first ``width - 1`` days average over the prefix that exists.
    """
    if width < 1:
        raise InvalidValue(f"width must be >= 1, got {width}")
    src = table.column(variable)
    if np.isnan(src).any():
        raise InvalidValue(f"{variable!r} has missing values; clean the table first")
    out = np.array([src[max(i + 1 - width, 0) : i + 1].mean() for i in range(src.size)])
    name = name or f"{variable}_avg{width}"
    meta = VariableMeta(name, unit=table.meta(variable).unit, role="derived")
    return table.with_columns({name: out}, [meta])


# -- synthetic data ---------------------------------------------------------

# Coupling structure of the generator: the daily count responds to outdoor
# temperature 10 days earlier, indoor humidity 6 days earlier, same-day
# mobility and a weekly pattern.
TEMPERATURE_LAG = 10
IRH_LAG = 6
_DOW_EFFECT = np.array([0.20, 0.28, 0.12, 0.0, -0.12, -0.28, -0.20])
_BURN_IN = 30
_TEMP_AR = (0.5, 3.5)
_IRH_AR = (0.45, 5.0)
_DELAY_KERNEL = (0.15, 0.7, 0.15)


def _ar1(rng: np.random.Generator, n: int, phi: float, sigma: float) -> np.ndarray:
    eps = rng.normal(0.0, sigma, n)
    out = np.empty(n)
    out[0] = eps[0] / math.sqrt(1 - phi * phi)
    for i in range(1, n):
        out[i] = phi * out[i - 1] + eps[i]
    return out


def _restriction_schedule(rng: np.random.Generator, n: int) -> np.ndarray:
    levels = np.empty(n)
    level = 0
    i = 0
    while i < n:
        span = int(rng.integers(20, 61))
        levels[i : i + span] = level
        i += span
        step = int(rng.choice([-2, -1, 1, 2]))
        level = int(np.clip(level + step, 0, 4))
    return levels


def synth_generate(
    seed: int,
    days: int = 306,
    noise: float = 0.05,
    start: date = date(2020, 3, 1),
) -> TimeSeriesTable:
    """Generate a daily table whose case counts depend on lagged drivers.

    ``noise`` is the half-width of the multiplicative uniform noise on the
    daily count; ``noise=0`` yields an exactly determined target.
    """
    if days < 60:
        raise TooShort(f"synthetic tables need at least 60 days, got {days}")
    rng = np.random.default_rng(seed)
    n = days + _BURN_IN
    first = start - timedelta(days=_BURN_IN)
    all_dates = [first + timedelta(days=i) for i in range(n)]
    doy = np.array([d.timetuple().tm_yday for d in all_dates], dtype=float)
    dow = np.array([d.isoweekday() for d in all_dates], dtype=float)

    season = -np.cos(2 * math.pi * (doy - 20) / 365.25)
    t_anom = _ar1(rng, n, *_TEMP_AR)
    temperature = 11.0 + 13.0 * season + t_anom
    irh_anom = _ar1(rng, n, *_IRH_AR)
    irh = np.clip(33.0 + 12.0 * season + 0.25 * t_anom + irh_anom, 1.0, 99.0)
    restrictions = _restriction_schedule(rng, n)
    mobility = -0.08 * restrictions + _ar1(rng, n, 0.7, 0.025)
    age = 45.0 + 8.0 * np.cos(2 * math.pi * doy / 365.25) + _ar1(rng, n, 0.8, 0.8)
    male = np.clip(48.0 + _ar1(rng, n, 0.6, 1.5), 0.0, 100.0)

    def lagged(x: np.ndarray, lag: int) -> np.ndarray:
        return x[_BURN_IN - lag : n - lag]

    def spread(x: np.ndarray, lag: int) -> np.ndarray:
        # Reporting delays smear a driver's effect over neighbouring days.
        half = len(_DELAY_KERNEL) // 2
        return sum(w * lagged(x, lag + k - half) for k, w in enumerate(_DELAY_KERNEL))

    log_rate = (
        math.log(260.0)
        - 0.40 * (spread(temperature, TEMPERATURE_LAG) - 11.0) / 8.0
        - 0.30 * (spread(irh, IRH_LAG) - 33.0) / 8.0
        + 1.5 * lagged(mobility, 0)
        + _DOW_EFFECT[(lagged(dow, 0) - 1).astype(int)]
    )
    shock = rng.uniform(-1.0, 1.0, days)
    cases = np.round(np.exp(log_rate) * (1.0 + noise * shock))

    cols = {
        DAILY_CASES: cases,
        "Age": lagged(age, 0),
        "Male_percentage": lagged(male, 0),
        "DOY": lagged(doy, 0),
        "DOW": lagged(dow, 0),
        "avg_temperature": lagged(temperature, 0),
        "IRH": lagged(irh, 0),
        "Movement_rel_to_baseline": lagged(mobility, 0),
        "Restrictions": lagged(restrictions, 0),
    }
    metas = (
        VariableMeta(DAILY_CASES, "count", "target"),
        VariableMeta("Age", "years"),
        VariableMeta("Male_percentage", "%"),
        VariableMeta("DOY", "day"),
        VariableMeta("DOW", "day"),
        VariableMeta("avg_temperature", "degC"),
        VariableMeta("IRH", "%"),
        VariableMeta("Movement_rel_to_baseline", "relative change"),
        VariableMeta("Restrictions", "level"),
    )
    table = TimeSeriesTable(start, cols, metas)
    return rolling_average(table, DAILY_CASES, 7, name=AVG7_CASES)
