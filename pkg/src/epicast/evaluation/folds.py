"""Growing-window chronological fold plans."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, timedelta

from ..errors import InvalidValue, TooShort

DateRange = tuple[date, date]  # inclusive


def _days(r: DateRange) -> int:
    return (r[1] - r[0]).days + 1


@dataclass(frozen=True)
class Fold:
    index: int  # 1-based
    train: DateRange
    validation: DateRange | None
    test: DateRange

    @property
    def development(self) -> DateRange:
        """Training plus validation range."""
        return self.train[0], (self.validation or self.train)[1]

    def to_dict(self) -> dict:
        iso = lambda r: None if r is None else [r[0].isoformat(), r[1].isoformat()]  # noqa: E731
        return {"fold": self.index, "train": iso(self.train), "validation": iso(self.validation), "test": iso(self.test)}


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple[Fold, ...]
    test_span: int
    val_span: int

    @property
    def k(self) -> int:
        return len(self.folds)

    def check(self) -> None:
        prev_test = None
        for f in self.folds:
            dev_end = f.development[1]
            if not f.train[0] <= f.train[1] < dev_end + timedelta(days=1) <= f.test[0] <= f.test[1]:
                raise InvalidValue(f"fold {f.index} is not strictly chronological")
            if f.validation and f.validation[0] != f.train[1] + timedelta(days=1):
                raise InvalidValue(f"fold {f.index}: validation must follow training directly")
            if prev_test is not None and f.test[0] != prev_test[1] + timedelta(days=1):
                raise InvalidValue(f"fold {f.index}: test windows must be contiguous")
            prev_test = f.test

    def to_dict(self) -> dict:
        return {"k": self.k, "test_span": self.test_span, "val_span": self.val_span,
                "folds": [f.to_dict() for f in self.folds]}


def chronological_folds(
    start: date,
    end: date,
    k: int = 5,
    test_span: int = 14,
    val_span: int = 14,
    anchor: date | None = None,
    min_train: int = 28,
) -> FoldPlan:
    """Plan ``k`` contiguous test windows of ``test_span`` days.

    Without ``anchor`` the last window ends on ``end``. With ``anchor`` the
    first window starts there and every window must end by ``end``. Each
    fold validates on the ``val_span`` days just before its test window and
    trains on everything earlier.
    """
    if k < 1 or test_span < 1 or val_span < 0:
        raise InvalidValue("k and test_span must be >= 1, val_span >= 0")
    if anchor is None:
        anchor = end - timedelta(days=k * test_span - 1)
    last = anchor + timedelta(days=k * test_span - 1)
    if last > end:
        raise TooShort(f"{k} windows of {test_span} days from {anchor} run past {end}")
    folds = []
    for i in range(k):
        t0 = anchor + timedelta(days=i * test_span)
        t1 = t0 + timedelta(days=test_span - 1)
        val = (t0 - timedelta(days=val_span), t0 - timedelta(days=1)) if val_span else None
        train_end = t0 - timedelta(days=val_span + 1)
        if _days((start, train_end)) < min_train:
            raise TooShort(f"fold {i + 1} has fewer than {min_train} training days")
        folds.append(Fold(i + 1, (start, train_end), val, (t0, t1)))
    plan = FoldPlan(tuple(folds), test_span, val_span)
    plan.check()
    return plan


def reproduction_plan() -> FoldPlan:
    """Five two-week folds from 2020-10-15 on data starting 2020-03-01."""
    return chronological_folds(date(2020, 3, 1), date(2020, 12, 24), k=5, test_span=14, val_span=14,
                               anchor=date(2020, 10, 15))
