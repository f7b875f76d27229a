"""Exception hierarchy shared by every epicast module.

Input and configuration problems derive from ``InputError`` (the CLI maps
them to exit code 2); failures while fitting derive from ``TrainingError``
(exit code 3).
"""

from __future__ import annotations


class EpicastError(Exception):
    """Base class for all library errors."""


class InputError(EpicastError, ValueError):
    pass


class TrainingError(EpicastError, RuntimeError):
    pass


class ParseError(InputError):
    def __init__(self, row: int, column: str, message: str = "") -> None:
        self.row = row
        self.column = column
        detail = f": {message}" if message else ""
        super().__init__(f"row {row}, column {column!r}{detail}")


class DuplicateDate(InputError):
    def __init__(self, date) -> None:
        self.date = date
        super().__init__(f"duplicate date {date.isoformat()}")


class DateGap(InputError):
    def __init__(self, missing) -> None:
        self.missing = missing
        super().__init__(f"gap in dates: {missing.isoformat()} is missing")


class InvalidValue(InputError):
    pass


class MissingTarget(InputError):
    def __init__(self, variable: str, date) -> None:
        self.variable = variable
        self.date = date
        super().__init__(f"target {variable!r} is missing on {date.isoformat()}")


class EmptyTable(InputError):
    pass


class UnknownVariable(InputError, KeyError):
    def __init__(self, name: str) -> None:
        self.name = name
        super().__init__(f"unknown variable {name!r}")

    def __str__(self) -> str:
        return self.args[0]


class UnknownStage(InputError):
    def __init__(self, name: str) -> None:
        self.name = name
        super().__init__(f"unknown restriction stage {name!r}")


class TooShort(InputError):
    pass


class ZeroVariance(InputError):
    def __init__(self, name: str = "series") -> None:
        self.name = name
        super().__init__(f"{name} has zero variance")


class LengthMismatch(InputError):
    pass


class EmptyInput(InputError):
    pass


class InsufficientOverlap(InputError):
    pass


class SchemaMismatch(InputError):
    pass


class WrongLayout(InputError):
    pass


class SpanOverlap(InputError):
    pass


class ZeroTarget(InputError):
    def __init__(self, index: int) -> None:
        self.index = index
        super().__init__(f"actual value at index {index} is zero; MAPE undefined")


class TooFewSamples(InputError):
    pass


class NumericOverflow(TrainingError, ArithmeticError):
    pass
