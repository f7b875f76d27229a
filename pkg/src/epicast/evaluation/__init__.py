from .cv import EvalReport, FoldResult, format_table, run_cv, span_indices
from .folds import Fold, FoldPlan, chronological_folds, reproduction_plan
from .metrics import accuracy, confidence_interval, mae, mape, persistence_forecast, t_test

__all__ = [
    "EvalReport",
    "Fold",
    "FoldPlan",
    "FoldResult",
    "accuracy",
    "chronological_folds",
    "confidence_interval",
    "format_table",
    "mae",
    "mape",
    "persistence_forecast",
    "reproduction_plan",
    "run_cv",
    "span_indices",
    "t_test",
]
