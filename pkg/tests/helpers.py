"""Small fixtures shared by several test modules."""

from datetime import date

import numpy as np

from epicast.ingestion import TimeSeriesTable, VariableMeta
from epicast.neural import NeuralForecaster, conv1d, dense, gradients, loss, lstm, maxpool1d, output


def make_table(n=40, start=date(2020, 3, 1), seed=0, target="y", drivers=("a", "b")) -> TimeSeriesTable:
    """Small strictly positive table for fast model tests."""
    rng = np.random.default_rng(seed)
    cols = {target: 50 + 10 * np.sin(np.arange(n) / 3) + rng.uniform(0, 5, n)}
    for d in drivers:
        cols[d] = rng.normal(size=n)
    metas = (VariableMeta(target, "count", "target"),)
    return TimeSeriesTable(start, cols, metas)


def finite_difference_error(net, x, y, h=1e-5) -> float:
    """Largest per-tensor relative error between analytic and central-difference gradients."""
    analytic = gradients(net, x, y)
    worst = 0.0
    for name, p in net.params.items():
        numeric = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            up = loss(net, x, y)
            p[idx] = old - h
            down = loss(net, x, y)
            p[idx] = old
            numeric[idx] = (up - down) / (2 * h)
        a = analytic[name]
        denom = np.linalg.norm(a) + np.linalg.norm(numeric)
        if denom > 0:
            worst = max(worst, float(np.linalg.norm(a - numeric) / denom))
    return worst


def random_net(specs, window, n_vars, seed):
    """A network with N(0, 0.5) weights and a target far from its output (no MAE kink)."""
    rng = np.random.default_rng(seed)
    net = NeuralForecaster.build(specs, window, n_vars, seed=seed)
    for k in net.params:
        net.params[k] = rng.normal(0, 0.5, net.params[k].shape)
    x = rng.normal(size=(window, n_vars))
    y = rng.choice([-1.0, 1.0], net.horizon) * 50.0
    return net, x, y


GRADIENT_STACKS = {
    "dense": lambda rng: [dense(int(rng.integers(2, 5))), output(int(rng.integers(1, 3)))],
    "conv1d+maxpool": lambda rng: [conv1d(int(rng.integers(2, 4)), int(rng.integers(1, 3))), maxpool1d(2, 1), dense(3), output(1)],
    "lstm": lambda rng: [lstm(int(rng.integers(2, 4))), lstm(2), dense(3), output(2)],
}


def perturb_after(table: TimeSeriesTable, first: date, seed=0) -> TimeSeriesTable:
    """Copy of ``table`` with every value from ``first`` onward scaled by a random positive factor."""
    rng = np.random.default_rng(seed)
    i = table.index_of(first)
    cols = {}
    for name, col in table.columns.items():
        c = col.copy()
        c[i:] *= rng.uniform(1.5, 3.0, c.size - i)
        cols[name] = c
    return TimeSeriesTable(table.start_date, cols, table.variables)


def leakage_free(kind: str, seed: int = 0, perturb: str = "test") -> bool:
    """Fit one fold twice, the second time with every value from the ``perturb`` span on changed."""
    from epicast.evaluation import chronological_folds, span_indices
    from epicast.forecasters import ModelSpec, fit_model
    from epicast.neural import TrainConfig
    from epicast.windowing import build_windows

    table = make_table(70, drivers=("a", "b"))
    plan = chronological_folds(table.start_date, table.end_date, k=1, test_span=10, val_span=10, min_train=20)
    fold = plan.folds[0]
    horizon = 7 if kind == "lstm-mtl" else 1
    spec = ModelSpec(kind, ("a", "b", "y"), "y", window=5, horizon=horizon,
                     target_mode="relative" if kind != "persistence" else "level",
                     train=TrainConfig(learning_rate=1e-3, epochs=2, patience=2, scale_targets=True))
    docs = []
    for t in (table, perturb_after(table, (fold.test if perturb == "test" else fold.validation)[0], seed)):
        ds = build_windows(t, spec.inputs, [spec.target], spec.window, spec.horizon)
        fitted = fit_model(spec, ds, span_indices(ds, fold.train), span_indices(ds, fold.validation), seed)
        docs.append(fitted.to_json())
    return docs[0] == docs[1]
