"""M5-style regression model trees.

Growth picks the (column, threshold) with the largest standard-deviation
reduction. Every node then gets a least-squares linear model; pruning
replaces a subtree by its node model when the penalised error does not get
worse, and smoothing blends a leaf prediction with the models on its path.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidValue, SchemaMismatch, TooShort, WrongLayout
from .windowing import SupervisedDataset, _span_index

FORMAT_VERSION = 1


@dataclass(frozen=True)
class M5Config:
    min_leaf: int = 4
    sd_fraction: float = 0.05
    smoothing: bool = True
    smoothing_k: float = 15.0
    prune: bool = True
    simplify: bool = True
    ridge: float = 1e-8

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class LinearModel:
    columns: tuple[int, ...]
    coefficients: np.ndarray
    intercept: float

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if not self.columns:
            return np.full(x.shape[:-1], self.intercept) if x.ndim > 1 else np.float64(self.intercept)
        return self.intercept + x[..., list(self.columns)] @ self.coefficients

    @property
    def n_params(self) -> int:
        return len(self.columns) + 1

    def to_dict(self) -> dict:
        return {
            "columns": list(self.columns),
            "coefficients": self.coefficients.tolist(),
            "intercept": self.intercept,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearModel":
        return cls(tuple(d["columns"]), np.array(d["coefficients"], dtype=np.float64), float(d["intercept"]))


@dataclass
class Node:
    n: int
    sd: float
    model: LinearModel | None = None
    column: int | None = None
    threshold: float | None = None
    left: "Node | None" = None
    right: "Node | None" = None
    rmse: float = 0.0
    est_error: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def to_dict(self) -> dict:
        d = {
            "n": self.n,
            "sd": self.sd,
            "rmse": self.rmse,
            "est_error": self.est_error,
            "model": self.model.to_dict() if self.model else None,
        }
        if not self.is_leaf:
            d.update(column=self.column, threshold=self.threshold,
                     left=self.left.to_dict(), right=self.right.to_dict())
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Node":
        node = cls(d["n"], d["sd"], LinearModel.from_dict(d["model"]) if d["model"] else None,
                   rmse=d["rmse"], est_error=d["est_error"])
        if "left" in d:
            node.column = d["column"]
            node.threshold = d["threshold"]
            node.left = cls.from_dict(d["left"])
            node.right = cls.from_dict(d["right"])
        return node


@dataclass
class ModelTree:
    root: Node
    column_names: tuple[str, ...]
    config: M5Config = field(default_factory=M5Config)
    importance: dict[str, float] = field(default_factory=dict)
    target_name: str = ""

    @property
    def min_leaf(self) -> int:
        return self.config.min_leaf

    @property
    def smoothed(self) -> bool:
        return self.config.smoothing

    def leaves(self) -> list[Node]:
        out, stack = [], [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                out.append(node)
            else:
                stack.extend([node.right, node.left])
        return out

    def to_json(self) -> str:
        return json.dumps({
            "format_version": FORMAT_VERSION,
            "kind": "m5",
            "target": self.target_name,
            "columns": list(self.column_names),
            "config": self.config.to_dict(),
            "importance": self.importance,
            "root": self.root.to_dict(),
        })

    @classmethod
    def from_json(cls, text: str) -> "ModelTree":
        d = json.loads(text)
        if d.get("format_version") != FORMAT_VERSION or d.get("kind") != "m5":
            raise SchemaMismatch("not an m5 tree document")
        return cls(Node.from_dict(d["root"]), tuple(d["columns"]), M5Config(**d["config"]),
                   d.get("importance", {}), d.get("target", ""))


# -- fitting helpers ----------------------------------------------------------


def _penalty(n: int, v: int) -> float:
    # A model with as many parameters as samples interpolates; never prefer it.
    return (n + v) / (n - v) if n > v else math.inf


def _fit_linear(X: np.ndarray, y: np.ndarray, cols: Sequence[int], ridge: float) -> LinearModel:
    cols = tuple(sorted(cols))
    ym = float(y.mean())
    if not cols:
        return LinearModel((), np.zeros(0), ym)
    A = X[:, list(cols)]
    am = A.mean(axis=0)
    Ac = A - am
    G = Ac.T @ Ac
    b = Ac.T @ (y - ym)
    try:
        if np.linalg.cond(G) > 1e12:
            raise np.linalg.LinAlgError
        coef = np.linalg.solve(G, b)
    except np.linalg.LinAlgError:
        lam = ridge * max(float(np.trace(G)) / len(cols), 1e-300)
        coef = np.linalg.solve(G + lam * np.eye(len(cols)), b)
    return LinearModel(cols, coef, ym - float(am @ coef))


def _model_error(model: LinearModel, X: np.ndarray, y: np.ndarray) -> float:
    pen = _penalty(y.size, model.n_params)
    if math.isinf(pen):
        return pen
    return float(np.abs(y - model.predict(X)).mean()) * pen


def _fit_node_model(X, y, cols, cfg: M5Config) -> tuple[LinearModel, float]:
    """Least-squares fit, then greedy removal of terms while the penalised error does not rise."""
    model = _fit_linear(X, y, cols, cfg.ridge)
    err = _model_error(model, X, y)
    if not cfg.simplify:
        return model, err
    current = list(model.columns)
    while current:
        best = None
        for c in current:
            trial = _fit_linear(X, y, [k for k in current if k != c], cfg.ridge)
            e = _model_error(trial, X, y)
            if e <= err and (best is None or e < best[1]):
                best = (trial, e, c)
        if best is None:
            break
        model, err, dropped = best
        current.remove(dropped)
    return model, err


def _best_split(X: np.ndarray, y: np.ndarray, min_leaf: int):
    """Return (sdr, column, threshold) of the best split, or None."""
    n, p = X.shape
    if n < 2 * min_leaf or p == 0:
        return None
    yc = y - y.mean()
    sd = math.sqrt(float(yc @ yc) / n)
    order = np.argsort(X, axis=0, kind="stable")
    xs = np.take_along_axis(X, order, axis=0)
    ys = yc[order]
    cs = np.cumsum(ys, axis=0)[:-1]
    cs2 = np.cumsum(ys * ys, axis=0)[:-1]
    tot, tot2 = float(ys[:, 0].sum()), float((ys[:, 0] ** 2).sum())
    k = np.arange(1, n, dtype=np.float64)[:, None]
    var_l = np.maximum(cs2 / k - (cs / k) ** 2, 0.0)
    var_r = np.maximum((tot2 - cs2) / (n - k) - ((tot - cs) / (n - k)) ** 2, 0.0)
    sdr = sd - (k / n) * np.sqrt(var_l) - ((n - k) / n) * np.sqrt(var_r)
    valid = (xs[:-1] < xs[1:]) & (k >= min_leaf) & ((n - k) >= min_leaf)
    if not valid.any():
        return None
    sdr = np.where(valid, sdr, -np.inf)
    flat = int(np.argmax(sdr.T.ravel()))  # column-major: ties go to the lower column index
    col, pos = divmod(flat, n - 1)
    best = float(sdr[pos, col])
    if not best > 1e-12 * max(sd, 1e-300):
        return None
    lo, hi = xs[pos, col], xs[pos + 1, col]
    thr = lo + (hi - lo) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return best, col, float(thr)


class _Builder:
    def __init__(self, X: np.ndarray, y: np.ndarray, cfg: M5Config) -> None:
        self.X, self.y, self.cfg = X, y, cfg
        self.root_sd = float(y.std())
        self.importance = np.zeros(X.shape[1])

    def grow(self, idx: np.ndarray) -> Node:
        y = self.y[idx]
        sd = float(y.std())
        node = Node(int(idx.size), sd)
        if idx.size < 2 * self.cfg.min_leaf or sd == 0.0 or sd < self.cfg.sd_fraction * self.root_sd:
            return node
        split = _best_split(self.X[idx], y, self.cfg.min_leaf)
        if split is None:
            return node
        sdr, col, thr = split
        self.importance[col] += sdr * idx.size / self.y.size
        go_left = self.X[idx, col] <= thr
        node.column, node.threshold = col, thr
        node.left = self.grow(idx[go_left])
        node.right = self.grow(idx[~go_left])
        return node

    def fit(self, node: Node, idx: np.ndarray, path_cols: frozenset) -> set:
        """Attach models bottom-up, pruning when allowed; return the attributes referenced."""
        X, y = self.X[idx], self.y[idx]
        if node.is_leaf:
            node.model, node.est_error = _fit_node_model(X, y, path_cols, self.cfg)
            node.rmse = float(np.sqrt(np.mean((y - node.model.predict(X)) ** 2)))
            return set(node.model.columns)
        go_left = X[:, node.column] <= node.threshold
        below = frozenset(path_cols | {node.column})
        used = self.fit(node.left, idx[go_left], below) | self.fit(node.right, idx[~go_left], below)
        used |= _split_columns(node)
        node.model, own = _fit_node_model(X, y, used, self.cfg)
        node.rmse = float(np.sqrt(np.mean((y - node.model.predict(X)) ** 2)))
        subtree = (node.left.n * node.left.est_error + node.right.n * node.right.est_error) / node.n
        # Rounding-level differences count as ties, so exact fits collapse to one leaf.
        if self.cfg.prune and own <= subtree + 1e-12 * max(self.root_sd, 1.0):
            node.left = node.right = None
            node.column = node.threshold = None
            node.est_error = own
            return set(node.model.columns)
        node.est_error = subtree
        return used


def _split_columns(node: Node) -> set:
    if node.is_leaf:
        return set()
    return {node.column} | _split_columns(node.left) | _split_columns(node.right)


def fit_tree(
    X: np.ndarray,
    y: np.ndarray,
    column_names: Sequence[str] | None = None,
    config: M5Config | None = None,
    target_name: str = "",
) -> ModelTree:
    cfg = config or M5Config()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] != y.size:
        raise SchemaMismatch(f"X shape {X.shape} does not match {y.size} targets")
    if cfg.min_leaf < 1:
        raise InvalidValue("min_leaf must be positive")
    if y.size < 2 * cfg.min_leaf:
        raise TooShort(f"{y.size} samples is fewer than 2*min_leaf={2 * cfg.min_leaf}")
    names = tuple(column_names) if column_names is not None else tuple(f"x{j}" for j in range(X.shape[1]))
    b = _Builder(X, y, cfg)
    idx = np.arange(y.size)
    root = b.grow(idx)
    b.fit(root, idx, frozenset())
    imp = {names[j]: float(v) for j, v in enumerate(b.importance) if v > 0}
    return ModelTree(root, names, cfg, imp, target_name)


def m5_train(
    dataset: SupervisedDataset,
    train_span=None,
    min_leaf: int = 4,
    smoothing: bool = True,
    config: M5Config | None = None,
) -> ModelTree:
    if dataset.layout != "flat":
        raise WrongLayout("model trees need a flat dataset")
    if dataset.targets.shape[1] != 1:
        raise InvalidValue("model trees predict a single target")
    ds = dataset if train_span is None else dataset.subset(train_span)
    cfg = config or M5Config(min_leaf=min_leaf, smoothing=smoothing)
    return fit_tree(ds.X, ds.targets[:, 0], ds.variable_names, cfg, ds.target_names[0])


def m5_predict(tree: ModelTree, sample_inputs) -> float | np.ndarray:
    """Predict one flat sample (1-D input) or a batch (2-D input)."""
    x = np.asarray(sample_inputs, dtype=np.float64)
    p = len(tree.column_names)
    if x.shape[-1] != p or x.ndim not in (1, 2):
        raise SchemaMismatch(f"expected {p} input columns, got shape {x.shape}")
    if x.ndim == 2:
        return np.array([_predict_one(tree, row) for row in x])
    return _predict_one(tree, x)


def _predict_one(tree: ModelTree, x: np.ndarray) -> float:
    path = [tree.root]
    node = tree.root
    while not node.is_leaf:
        node = node.left if x[node.column] <= node.threshold else node.right
        path.append(node)
    pred = float(node.model.predict(x))
    if tree.config.smoothing:
        k = tree.config.smoothing_k
        for parent, child in zip(reversed(path[:-1]), reversed(path[1:])):
            q = float(parent.model.predict(x))
            pred = (child.n * pred + k * q) / (child.n + k)
    return pred


def m5_predict_dataset(tree: ModelTree, dataset: SupervisedDataset, span=None) -> np.ndarray:
    if dataset.layout != "flat":
        raise WrongLayout("model trees need a flat dataset")
    ds = dataset if span is None else dataset.subset(span)
    return m5_predict(tree, ds.X).reshape(-1, 1)


def estimated_error(node: Node) -> float:
    """Penalised training error of a (sub)tree: leaf model errors, sample-weighted."""
    if node.is_leaf:
        return node.est_error
    return (node.left.n * estimated_error(node.left) + node.right.n * estimated_error(node.right)) / node.n


def variable_importance(tree: ModelTree) -> list[tuple[str, float]]:
    """Total stdev reduction per base variable (``D-k|name`` columns merged)."""
    agg: dict[str, float] = {}
    for col, v in tree.importance.items():
        base = col.split("|", 1)[-1]
        agg[base] = agg.get(base, 0.0) + v
    return sorted(agg.items(), key=lambda kv: (-kv[1], kv[0]))


# -- text dump ------------------------------------------------------------------

_INDENT = "|   "


def _fmt_threshold(t: float) -> str:
    return f"{t:.6g}"


def m5_describe(tree: ModelTree) -> str:
    """Indented dump: ``col <= threshold :`` per split, ``LMk (n/err%)`` per leaf.

    Left subtree precedes right subtree; ``err`` is the leaf RMSE as a
    percentage of the root standard deviation.
    """
    lines: list[str] = []
    counter = [0]
    root_sd = tree.root.sd

    def walk(node: Node, depth: int) -> None:
        pad = _INDENT * depth
        if node.is_leaf:
            counter[0] += 1
            pct = 100.0 * node.rmse / root_sd if root_sd > 0 else 0.0
            lines.append(f"{pad}LM{counter[0]} ({node.n}/{pct:.3f}%)")
            return
        lines.append(f"{pad}{tree.column_names[node.column]} <= {_fmt_threshold(node.threshold)} :")
        walk(node.left, depth + 1)
        walk(node.right, depth + 1)

    walk(tree.root, 0)
    return "\n".join(lines) + "\n"


def m5_models_text(tree: ModelTree) -> str:
    out = ["LMk (n/err%): n = training samples at the leaf, err = leaf RMSE as % of root stdev", ""]
    for k, leaf in enumerate(tree.leaves(), start=1):
        terms = [f"{c:+.6g} * {tree.column_names[j]}" for j, c in zip(leaf.model.columns, leaf.model.coefficients)]
        out.append(f"LM{k}: {tree.target_name or 'y'} = {leaf.model.intercept:.6g} " + " ".join(terms))
    return "\n".join(out) + "\n"


_SPLIT_RE = re.compile(r"^(?P<col>.+) <= (?P<thr>\S+) :$")
_LEAF_RE = re.compile(r"^LM(?P<k>\d+) \((?P<n>\d+)/(?P<err>\S+)%\)$")


def parse_description(text: str):
    """Parse an m5_describe dump into nested tuples.

    Splits become ``(column, threshold, left, right)``; leaves become
    ``("LM", k, n)``.
    """
    rows = []
    for raw in text.splitlines():
        if not raw.strip():
            continue
        depth = 0
        while raw.startswith(_INDENT):
            raw = raw[len(_INDENT):]
            depth += 1
        rows.append((depth, raw))
    pos = [0]

    def node(expected_depth: int):
        depth, body = rows[pos[0]]
        if depth != expected_depth:
            raise ValueError(f"unexpected indentation at line {pos[0] + 1}")
        pos[0] += 1
        m = _LEAF_RE.match(body)
        if m:
            return ("LM", int(m["k"]), int(m["n"]))
        m = _SPLIT_RE.match(body)
        if not m:
            raise ValueError(f"unrecognised line {body!r}")
        return (m["col"], float(m["thr"]), node(depth + 1), node(depth + 1))

    result = node(0)
    if pos[0] != len(rows):
        raise ValueError("trailing lines after the tree")
    return result


def structure(tree: ModelTree):
    """Nested-tuple form of the tree, comparable with ``parse_description`` output."""
    counter = [0]

    def walk(node: Node):
        if node.is_leaf:
            counter[0] += 1
            return ("LM", counter[0], node.n)
        return (tree.column_names[node.column], node.threshold, walk(node.left), walk(node.right))

    return walk(tree.root)
