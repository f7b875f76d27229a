"""Layer stacks, weight containers and exact gradients for the forecasters."""

from __future__ import annotations

import base64
import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ..errors import InvalidValue, NumericOverflow, SchemaMismatch
from . import layers as L

KINDS = ("conv1d", "maxpool1d", "lstm", "dense", "output")
FORMAT_VERSION = 1
INIT_SCALE = 0.05
INIT_SCHEMES = ("uniform", "glorot")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    units: int = 0
    kernel: int = 0
    stride: int = 1
    activation: str = "linear"

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise InvalidValue(f"unknown layer kind {self.kind!r}")
        if self.kind in ("conv1d", "maxpool1d") and (self.stride < 1 or self.kernel < 1):
            raise InvalidValue(f"{self.kind} needs kernel >= 1 and stride >= 1")
        if self.kind == "output" and self.activation != "linear":
            raise InvalidValue("the output layer is linear")
        if self.kind in ("conv1d", "lstm", "dense", "output") and self.units < 1:
            raise InvalidValue(f"{self.kind} needs units >= 1")


def conv1d(filters: int, kernel: int, stride: int = 1) -> LayerSpec:
    return LayerSpec("conv1d", units=filters, kernel=kernel, stride=stride, activation="relu")


def maxpool1d(width: int, stride: int = 1) -> LayerSpec:
    return LayerSpec("maxpool1d", kernel=width, stride=stride)


def lstm(units: int) -> LayerSpec:
    return LayerSpec("lstm", units=units, activation="lstm-gates")


def dense(units: int, activation: str = "relu") -> LayerSpec:
    return LayerSpec("dense", units=units, activation=activation)


def output(units: int) -> LayerSpec:
    return LayerSpec("output", units=units)


def _param_shapes(specs: Sequence[LayerSpec], window: int, n_vars: int) -> list[dict[str, tuple]]:
    """Walk the stack checking that dimensions chain; return per-layer weight shapes."""
    if not specs or specs[-1].kind != "output":
        raise InvalidValue("a network must end with an output layer")
    shapes = []
    seq: tuple[int, int] | None = (window, n_vars)  # (time, channels) while sequence-shaped
    flat = 0
    for i, s in enumerate(specs):
        if s.kind == "conv1d":
            if seq is None:
                raise InvalidValue(f"layer {i}: conv1d needs a sequence input")
            t, c = seq
            t2 = (t - s.kernel) // s.stride + 1
            if t2 < 1:
                raise InvalidValue(f"layer {i}: kernel {s.kernel} longer than sequence {t}")
            shapes.append({"W": (s.kernel, c, s.units), "b": (s.units,)})
            seq = (t2, s.units)
        elif s.kind == "maxpool1d":
            if seq is None:
                raise InvalidValue(f"layer {i}: maxpool1d needs a sequence input")
            t, c = seq
            t2 = (t - s.kernel) // s.stride + 1
            if t2 < 1:
                raise InvalidValue(f"layer {i}: pool width {s.kernel} longer than sequence {t}")
            shapes.append({})
            seq = (t2, c)
        elif s.kind == "lstm":
            if seq is None:
                raise InvalidValue(f"layer {i}: lstm needs a sequence input")
            c = seq[1]
            u = s.units
            shapes.append({"Wx": (c, 4 * u), "Wh": (u, 4 * u), "b": (4 * u,)})
            nxt = specs[i + 1].kind if i + 1 < len(specs) else None
            if nxt == "lstm":
                seq = (seq[0], u)
            else:
                seq, flat = None, u
        else:
            if seq is not None:
                flat = seq[0] * seq[1]
                seq = None
            shapes.append({"W": (flat, s.units), "b": (s.units,)})
            flat = s.units
    return shapes


@dataclass
class NeuralForecaster:
    """A layer stack with its weights.

    Forecasts are ``target_shift + target_scale * z`` where ``z`` is the raw
    network output; the default (0, 1) leaves outputs in target units.
    """

    specs: tuple[LayerSpec, ...]
    window: int
    n_vars: int
    params: dict[str, np.ndarray] = field(default_factory=dict)
    target_shift: float = 0.0
    target_scale: float = 1.0

    def __post_init__(self) -> None:
        self.specs = tuple(self.specs)
        self._shapes = _param_shapes(self.specs, self.window, self.n_vars)
        if not self.params:
            self.params = {
                f"{i}.{k}": np.zeros(shape) for i, layer in enumerate(self._shapes) for k, shape in layer.items()
            }
        expected = {f"{i}.{k}": shape for i, layer in enumerate(self._shapes) for k, shape in layer.items()}
        if set(expected) != set(self.params):
            raise SchemaMismatch("parameter names do not match the layer stack")
        for name, shape in expected.items():
            if self.params[name].shape != shape:
                raise SchemaMismatch(f"{name}: shape {self.params[name].shape} != {shape}")

    @classmethod
    def build(
        cls, specs: Sequence[LayerSpec], window: int, n_vars: int, seed: int | None = 0, init: str = "uniform"
    ) -> "NeuralForecaster":
        net = cls(tuple(specs), window, n_vars)
        if seed is not None:
            net.init_weights(seed, init)
        return net

    @property
    def horizon(self) -> int:
        return self.specs[-1].units

    @property
    def n_weights(self) -> int:
        return sum(p.size for p in self.params.values())

    def init_weights(self, seed: int, scheme: str = "uniform") -> None:
        """Draw fresh weights from ``seed``.

        ``uniform`` draws every parameter from U(-0.05, 0.05). ``glorot``
        draws kernels from U(-a, a) with a = sqrt(6 / (fan_in + fan_out)),
        zeroes biases and sets LSTM forget-gate biases to 1.
        """
        if scheme not in INIT_SCHEMES:
            raise InvalidValue(f"unknown init scheme {scheme!r}; choose from {', '.join(INIT_SCHEMES)}")
        rng = np.random.default_rng(seed)
        for name in sorted(self.params, key=_param_order):
            shape = self.params[name].shape
            if scheme == "uniform":
                self.params[name] = rng.uniform(-INIT_SCALE, INIT_SCALE, shape)
                continue
            layer, kind = _param_order(name)
            if kind == "b":
                b = np.zeros(shape)
                if self.specs[layer].kind == "lstm":
                    u = shape[0] // 4
                    b[u : 2 * u] = 1.0
                self.params[name] = b
            else:
                fan_in = int(np.prod(shape[:-1]))
                fan_out = shape[-1] // 4 if kind in ("Wx", "Wh") else shape[-1]
                limit = np.sqrt(6.0 / (fan_in + fan_out))
                self.params[name] = rng.uniform(-limit, limit, shape)

    def copy_params(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.params.items()}

    def layer_params(self, i: int) -> dict[str, np.ndarray]:
        return {k: self.params[f"{i}.{k}"] for k in self._shapes[i]}

    # -- serialization ---------------------------------------------------------

    def to_dict(self) -> dict:
        weights = {}
        for name in sorted(self.params, key=_param_order):
            arr = self.params[name]
            weights[name] = {
                "shape": list(arr.shape),
                "dtype": "<f8",
                "data": base64.b64encode(np.ascontiguousarray(arr, dtype="<f8").tobytes()).decode("ascii"),
            }
        return {
            "format_version": FORMAT_VERSION,
            "kind": "neural",
            "window": self.window,
            "n_vars": self.n_vars,
            "layers": [asdict(s) for s in self.specs],
            "target_shift": self.target_shift,
            "target_scale": self.target_scale,
            "weights": weights,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NeuralForecaster":
        if d.get("format_version") != FORMAT_VERSION or d.get("kind") != "neural":
            raise SchemaMismatch("not a neural weight document")
        params = {}
        for name, w in d["weights"].items():
            if w.get("dtype") != "<f8":
                raise SchemaMismatch(f"{name}: unsupported dtype {w.get('dtype')!r}")
            raw = base64.b64decode(w["data"])
            params[name] = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(w["shape"])
        return cls(tuple(LayerSpec(**s) for s in d["layers"]), d["window"], d["n_vars"], params,
                   d["target_shift"], d["target_scale"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "NeuralForecaster":
        return cls.from_dict(json.loads(text))


def _param_order(name: str):
    i, k = name.split(".", 1)
    return int(i), k


def _as_batch(net: NeuralForecaster, x) -> tuple[np.ndarray, bool]:
    """Return inputs as (B, W, V) and whether a single sample was given."""
    x = np.asarray(x, dtype=np.float64)
    w, v = net.window, net.n_vars
    if x.ndim == 1 and x.size == w * v:
        return x.reshape(1, w, v), True
    if x.ndim == 2 and x.shape == (w, v):
        return x[None], True
    if x.ndim == 2 and x.shape[1] == w * v:
        return x.reshape(-1, w, v), False
    if x.ndim == 3 and x.shape[1:] == (w, v):
        return x, False
    raise SchemaMismatch(f"expected inputs of shape ({w}, {v}) per sample, got {x.shape}")


def forward(net: NeuralForecaster, x) -> tuple[np.ndarray, list]:
    """Raw network output ``z`` for one sample (W, V) or a batch (B, W, V).

    Flat rows of length W*V are accepted and unflattened day-major.
    """
    batch, single = _as_batch(net, x)
    h = batch
    caches = []
    for i, s in enumerate(net.specs):
        p = net.layer_params(i)
        if s.kind == "conv1d":
            h, c = L.conv1d_forward(h, p["W"], p["b"], s.stride, s.activation)
        elif s.kind == "maxpool1d":
            h, c = L.maxpool1d_forward(h, s.kernel, s.stride)
        elif s.kind == "lstm":
            ret_seq = i + 1 < len(net.specs) and net.specs[i + 1].kind == "lstm"
            h, c = L.lstm_forward(h, p["Wx"], p["Wh"], p["b"], ret_seq)
        else:
            shape = h.shape
            if h.ndim == 3:
                h = h.reshape(shape[0], -1)
            h, c = L.dense_forward(h, p["W"], p["b"], s.activation)
            c = (shape, c)
        caches.append(c)
    if not np.all(np.isfinite(h)):
        raise NumericOverflow("non-finite network output")
    return (h[0] if single else h), caches


def forecast(net: NeuralForecaster, x) -> np.ndarray:
    z, _ = forward(net, x)
    return net.target_shift + net.target_scale * z


def loss(net: NeuralForecaster, x, target) -> float:
    """MAE between the raw output and the target mapped into output units."""
    z, _ = forward(net, x)
    t = (np.asarray(target, dtype=np.float64) - net.target_shift) / net.target_scale
    return float(np.mean(np.abs(z - t.reshape(z.shape))))


def backward(net: NeuralForecaster, caches: list, z: np.ndarray, target) -> dict[str, np.ndarray]:
    """Exact gradients of ``loss`` w.r.t. every weight, from a forward pass's caches.

    The MAE subgradient at a zero residual is taken as 0.
    """
    z2 = np.atleast_2d(z)
    t = (np.asarray(target, dtype=np.float64) - net.target_shift) / net.target_scale
    resid = z2 - t.reshape(z2.shape)
    d = np.sign(resid) / resid.size
    grads: dict[str, np.ndarray] = {}
    for i in range(len(net.specs) - 1, -1, -1):
        s = net.specs[i]
        p = net.layer_params(i)
        c = caches[i]
        if s.kind == "conv1d":
            d, g = L.conv1d_backward(d, c, p["W"])
        elif s.kind == "maxpool1d":
            d, g = L.maxpool1d_backward(d, c), {}
        elif s.kind == "lstm":
            d, g = L.lstm_backward(d, c, p["Wx"], p["Wh"])
        else:
            shape, c = c
            d, g = L.dense_backward(d, c, p["W"])
            d = d.reshape(shape)
        for k, v in g.items():
            grads[f"{i}.{k}"] = v
    for k, v in grads.items():
        if not np.all(np.isfinite(v)):
            raise NumericOverflow(f"non-finite gradient for {k}")
    return grads


def gradients(net: NeuralForecaster, x, target) -> dict[str, np.ndarray]:
    z, caches = forward(net, x)
    return backward(net, caches, z, target)
