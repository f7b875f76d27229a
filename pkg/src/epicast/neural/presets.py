"""Named architectures.

Sizes follow the published models. The CNN's filter count, kernel width and
dense width were never stated; 32 filters, kernel 3 and a 16-unit dense
layer are assumptions.
"""

from __future__ import annotations

from .network import LayerSpec, conv1d, dense, lstm, maxpool1d, output

CNN_FILTERS = 32
CNN_KERNEL = 3
CNN_DENSE = 16


def stl_lstm() -> list[LayerSpec]:
    return [lstm(64), lstm(64), dense(8, "relu"), output(1)]


def mtl_lstm(horizon: int = 7) -> list[LayerSpec]:
    return [lstm(448), lstm(384), dense(128, "relu"), dense(64, "relu"), output(horizon)]


def cnn(filters: int = CNN_FILTERS, kernel: int = CNN_KERNEL, dense_units: int = CNN_DENSE) -> list[LayerSpec]:
    return [conv1d(filters, kernel, stride=1), maxpool1d(2, stride=1), dense(dense_units, "relu"), output(1)]


ARCHITECTURES = {
    "lstm-stl": stl_lstm,
    "lstm-mtl": mtl_lstm,
    "cnn": cnn,
}
