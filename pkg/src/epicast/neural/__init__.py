from .network import (
    LayerSpec,
    NeuralForecaster,
    backward,
    conv1d,
    dense,
    forecast,
    forward,
    gradients,
    loss,
    lstm,
    maxpool1d,
    output,
)
from .optim import AdamState, adam_step
from .presets import ARCHITECTURES, cnn, mtl_lstm, stl_lstm
from .training import TrainConfig, TrainHistory, predict, train

__all__ = [
    "AdamState",
    "ARCHITECTURES",
    "LayerSpec",
    "NeuralForecaster",
    "TrainConfig",
    "TrainHistory",
    "adam_step",
    "backward",
    "cnn",
    "conv1d",
    "dense",
    "forecast",
    "forward",
    "gradients",
    "loss",
    "lstm",
    "maxpool1d",
    "mtl_lstm",
    "output",
    "predict",
    "stl_lstm",
    "train",
]
