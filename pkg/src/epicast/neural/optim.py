"""Bias-corrected Adam."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericOverflow, SchemaMismatch


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: np.ndarray | None = field(default=None, repr=False)
    v: np.ndarray | None = field(default=None, repr=False)
    keys: tuple[str, ...] = ()


def adam_step(
    state: AdamState,
    weights: dict[str, np.ndarray],
    gradients: dict[str, np.ndarray],
    learning_rate: float,
) -> dict[str, np.ndarray]:
    """Advance ``state`` by one step and return the updated weights (inputs untouched).

    Moments are kept as one flat vector over the sorted gradient names, so a
    step costs a handful of vector operations however many tensors there are.
    """
    keys = tuple(sorted(gradients))
    for k in keys:
        if np.shape(gradients[k]) != np.shape(weights[k]):
            raise SchemaMismatch(f"{k}: gradient shape {np.shape(gradients[k])} != weight shape {np.shape(weights[k])}")
    g = np.concatenate([np.ravel(gradients[k]) for k in keys]) if keys else np.zeros(0)
    if not np.all(np.isfinite(g)):
        raise NumericOverflow("non-finite gradient")
    if state.m is None:
        state.m = np.zeros_like(g)
        state.v = np.zeros_like(g)
        state.keys = keys
    elif keys != state.keys or g.shape != state.m.shape:
        raise SchemaMismatch("gradient names changed between steps")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    # In-place updates: these vectors can hold hundreds of thousands of weights.
    state.m *= b1
    state.m += (1.0 - b1) * g
    g *= g
    g *= 1.0 - b2
    state.v *= b2
    state.v += g
    denom = np.divide(state.v, 1.0 - b2**state.t, out=g)
    np.sqrt(denom, out=denom)
    denom += state.eps
    step = state.m / (1.0 - b1**state.t)
    step *= learning_rate
    step /= denom
    out = dict(weights)
    pos = 0
    for k in keys:
        w = weights[k]
        out[k] = w - step[pos : pos + w.size].reshape(w.shape)
        pos += w.size
    return out
