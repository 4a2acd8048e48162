"""Temporal encoder: location attention over each frame map, threaded
through a stacked LSTM across frame time.

Each frame arrives as an ``locations x depth`` feature map.  A softmax
over the locations, scored against the encoder's previous top-layer
hidden state, mixes the map's rows into one depth-vector, which is the
LSTM input for that timestep.  The output is the matrix of top-layer
hidden states, one row per frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, UsageError
from .tensor import Tensor, matmul, softmax, stack_rows, uniform_init
from .cells import StackedLstm, stacked_step


@dataclass
class TemConfig:
    """Shape parameters of the temporal encoder."""

    locations: int          # rows of each frame map
    depth: int              # columns of each frame map
    hidden: int             # LSTM hidden size
    layers: int = 2

    def __post_init__(self):
        if min(self.locations, self.depth, self.hidden, self.layers) < 1:
            raise UsageError(f"non-positive TemConfig field: {self}")


class Tem:
    """Location-attention weights plus the frame-time LSTM stack."""

    def __init__(self, config: TemConfig, rng: np.random.Generator, biases: bool = True):
        self.config = config
        self.w_loc = Tensor(uniform_init(rng, config.locations, config.hidden),
                            requires_grad=True)
        self.stack = StackedLstm(config.depth, config.hidden, config.layers,
                                 rng, biases=biases)

    def parameters(self):
        out = [("w_loc", self.w_loc, False)]
        for name, t, is_bias in self.stack.parameters():
            out.append((f"stack.{name}", t, is_bias))
        return out


def location_attention(tem: Tem, frame: Tensor, h_prev: Tensor):
    """Mix one frame map's rows by softmax location weights.

    Returns ``(mixed, weights)`` where ``weights`` is the probability
    vector over the frame's locations scored by ``w_loc @ h_prev`` and
    ``mixed`` is the weights-weighted sum of the map's rows.
    """
    cfg = tem.config
    if frame.shape != (cfg.locations, cfg.depth):
        raise DimensionError(
            f"frame shape {frame.shape} != ({cfg.locations}, {cfg.depth})")
    if h_prev.shape != (cfg.hidden,):
        raise DimensionError(f"hidden shape {h_prev.shape} != ({cfg.hidden},)")
    weights = softmax(matmul(tem.w_loc, h_prev))
    mixed = matmul(weights, frame)
    return mixed, weights


def tem_forward(tem: Tem, frames) -> Tensor:
    """Encode a frame sequence into the matrix of top-layer hidden states.

    States start at zero, so the first frame is mixed with uniform
    location weights.  Location attention is conditioned on the top
    layer's previous hidden state.
    """
    if not frames:
        raise UsageError("tem_forward needs at least one frame")
    states = tem.stack.zero_states()
    rows = []
    for frame in frames:
        mixed, _ = location_attention(tem, frame, states[-1].h)
        states = stacked_step(tem.stack.cells, mixed, states)
        rows.append(states[-1].h)
    return stack_rows(rows)
