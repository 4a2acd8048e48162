"""Iterative attention over encoded frames plus an LSTM memory.

At every generated word the attention scores all frame states against
the previous decoder state and the previous memory state, mixes the
frame states into one context vector, and feeds that context through
an LSTM whose hidden state is the memory handed to the decoder.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .tensor import Tensor, add, matmul, softmax, tanh, transpose, uniform_init
from .cells import LstmCell, lstm_step


class Iam:
    """Attention weights (frame / decoder / memory projections plus the
    scoring vector) and the memory LSTM cell."""

    def __init__(self, hidden: int, memory: int, rng: np.random.Generator,
                 biases: bool = True):
        self.hidden = hidden
        self.memory = memory
        self.w_frame = Tensor(uniform_init(rng, hidden, hidden), requires_grad=True)
        self.w_dec = Tensor(uniform_init(rng, hidden, hidden), requires_grad=True)
        self.w_mem = Tensor(uniform_init(rng, memory, hidden), requires_grad=True)
        self.score = Tensor(uniform_init(rng, hidden), requires_grad=True)
        self.memory_cell = LstmCell(hidden, memory, rng, biases=biases)

    def parameters(self):
        out = [("w_frame", self.w_frame, False),
               ("w_dec", self.w_dec, False),
               ("w_mem", self.w_mem, False),
               ("score", self.score, False)]
        for suffix, t, is_bias in self.memory_cell.parameters():
            out.append((f"memory_cell.{suffix}", t, is_bias))
        return out

    def initial_state(self) -> "IamState":
        zero = self.memory_cell.zero_state()
        return IamState(h=zero.h, c=zero.c, alpha=None)


@dataclass
class IamState:
    """Memory hidden/cell vectors and the attention weights that last
    fed them (None before the first update)."""

    h: Tensor
    c: Tensor
    alpha: Tensor | None


def attention_update(iam: Iam, frame_states: Tensor, h_dec_prev: Tensor,
                     h_mem_prev: Tensor):
    """Score frames, normalise, and mix.

    Returns ``(context, alpha)``: ``alpha`` is the probability vector
    over the ``N`` frame states and ``context`` the alpha-weighted mix
    of them.  The decoder and memory projections apply to single
    vectors broadcast across all ``N`` rows.
    """
    _check_dims(iam, frame_states, h_dec_prev, h_mem_prev)
    scores = tanh(add(add(matmul(frame_states, iam.w_frame),
                          matmul(h_dec_prev, iam.w_dec)),
                      matmul(h_mem_prev, iam.w_mem)))
    alpha = softmax(matmul(scores, iam.score))
    context = matmul(transpose(frame_states), alpha)
    return context, alpha


def memory_update(iam: Iam, state: IamState, context: Tensor,
                  alpha: Tensor | None = None) -> IamState:
    """One LSTM step of the memory cell on the attended context.

    The returned state carries ``alpha``, the attention weights that
    produced ``context`` (kept for inspection and dumps).
    """
    if context.shape != (iam.hidden,):
        raise DimensionError(f"context shape {context.shape} != ({iam.hidden},)")
    new = lstm_step(iam.memory_cell, context, state)
    return IamState(h=new.h, c=new.c, alpha=alpha if alpha is not None else state.alpha)


def _check_dims(iam, frame_states, h_dec_prev, h_mem_prev):
    if frame_states.ndim != 2 or frame_states.shape[1] != iam.hidden:
        raise DimensionError(
            f"frame states shape {frame_states.shape} != (N, {iam.hidden})")
    if h_dec_prev.shape != (iam.hidden,):
        raise DimensionError(
            f"decoder state shape {h_dec_prev.shape} != ({iam.hidden},)")
    if h_mem_prev.shape != (iam.memory,):
        raise DimensionError(
            f"memory state shape {h_mem_prev.shape} != ({iam.memory},)")
