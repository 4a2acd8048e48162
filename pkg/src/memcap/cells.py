"""LSTM cell and stacked-cell wrapper.

A single step computes sigmoid input/forget/output gates and a tanh
candidate from the current input and the previous hidden state, then

    c' = forget * c + input * candidate
    h' = output * tanh(c')

Biases are optional: the default keeps them (forget bias initialised
to 1, the rest to 0); ``biases=False`` gives the bias-free form of the
gate equations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, UsageError
from .tensor import Tensor, add, affine, hadamard, sigmoid, tanh, uniform_init


@dataclass
class CellState:
    """Hidden and cell vectors of one LSTM layer at one timestep."""

    h: Tensor
    c: Tensor


class LstmCell:
    """One LSTM layer: eight weight matrices and optionally four biases.

    ``w_x*`` map the input (input_dim x hidden_dim), ``w_h*`` map the
    previous hidden state (hidden_dim x hidden_dim).
    """

    GATES = ("i", "f", "o", "g")

    def __init__(self, input_dim: int, hidden_dim: int, rng: np.random.Generator,
                 biases: bool = True):
        if input_dim < 1 or hidden_dim < 1:
            raise UsageError("LstmCell dims must be positive")
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.biases = biases
        for gate in self.GATES:
            setattr(self, f"w_x{gate}",
                    Tensor(uniform_init(rng, input_dim, hidden_dim), requires_grad=True))
            setattr(self, f"w_h{gate}",
                    Tensor(uniform_init(rng, hidden_dim, hidden_dim), requires_grad=True))
        if biases:
            for gate in self.GATES:
                init = np.ones(hidden_dim) if gate == "f" else np.zeros(hidden_dim)
                setattr(self, f"b_{gate}", Tensor(init, requires_grad=True))

    def parameters(self):
        """(suffix, tensor, is_bias) triples in a fixed order."""
        out = []
        for gate in self.GATES:
            out.append((f"w_x{gate}", getattr(self, f"w_x{gate}"), False))
            out.append((f"w_h{gate}", getattr(self, f"w_h{gate}"), False))
        if self.biases:
            for gate in self.GATES:
                out.append((f"b_{gate}", getattr(self, f"b_{gate}"), True))
        return out

    def zero_state(self) -> CellState:
        return CellState(h=Tensor(np.zeros(self.hidden_dim)),
                         c=Tensor(np.zeros(self.hidden_dim)))


def lstm_step(cell: LstmCell, x: Tensor, prev: CellState) -> CellState:
    """One LSTM step; returns the new (h, c)."""
    if x.shape != (cell.input_dim,):
        raise DimensionError(
            f"lstm_step input shape {x.shape} != ({cell.input_dim},)")
    if prev.h.shape != (cell.hidden_dim,):
        raise DimensionError(
            f"lstm_step state shape {prev.h.shape} != ({cell.hidden_dim},)")

    def gate(name):
        return affine(x, getattr(cell, f"w_x{name}"),
                      prev.h, getattr(cell, f"w_h{name}"),
                      getattr(cell, f"b_{name}") if cell.biases else None)

    i = sigmoid(gate("i"))
    f = sigmoid(gate("f"))
    o = sigmoid(gate("o"))
    g = tanh(gate("g"))
    c = add(hadamard(f, prev.c), hadamard(i, g))
    h = hadamard(o, tanh(c))
    return CellState(h=h, c=c)


class StackedLstm:
    """Layered LSTM: each layer's hidden state feeds the next layer."""

    def __init__(self, input_dim: int, hidden_dim: int, layers: int,
                 rng: np.random.Generator, biases: bool = True):
        if layers < 1:
            raise UsageError("stack needs at least one layer")
        self.cells = [LstmCell(input_dim if i == 0 else hidden_dim, hidden_dim,
                               rng, biases=biases)
                      for i in range(layers)]
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim

    def zero_states(self) -> list:
        return [cell.zero_state() for cell in self.cells]

    def parameters(self):
        out = []
        for i, cell in enumerate(self.cells):
            for suffix, tensor, is_bias in cell.parameters():
                out.append((f"layer{i}.{suffix}", tensor, is_bias))
        return out


def stacked_step(cells, x: Tensor, prevs) -> list:
    """Step every layer; returns the new per-layer states (top is last)."""
    if not cells:
        raise UsageError("stacked_step on an empty stack")
    if len(prevs) != len(cells):
        raise UsageError(f"{len(prevs)} states for {len(cells)} layers")
    states = []
    inp = x
    for cell, prev in zip(cells, prevs):
        state = lstm_step(cell, inp, prev)
        states.append(state)
        inp = state.h
    return states
