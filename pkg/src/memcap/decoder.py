"""Word decoder: embedding lookup, stacked LSTM, vocabulary projection.

The per-word input is the previous word's embedding concatenated with
the current memory/context vector; the top hidden state is projected to
vocabulary logits.  The projection has no bias in the bias-free mode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .tensor import Tensor, add, concat, index_select, log_softmax, matmul, softmax, uniform_init
from .cells import StackedLstm, stacked_step


class Decoder:
    def __init__(self, vocab_size: int, embed_dim: int, context_dim: int,
                 hidden: int, layers: int, rng: np.random.Generator,
                 biases: bool = True):
        if vocab_size < 1:
            raise UsageError("decoder needs a non-empty vocabulary")
        self.vocab_size = vocab_size
        self.embed_dim = embed_dim
        self.context_dim = context_dim
        self.embedding = Tensor(uniform_init(rng, vocab_size, embed_dim),
                                requires_grad=True)
        self.stack = StackedLstm(embed_dim + context_dim, hidden, layers,
                                 rng, biases=biases)
        self.w_out = Tensor(uniform_init(rng, hidden, vocab_size), requires_grad=True)
        self.b_out = Tensor(np.zeros(vocab_size), requires_grad=True) if biases else None

    def parameters(self):
        out = [("embedding", self.embedding, False)]
        for name, t, is_bias in self.stack.parameters():
            out.append((f"stack.{name}", t, is_bias))
        out.append(("w_out", self.w_out, False))
        if self.b_out is not None:
            out.append(("b_out", self.b_out, True))
        return out


@dataclass
class DecodeStep:
    """One decoding step: new top hidden state plus the word distribution
    (``probs``) and its logarithm (``log_probs``, same logits)."""

    h: Tensor
    logits: Tensor
    probs: Tensor
    log_probs: Tensor
    states: list


def decode_step(dec: Decoder, word_id: int, context: Tensor, prev_states) -> DecodeStep:
    """Advance the decoder one word.

    ``word_id`` indexes the embedding table, ``context`` is the
    memory/attention vector for this step, ``prev_states`` the per-layer
    LSTM states from the previous step.
    """
    word_id = int(word_id)
    if not 0 <= word_id < dec.vocab_size:
        raise UsageError(f"token id {word_id} outside vocabulary of {dec.vocab_size}")
    embedded = index_select(dec.embedding, word_id)
    states = stacked_step(dec.stack.cells, concat(embedded, context), prev_states)
    h = states[-1].h
    logits = matmul(h, dec.w_out)
    if dec.b_out is not None:
        logits = add(logits, dec.b_out)
    return DecodeStep(h=h, logits=logits, probs=softmax(logits),
                      log_probs=log_softmax(logits), states=states)
