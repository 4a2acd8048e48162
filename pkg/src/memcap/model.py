"""Full captioning model: frame encoder, per-word context, decoder.

Five wirings cover the ablation grid:

==============  ======================  ===============================
variant         frame encoder           per-word context
==============  ======================  ===============================
IAM_TEM         temporal encoder        attention + LSTM memory
IAM_NO_TEM      mean-pool linear        attention + LSTM memory
ATT_TEM         temporal encoder        single-step attention, no memory
ATT_NO_TEM      mean-pool linear        single-step attention, no memory
NO_IAM_TEM      temporal encoder        fixed mean of the frame states
==============  ======================  ===============================

The fixed-mean context is uniform attention, so every variant exposes a
probability vector over frames at every word step.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from enum import Enum

import numpy as np

from .errors import UsageError
from .tensor import Tensor, matmul, softmax, stack_rows, tanh, transpose, uniform_init, add
from .decoder import Decoder, decode_step
from .iam import Iam, IamState, attention_update, memory_update
from .tem import Tem, TemConfig, tem_forward


class AblationVariant(Enum):
    ATT_NO_TEM = "att_no_tem"
    ATT_TEM = "att_tem"
    NO_IAM_TEM = "no_iam_tem"
    IAM_NO_TEM = "iam_no_tem"
    IAM_TEM = "iam_tem"

    @property
    def uses_tem(self) -> bool:
        return self in (AblationVariant.ATT_TEM, AblationVariant.NO_IAM_TEM,
                        AblationVariant.IAM_TEM)

    @property
    def uses_memory(self) -> bool:
        return self in (AblationVariant.IAM_NO_TEM, AblationVariant.IAM_TEM)

    @property
    def uses_attention(self) -> bool:
        return self is not AblationVariant.NO_IAM_TEM


@dataclass
class ModelConfig:
    """Dimensions shared by every component."""

    locations: int
    depth: int
    hidden: int        # encoder/decoder hidden size
    memory: int        # memory LSTM size
    embed: int         # word-embedding size
    vocab_size: int
    layers: int = 2
    biases: bool = True

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


class MeanPoolEncoder:
    """Frame encoder without temporal recurrence: mean over locations,
    then one linear map to the hidden size."""

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        self.config = config
        self.w_pool = Tensor(uniform_init(rng, config.depth, config.hidden),
                             requires_grad=True)
        self._mean = Tensor(np.full(config.locations, 1.0 / config.locations))

    def encode(self, frames) -> Tensor:
        if not frames:
            raise UsageError("encoder needs at least one frame")
        rows = [matmul(matmul(self._mean, f), self.w_pool) for f in frames]
        return stack_rows(rows)

    def parameters(self):
        return [("w_pool", self.w_pool, False)]


class SingleStepAttention:
    """Attention over frame states conditioned on the decoder state only;
    the attended mix itself is the context (nothing is remembered)."""

    def __init__(self, hidden: int, rng: np.random.Generator):
        self.hidden = hidden
        self.w_frame = Tensor(uniform_init(rng, hidden, hidden), requires_grad=True)
        self.w_dec = Tensor(uniform_init(rng, hidden, hidden), requires_grad=True)
        self.score = Tensor(uniform_init(rng, hidden), requires_grad=True)

    def step(self, frame_states: Tensor, h_dec_prev: Tensor):
        scores = tanh(add(matmul(frame_states, self.w_frame),
                          matmul(h_dec_prev, self.w_dec)))
        alpha = softmax(matmul(scores, self.score))
        context = matmul(transpose(frame_states), alpha)
        return context, alpha

    def parameters(self):
        return [("w_frame", self.w_frame, False),
                ("w_dec", self.w_dec, False),
                ("score", self.score, False)]


@dataclass
class ModelState:
    """Per-sequence decoding state: memory state (full model only) and
    the decoder stack's per-layer states."""

    attn: IamState | None
    dec_states: list

    @property
    def h_dec(self) -> Tensor:
        return self.dec_states[-1].h


class CaptionModel:
    """One of the five variant wirings, with a shared step interface."""

    def __init__(self, config: ModelConfig, variant: AblationVariant,
                 rng: np.random.Generator):
        self.config = config
        self.variant = variant
        if variant.uses_tem:
            self.encoder = Tem(TemConfig(config.locations, config.depth,
                                         config.hidden, config.layers),
                               rng, biases=config.biases)
        else:
            self.encoder = MeanPoolEncoder(config, rng)

        if variant.uses_memory:
            self.iam = Iam(config.hidden, config.memory, rng, biases=config.biases)
            self.attention = None
            context_dim = config.memory
        elif variant.uses_attention:
            self.iam = None
            self.attention = SingleStepAttention(config.hidden, rng)
            context_dim = config.hidden
        else:
            self.iam = None
            self.attention = None
            context_dim = config.hidden
        self.context_dim = context_dim
        self.decoder = Decoder(config.vocab_size, config.embed, context_dim,
                               config.hidden, config.layers, rng,
                               biases=config.biases)

    # -- forward pieces -----------------------------------------------------

    def encode(self, frames) -> Tensor:
        if isinstance(self.encoder, Tem):
            return tem_forward(self.encoder, frames)
        return self.encoder.encode(frames)

    def initial_state(self) -> ModelState:
        attn = self.iam.initial_state() if self.iam is not None else None
        return ModelState(attn=attn, dec_states=self.decoder.stack.zero_states())

    def step(self, frame_states: Tensor, word_id: int, state: ModelState):
        """One word step: context for this word, then one decoder step.

        Returns ``(decode, alpha, new_state)``; ``alpha`` is the
        probability vector over frames that produced the context.
        """
        if self.iam is not None:
            context, alpha = attention_update(self.iam, frame_states,
                                              state.h_dec, state.attn.h)
            attn = memory_update(self.iam, state.attn, context, alpha=alpha)
            dec = decode_step(self.decoder, word_id, attn.h, state.dec_states)
        elif self.attention is not None:
            context, alpha = self.attention.step(frame_states, state.h_dec)
            attn = None
            dec = decode_step(self.decoder, word_id, context, state.dec_states)
        else:
            n = frame_states.shape[0]
            alpha = Tensor(np.full(n, 1.0 / n))
            context = matmul(alpha, frame_states)
            attn = None
            dec = decode_step(self.decoder, word_id, context, state.dec_states)
        return dec, alpha, ModelState(attn=attn, dec_states=dec.states)

    # -- parameter plumbing -------------------------------------------------

    def parameters(self):
        """(name, tensor, is_bias) triples in a fixed, stable order."""
        out = []
        prefix = "tem" if isinstance(self.encoder, Tem) else "pool"
        for name, t, b in self.encoder.parameters():
            out.append((f"{prefix}.{name}", t, b))
        if self.iam is not None:
            for name, t, b in self.iam.parameters():
                out.append((f"iam.{name}", t, b))
        if self.attention is not None:
            for name, t, b in self.attention.parameters():
                out.append((f"att.{name}", t, b))
        for name, t, b in self.decoder.parameters():
            out.append((f"decoder.{name}", t, b))
        return out

    def named_tensors(self) -> dict:
        return {name: t for name, t, _ in self.parameters()}

    def regularized(self):
        """Weight tensors subject to the L2 penalty (biases excluded)."""
        return [t for _, t, is_bias in self.parameters() if not is_bias]

    def zero_grad(self) -> None:
        for _, t, _ in self.parameters():
            t.zero_grad()

    def state_dict(self) -> dict:
        return {name: t.data.copy() for name, t, _ in self.parameters()}

    def load_state(self, arrays: dict) -> None:
        own = self.named_tensors()
        missing = sorted(set(own) ^ set(arrays))
        if missing:
            raise UsageError(f"parameter names do not match: {missing}")
        for name, t in own.items():
            src = np.asarray(arrays[name], dtype=np.float64)
            if src.shape != t.data.shape:
                raise UsageError(
                    f"{name}: stored shape {src.shape} != model shape {t.data.shape}")
            t.data[...] = src


def build_model(config: ModelConfig, variant: AblationVariant | str,
                seed: int | np.random.Generator) -> CaptionModel:
    """Construct a freshly initialised model for a variant."""
    if isinstance(variant, str):
        variant = AblationVariant(variant)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return CaptionModel(config, variant, rng)


# ---------------------------------------------------------------------------
# sequence-level passes


def forward_teacher_forced(model: CaptionModel, frames, tokens):
    """Run the model over a gold caption, feeding gold previous words.

    ``tokens`` is the full id sequence including the leading BOS and the
    trailing EOS; step ``t`` consumes ``tokens[t]`` and is scored against
    ``tokens[t + 1]``.  Returns the per-step decode records and the
    per-step attention vectors.
    """
    if len(tokens) < 2:
        raise UsageError("caption must contain at least BOS and EOS")
    frame_states = model.encode(frames)
    state = model.initial_state()
    steps, alphas = [], []
    for tok in tokens[:-1]:
        dec, alpha, state = model.step(frame_states, tok, state)
        steps.append(dec)
        alphas.append(alpha)
    return steps, alphas


@dataclass
class Generation:
    """A decoded caption: emitted ids (EOS kept if reached), one
    attention vector and one log-probability per emitted token, and the
    length-normalised total."""

    tokens: list
    alphas: list
    log_probs: list

    @property
    def score(self) -> float:
        return float(sum(self.log_probs)) / max(1, len(self.tokens))


def generate(model: CaptionModel, frames, bos_id: int, eos_id: int,
             mode: str = "greedy", beam_width: int = 1,
             max_len: int = 30) -> Generation:
    """Decode a caption for ``frames``.

    ``mode`` is ``"greedy"`` or ``"beam"``; beam keeps ``beam_width``
    hypotheses ranked by summed log-probability and picks the finalised
    hypothesis with the best per-token score.
    """
    if max_len < 1:
        raise UsageError("max_len must be at least 1")
    if mode == "greedy":
        return _greedy(model, frames, bos_id, eos_id, max_len)
    if mode == "beam":
        if beam_width < 1:
            raise UsageError("beam width must be at least 1")
        return _beam(model, frames, bos_id, eos_id, beam_width, max_len)
    raise UsageError(f"unknown generation mode {mode!r}")


def _greedy(model, frames, bos_id, eos_id, max_len):
    frame_states = model.encode(frames)
    state = model.initial_state()
    tok = bos_id
    tokens, alphas, log_probs = [], [], []
    for _ in range(max_len):
        dec, alpha, state = model.step(frame_states, tok, state)
        tok = int(np.argmax(dec.log_probs.data))
        tokens.append(tok)
        alphas.append(alpha.data.copy())
        log_probs.append(float(dec.log_probs.data[tok]))
        if tok == eos_id:
            break
    return Generation(tokens=tokens, alphas=alphas, log_probs=log_probs)


@dataclass
class _Hypothesis:
    tokens: list
    alphas: list
    log_probs: list
    total: float
    state: ModelState

    @property
    def normalized(self) -> float:
        return self.total / max(1, len(self.tokens))


def _beam(model, frames, bos_id, eos_id, width, max_len):
    frame_states = model.encode(frames)
    live = [_Hypothesis([], [], [], 0.0, model.initial_state())]
    finished = []
    for _ in range(max_len):
        candidates = []
        for hyp in live:
            prev = hyp.tokens[-1] if hyp.tokens else bos_id
            dec, alpha, state = model.step(frame_states, prev, hyp.state)
            lp = dec.log_probs.data
            # each live hypothesis can contribute at most `width` survivors
            top = np.argsort(-lp, kind="stable")[:width]
            for tok in top:
                tok = int(tok)
                candidates.append(_Hypothesis(
                    tokens=hyp.tokens + [tok],
                    alphas=hyp.alphas + [alpha.data.copy()],
                    log_probs=hyp.log_probs + [float(lp[tok])],
                    total=hyp.total + float(lp[tok]),
                    state=state,
                ))
        candidates.sort(key=lambda h: (-h.total, h.tokens))
        live = []
        for hyp in candidates[:width]:
            if hyp.tokens[-1] == eos_id:
                finished.append(hyp)
            else:
                live.append(hyp)
        if not live:
            break
    finished.extend(live)  # out of budget: finalise as-is
    best = max(finished, key=lambda h: h.normalized)
    return Generation(tokens=best.tokens, alphas=best.alphas,
                      log_probs=best.log_probs)
