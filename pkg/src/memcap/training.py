"""Training: the regularised NLL objective, Adam with gradient clipping,
the epoch loop, and binary checkpoints.

A training pair is ``(frames, tokens)`` with tokens the BOS..EOS id
sequence.  The objective over a batch is the mean per-sample token NLL
sum plus ``lambda_l2`` times the squared L2 norm of the weight matrices
(biases are never regularised).  Logged losses are per-token NLL so
curves are comparable across caption lengths.

Checkpoints ("MCKP1") are self-describing: the 5-byte magic, a uint64
little-endian header length, a UTF-8 JSON header (step counter, config
snapshot, RNG state, and the name/shape directory of every blob), then
the parameter and Adam-moment arrays as float64 little-endian bytes in
directory order.
"""

from __future__ import annotations

import json
import struct
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import FormatError, NumericError, UsageError
from .decoder import DecodeStep
from .model import (
    AblationVariant,
    CaptionModel,
    ModelConfig,
    build_model,
    forward_teacher_forced,
)
from .tensor import Tensor, add, hadamard, index_select, log, scale, tensor_sum

CHECKPOINT_MAGIC = b"MCKP1"


@dataclass
class TrainConfig:
    lr: float = 2e-5
    beta1: float = 0.8
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 16
    lambda_l2: float = 1e-5
    clip_norm: float = 5.0
    epochs: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise UsageError("lr must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise UsageError("betas must lie in [0, 1)")
        if self.batch_size < 1 or self.epochs < 1:
            raise UsageError("batch_size and epochs must be at least 1")
        if self.lambda_l2 < 0:
            raise UsageError("lambda_l2 must be non-negative")
        if self.clip_norm <= 0:
            raise UsageError("clip_norm must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


def nll_loss(dists, gold, params=(), lambda_l2: float = 0.0) -> Tensor:
    """Negative log likelihood of ``gold`` under per-step distributions.

    ``dists`` holds one entry per step: either a probability tensor or a
    DecodeStep (whose log-probabilities are used directly).  Adds
    ``lambda_l2`` times the summed squared entries of ``params``.
    """
    if len(dists) != len(gold):
        raise UsageError(f"{len(dists)} distributions for {len(gold)} gold tokens")
    if not dists:
        raise UsageError("empty caption")
    total = None
    for dist, tok in zip(dists, gold):
        if isinstance(dist, DecodeStep):
            term = scale(index_select(dist.log_probs, tok), -1.0)
        else:
            term = scale(log(index_select(dist, tok)), -1.0)
        total = term if total is None else add(total, term)
    if lambda_l2 > 0.0 and params:
        reg = None
        for p in params:
            sq = tensor_sum(hadamard(p, p))
            reg = sq if reg is None else add(reg, sq)
        total = add(total, scale(reg, lambda_l2))
    return total


def clip_gradients(grads, clip_norm: float):
    """Scale all gradients so the global L2 norm is at most ``clip_norm``.

    Mutates the arrays in place and returns them; direction is preserved.
    """
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))
    if norm > clip_norm:
        factor = clip_norm / norm
        for g in grads:
            g *= factor
    return grads


def adam_step(params, grads, m, v, config: TrainConfig, t: int, names=None):
    """One bias-corrected Adam update, in place, over parallel lists."""
    if t < 1:
        raise UsageError("Adam step counter starts at 1")
    b1, b2 = config.beta1, config.beta2
    bias1 = 1.0 - b1 ** t
    bias2 = 1.0 - b2 ** t
    for i, (p, g) in enumerate(zip(params, grads)):
        if not np.all(np.isfinite(g)):
            name = names[i] if names is not None else f"parameter {i}"
            raise NumericError(f"non-finite gradient in {name}")
        m[i] *= b1
        m[i] += (1.0 - b1) * g
        v[i] *= b2
        v[i] += (1.0 - b2) * (g * g)
        p -= config.lr * (m[i] / bias1) / (np.sqrt(v[i] / bias2) + config.eps)
    return params, m, v


class Adam:
    """Adam state bound to a model's named parameters."""

    def __init__(self, named_params, config: TrainConfig):
        self.names = [name for name, _ in named_params]
        self.tensors = [t for _, t in named_params]
        self.config = config
        self.m = [np.zeros_like(t.data) for t in self.tensors]
        self.v = [np.zeros_like(t.data) for t in self.tensors]
        self.t = 0

    def step(self) -> None:
        self.t += 1
        adam_step([t.data for t in self.tensors],
                  [t.grad for t in self.tensors],
                  self.m, self.v, self.config, self.t, names=self.names)


@dataclass
class EpochLog:
    epoch: int
    train_loss: float       # per-token NLL
    val_loss: float         # per-token NLL on the validation pairs
    wall_seconds: float


@dataclass
class TrainResult:
    log: list
    best_params: dict
    best_val: float
    diverged: bool = False

    @property
    def epochs_run(self) -> int:
        return len(self.log)


class Trainer:
    """Epoch loop over ``(frames, tokens)`` pairs with best-val tracking."""

    def __init__(self, model: CaptionModel, train_pairs, config: TrainConfig,
                 val_pairs=None, extra_config: dict | None = None):
        if not train_pairs:
            raise UsageError("training set is empty")
        self.model = model
        self.train_pairs = list(train_pairs)
        self.val_pairs = list(val_pairs) if val_pairs else None
        self.config = config
        self.extra_config = dict(extra_config or {})
        self.adam = Adam([(n, t) for n, t, _ in model.parameters()], config)
        self.rng = np.random.default_rng(config.seed)
        self.epoch_logs: list = []
        self.best_params: dict | None = None
        self.best_val = float("inf")
        self.diverged = False

    # -- losses --------------------------------------------------------------

    def _pair_nll(self, frames, tokens):
        steps, _ = forward_teacher_forced(self.model, frames, tokens)
        return nll_loss(steps, tokens[1:]), len(tokens) - 1

    def batch_objective(self, batch):
        """(objective tensor, summed NLL value, token count) for a batch."""
        total = None
        nll_value = 0.0
        tokens = 0
        for frames, caption in batch:
            nll, n = self._pair_nll(frames, caption)
            nll_value += float(nll.data)
            tokens += n
            total = nll if total is None else add(total, nll)
        objective = scale(total, 1.0 / len(batch))
        if self.config.lambda_l2 > 0.0:
            reg = None
            for p in self.model.regularized():
                sq = tensor_sum(hadamard(p, p))
                reg = sq if reg is None else add(reg, sq)
            objective = add(objective, scale(reg, self.config.lambda_l2))
        return objective, nll_value, tokens

    def train_step(self, batch) -> float:
        """One optimiser step; returns the batch objective value."""
        return self._optimize(batch)[0]

    def _optimize(self, batch):
        self.model.zero_grad()
        objective, batch_nll, batch_tokens = self.batch_objective(batch)
        value = float(objective.data)
        if not np.isfinite(value):
            raise NumericError("non-finite training loss")
        objective.backward()
        clip_gradients([t.grad for _, t, _ in self.model.parameters()],
                       self.config.clip_norm)
        self.adam.step()
        return value, batch_nll, batch_tokens

    def evaluate(self, pairs) -> float:
        """Mean per-token NLL over ``pairs`` (no regulariser)."""
        nll_value = 0.0
        tokens = 0
        for frames, caption in pairs:
            nll, n = self._pair_nll(frames, caption)
            nll_value += float(nll.data)
            tokens += n
        return nll_value / max(1, tokens)

    # -- epochs ---------------------------------------------------------------

    def run_epoch(self) -> EpochLog:
        started = time.perf_counter()
        order = self.rng.permutation(len(self.train_pairs))
        nll_value = 0.0
        tokens = 0
        bs = self.config.batch_size
        for lo in range(0, len(order), bs):
            batch = [self.train_pairs[i] for i in order[lo:lo + bs]]
            _, batch_nll, batch_tokens = self._optimize(batch)
            nll_value += batch_nll
            tokens += batch_tokens
        train_loss = nll_value / max(1, tokens)
        val_loss = self.evaluate(self.val_pairs) if self.val_pairs else train_loss
        log = EpochLog(epoch=len(self.epoch_logs) + 1, train_loss=train_loss,
                       val_loss=val_loss,
                       wall_seconds=time.perf_counter() - started)
        self.epoch_logs.append(log)
        if val_loss < self.best_val:
            self.best_val = val_loss
            self.best_params = self.model.state_dict()
        return log

    def run(self) -> TrainResult:
        """Train for the configured epochs; divergence keeps the last good
        parameter snapshot instead of raising."""
        try:
            for _ in range(self.config.epochs):
                self.run_epoch()
        except NumericError:
            self.diverged = True
        if self.best_params is None:
            self.best_params = self.model.state_dict()
            self.best_val = float("inf")
        return TrainResult(log=list(self.epoch_logs), best_params=self.best_params,
                           best_val=self.best_val, diverged=self.diverged)

    # -- persistence ----------------------------------------------------------

    def config_snapshot(self) -> dict:
        snap = {
            "model": self.model.config.to_dict(),
            "variant": self.model.variant.value,
            "train": self.config.to_dict(),
        }
        snap.update(self.extra_config)
        return snap

    def save(self, path) -> None:
        save_checkpoint(path,
                        params={n: t.data for n, t, _ in self.model.parameters()},
                        moments_m=dict(zip(self.adam.names, self.adam.m)),
                        moments_v=dict(zip(self.adam.names, self.adam.v)),
                        step=self.adam.t,
                        config=self.config_snapshot(),
                        rng_state=self.rng.bit_generator.state)

    @classmethod
    def resume(cls, path, train_pairs, val_pairs=None) -> "Trainer":
        cp = load_checkpoint(path)
        model = model_from_checkpoint(cp)
        extra = {k: v for k, v in cp.config.items()
                 if k not in ("model", "variant", "train")}
        trainer = cls(model, train_pairs, TrainConfig(**cp.config["train"]),
                      val_pairs=val_pairs, extra_config=extra)
        trainer.adam.m = [cp.moments_m[n].copy() for n in trainer.adam.names]
        trainer.adam.v = [cp.moments_v[n].copy() for n in trainer.adam.names]
        trainer.adam.t = cp.step
        trainer.rng.bit_generator.state = cp.rng_state
        return trainer


def train(model: CaptionModel, train_pairs, config: TrainConfig,
          val_pairs=None, extra_config: dict | None = None) -> TrainResult:
    """Convenience wrapper: build a Trainer and run the full schedule."""
    return Trainer(model, train_pairs, config, val_pairs=val_pairs,
                   extra_config=extra_config).run()


def teacher_forced_accuracy(model: CaptionModel, pairs) -> float:
    """Fraction of gold tokens that are the argmax prediction."""
    hits = 0
    total = 0
    for frames, tokens in pairs:
        steps, _ = forward_teacher_forced(model, frames, tokens)
        for step, gold in zip(steps, tokens[1:]):
            hits += int(np.argmax(step.log_probs.data) == gold)
            total += 1
    return hits / max(1, total)


# ---------------------------------------------------------------------------
# checkpoints


@dataclass
class Checkpoint:
    config: dict
    step: int
    rng_state: dict
    params: dict
    moments_m: dict = field(default_factory=dict)
    moments_v: dict = field(default_factory=dict)


def save_checkpoint(path, params: dict, moments_m: dict, moments_v: dict,
                    step: int, config: dict, rng_state: dict) -> None:
    directory = {
        "params": [{"name": n, "shape": list(a.shape)} for n, a in params.items()],
        "moments": [{"name": n, "shape": list(moments_m[n].shape)} for n in params
                    if n in moments_m],
    }
    header = json.dumps({
        "format": "MCKP1",
        "step": int(step),
        "config": config,
        "rng_state": rng_state,
        **directory,
    }).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for entry in directory["params"]:
            fh.write(np.ascontiguousarray(params[entry["name"]], dtype="<f8").tobytes())
        for entry in directory["moments"]:
            fh.write(np.ascontiguousarray(moments_m[entry["name"]], dtype="<f8").tobytes())
        for entry in directory["moments"]:
            fh.write(np.ascontiguousarray(moments_v[entry["name"]], dtype="<f8").tobytes())


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:5] != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: bad checkpoint magic {raw[:5]!r}")
    if len(raw) < 13:
        raise FormatError(f"{path}: truncated checkpoint header")
    (header_len,) = struct.unpack("<Q", raw[5:13])
    header_end = 13 + header_len
    if len(raw) < header_end:
        raise FormatError(f"{path}: header truncated at byte {len(raw)}")
    header = json.loads(raw[13:header_end].decode("utf-8"))

    offset = header_end

    def take(shape):
        nonlocal offset
        count = int(np.prod(shape)) if shape else 1
        end = offset + 8 * count
        if end > len(raw):
            raise FormatError(f"{path}: blob truncated at byte {offset}")
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
        offset = end
        return arr.reshape(shape).copy()

    params = {e["name"]: take(e["shape"]) for e in header["params"]}
    moments_m = {e["name"]: take(e["shape"]) for e in header["moments"]}
    moments_v = {e["name"]: take(e["shape"]) for e in header["moments"]}
    if offset != len(raw):
        raise FormatError(f"{path}: {len(raw) - offset} trailing bytes")
    return Checkpoint(config=header["config"], step=header["step"],
                      rng_state=header["rng_state"], params=params,
                      moments_m=moments_m, moments_v=moments_v)


def model_from_checkpoint(cp: Checkpoint) -> CaptionModel:
    """Rebuild and load the model a checkpoint describes."""
    model = build_model(ModelConfig.from_dict(cp.config["model"]),
                        AblationVariant(cp.config["variant"]), 0)
    model.load_state(cp.params)
    return model
