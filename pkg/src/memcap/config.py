"""Run configuration: a flat ``key = value`` file merged with overrides.

Config files are UTF-8 text, one ``key = value`` per line, ``#`` starts
a comment.  Unknown keys are rejected.  A handful of presets ship with
the package (``msvd-best``, ``charades-best``, ``tiny``, ``ablation``)
and are found by name when the given path does not exist on disk.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, asdict
from importlib import resources
from pathlib import Path

from .errors import UsageError
from .data import SyntheticSpec
from .model import AblationVariant, ModelConfig
from .training import TrainConfig


@dataclass
class RunConfig:
    # model dimensions
    locations: int = 6
    depth: int = 10
    hidden: int = 32
    memory: int = 24
    embed: int = 12
    layers: int = 2
    biases: bool = True
    variant: str = "iam_tem"

    # optimisation
    lr: float = 2e-5
    beta1: float = 0.8
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 16
    lambda_l2: float = 1e-5
    clip_norm: float = 5.0
    epochs: int = 10
    seed: int = 0

    # data: either a synthetic set or manifest files
    synthetic: bool = False
    synthetic_count: int = 64
    synthetic_grid: int = 5
    synthetic_frames_per_event: int = 3
    synthetic_events_min: int = 2
    synthetic_events_max: int = 2
    synthetic_noise_frames: int = 0
    synthetic_seed: int = 0
    train_manifest: str = ""
    val_manifest: str = ""
    val_fraction: float = 0.0    # carve validation out of training data
    eval_fraction: float = 0.2   # held-out share for the ablation harness
    frames: int = 0              # uniform-stride sample count; 0 keeps all

    # generation
    beam: int = 0                # 0 = greedy
    max_len: int = 30

    def model_config(self, vocab_size: int) -> ModelConfig:
        return ModelConfig(locations=self.locations, depth=self.depth,
                           hidden=self.hidden, memory=self.memory,
                           embed=self.embed, vocab_size=vocab_size,
                           layers=self.layers, biases=self.biases)

    def train_config(self, seed: int | None = None) -> TrainConfig:
        return TrainConfig(lr=self.lr, beta1=self.beta1, beta2=self.beta2,
                           eps=self.eps, batch_size=self.batch_size,
                           lambda_l2=self.lambda_l2, clip_norm=self.clip_norm,
                           epochs=self.epochs,
                           seed=self.seed if seed is None else seed)

    def synthetic_spec(self) -> SyntheticSpec:
        return SyntheticSpec(grid=self.synthetic_grid,
                             locations=self.locations, depth=self.depth,
                             frames_per_event=self.synthetic_frames_per_event,
                             events_min=self.synthetic_events_min,
                             events_max=self.synthetic_events_max,
                             noise_frames=self.synthetic_noise_frames,
                             seed=self.synthetic_seed)

    def ablation_variant(self) -> AblationVariant:
        try:
            return AblationVariant(self.variant)
        except ValueError:
            names = ", ".join(v.value for v in AblationVariant)
            raise UsageError(f"unknown variant {self.variant!r}; one of {names}")

    def to_dict(self) -> dict:
        return asdict(self)


_FIELDS = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, raw: str):
    kind = _FIELDS[key]
    raw = raw.strip()
    if kind in ("bool", bool):
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"config key {key}: {raw!r} is not a boolean")
    try:
        if kind in ("int", int):
            return int(raw)
        if kind in ("float", float):
            return float(raw)
    except ValueError:
        raise UsageError(f"config key {key}: {raw!r} is not a {kind}")
    return raw


def parse_config_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{source}:{lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _FIELDS:
            raise UsageError(f"{source}:{lineno}: unknown config key {key!r}")
        values[key] = _coerce(key, raw)
    return values


def preset_path(name: str):
    return resources.files("memcap").joinpath("presets", f"{name}.cfg")


def load_run_config(config: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Resolve a RunConfig from a file (or preset name) plus overrides."""
    values: dict = {}
    if config:
        path = Path(config)
        if path.exists():
            values = parse_config_text(path.read_text(encoding="utf-8"), str(path))
        else:
            preset = preset_path(config)
            if not preset.is_file():
                raise UsageError(f"no config file or preset named {config!r}")
            values = parse_config_text(preset.read_text(encoding="utf-8"), config)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _FIELDS:
            raise UsageError(f"unknown config override {key!r}")
        values[key] = value
    return RunConfig(**values)
