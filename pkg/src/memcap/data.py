"""Datasets: caption preprocessing, the MVFM1 feature-file format,
frame sampling, and a synthetic temporal-caption generator.

Feature files ("MVFM1") hold one video each: the 5-byte magic, three
little-endian uint32 header words N, L, D, then N*L*D little-endian
float32 values row-major.  Captions travel in a sidecar UTF-8 TSV next
to the feature file (``<stem>.captions.tsv``, lines ``id<TAB>caption``)
and datasets are plain-text manifests listing feature-file paths, one
per line, relative to the manifest.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, UsageError
from .tensor import Tensor

MAGIC = b"MVFM1"
PAD, BOS, EOS, UNK = 0, 1, 2, 3
RESERVED = ("<pad>", "<bos>", "<eos>", "<unk>")

_TOKEN_RE = re.compile(r"[\w']+")


def tokenize(text: str, max_words: int = 30) -> list:
    """Lowercase, split on whitespace/punctuation, clip to ``max_words``."""
    return _TOKEN_RE.findall(text.lower())[:max_words]


class Vocabulary:
    """Bidirectional token <-> id map with fixed reserved control ids."""

    def __init__(self, tokens=()):
        self._tokens = list(RESERVED)
        self._ids = {tok: i for i, tok in enumerate(self._tokens)}
        for tok in tokens:
            self.add(tok)

    @classmethod
    def from_texts(cls, texts, max_words: int = 30) -> "Vocabulary":
        """Vocabulary over every token of ``texts``, alphabetical ids."""
        seen = set()
        for text in texts:
            seen.update(tokenize(text, max_words))
        return cls(sorted(seen))

    def add(self, token: str) -> int:
        if token in self._ids:
            return self._ids[token]
        self._ids[token] = len(self._tokens)
        self._tokens.append(token)
        return self._ids[token]

    def id_of(self, token: str) -> int:
        return self._ids.get(token, UNK)

    def token_of(self, idx: int) -> str:
        return self._tokens[idx]

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    @property
    def tokens(self) -> list:
        return list(self._tokens)

    def decode(self, ids, strip_control: bool = True) -> str:
        words = []
        for i in ids:
            if strip_control and i in (PAD, BOS, EOS):
                continue
            words.append(self.token_of(i))
        return " ".join(words)


def preprocess_caption(text: str, vocab: Vocabulary, max_words: int = 30) -> list:
    """Token ids with BOS/EOS wrapping; unknown words map to UNK."""
    return [BOS] + [vocab.id_of(t) for t in tokenize(text, max_words)] + [EOS]


@dataclass
class VideoSample:
    """One video: frame feature maps plus its tokenized captions."""

    id: str
    frames: list                    # Tensors of shape (L, D)
    captions: list                  # token-id lists incl. BOS/EOS
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.frames:
            raise UsageError(f"sample {self.id!r} has no frames")
        shape = self.frames[0].shape
        for f in self.frames:
            if f.shape != shape or len(shape) != 2:
                raise UsageError(f"sample {self.id!r} has inconsistent frame shapes")
        for cap in self.captions:
            if len(cap) > 32:
                raise UsageError(
                    f"sample {self.id!r} caption of {len(cap)} ids exceeds 32")


# ---------------------------------------------------------------------------
# MVFM1 feature files


def save_features(path, sample: VideoSample) -> None:
    """Write one video's frames as an MVFM1 file (float32 on disk)."""
    path = Path(path)
    frames = np.stack([f.data for f in sample.frames]).astype("<f4")
    n, l, d = frames.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", n, l, d))
        fh.write(frames.tobytes())


def write_caption_sidecar(path, samples, vocab: Vocabulary) -> None:
    """Write ``id<TAB>caption`` lines for every caption of ``samples``."""
    lines = []
    for sample in samples:
        for cap in sample.captions:
            lines.append(f"{sample.id}\t{vocab.decode(cap)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _sidecar_path(feature_path: Path) -> Path:
    return feature_path.with_name(feature_path.stem + ".captions.tsv")


def read_caption_sidecar(path) -> dict:
    """Map video id -> list of raw caption strings."""
    captions: dict = {}
    path = Path(path)
    if not path.exists():
        return captions
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        if "\t" not in line:
            raise FormatError(f"{path}:{lineno}: expected 'id<TAB>caption'")
        vid, caption = line.split("\t", 1)
        captions.setdefault(vid, []).append(caption)
    return captions


def _read_single_file(path: Path, vocab: Vocabulary | None, max_words: int):
    raw = path.read_bytes()
    if len(raw) < 17:
        raise FormatError(f"{path}: truncated header at byte {len(raw)}")
    if raw[:5] != MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:5]!r} at byte 0")
    n, l, d = struct.unpack("<III", raw[5:17])
    if n < 1 or l < 1 or d < 1:
        raise FormatError(f"{path}: non-positive extents N={n} L={l} D={d}")
    expected = 17 + 4 * n * l * d
    if len(raw) != expected:
        raise FormatError(
            f"{path}: expected {expected} bytes, found {len(raw)} (offset 17)")
    values = np.frombuffer(raw, dtype="<f4", offset=17).astype(np.float64)
    frames = [Tensor(chunk.reshape(l, d)) for chunk in np.split(values, n)]

    texts = read_caption_sidecar(_sidecar_path(path)).get(path.stem, [])
    if vocab is None:
        vocab = Vocabulary.from_texts(texts, max_words)
    captions = [preprocess_caption(t, vocab, max_words) for t in texts]
    return VideoSample(id=path.stem, frames=frames, captions=captions), vocab


def load_features(path, vocab: Vocabulary | None = None,
                  max_words: int = 30) -> list:
    """Load feature files into samples.

    ``path`` may be a single MVFM1 file or a manifest (text file listing
    feature-file paths, resolved relative to the manifest).  Captions
    come from each file's sidecar; with no vocabulary given, one is
    built from all captions seen.
    """
    path = Path(path)
    if not path.exists():
        raise FormatError(f"{path}: no such file")
    with open(path, "rb") as fh:
        head = fh.read(5)
    if head == MAGIC or path.suffix == ".mvfm":
        sample, _ = _read_single_file(path, vocab, max_words)
        return [sample]

    files = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        target = (path.parent / line) if not Path(line).is_absolute() else Path(line)
        if not target.exists():
            raise FormatError(f"{path}:{lineno}: missing feature file {target}")
        files.append(target)
    if not files:
        raise FormatError(f"{path}: manifest lists no feature files")

    if vocab is None:
        texts = []
        for f in files:
            texts.extend(t for caps in read_caption_sidecar(_sidecar_path(f)).values()
                         for t in caps)
        vocab = Vocabulary.from_texts(texts, max_words)
    return [_read_single_file(f, vocab, max_words)[0] for f in files]


# ---------------------------------------------------------------------------
# frame sampling


def sample_frames(frames, n: int) -> list:
    """Pick ``n`` frames at uniform stride.

    With N source frames and n <= N the indices are
    ``floor(i * (N - 1) / (n - 1))``; fewer source frames than requested
    repeats the last one.
    """
    if n < 1:
        raise UsageError("frame count must be positive")
    total = len(frames)
    if total == 0:
        raise UsageError("no frames to sample")
    if total < n:
        idx = list(range(total)) + [total - 1] * (n - total)
    elif n == 1:
        idx = [0]
    else:
        idx = [i * (total - 1) // (n - 1) for i in range(n)]
    return [frames[i] for i in idx]


# ---------------------------------------------------------------------------
# synthetic temporal captions


@dataclass
class SyntheticSpec:
    """Settings for the grid-world caption generator.

    Each sample is an ordered run of events (between ``events_min`` and
    ``events_max`` of them); an event is one object doing one action.
    An event renders over ``frames_per_event`` frames on a
    ``grid x grid`` canvas: the object's shape and colour planes light
    up across the whole grid while a marker cell traces the motion,
    starting from the centre.  Canvases pass through a fixed seeded
    projection to an L x D pseudo feature map.  Captions name the
    events in order ("a red square slides left then ..."), so frame
    order is the only way to recover word order.
    """

    grid: int = 5
    locations: int = 6
    depth: int = 10
    frames_per_event: int = 3
    events_min: int = 2
    events_max: int = 2
    noise_frames: int = 0
    seed: int = 0
    shapes: tuple = ("square", "circle", "triangle", "star")
    colors: tuple = ("red", "blue", "green", "yellow")
    actions: tuple = ("slides left", "slides right", "rises", "falls")

    def __post_init__(self):
        if not 1 <= self.events_min <= self.events_max:
            raise UsageError("need 1 <= events_min <= events_max")
        if self.noise_frames < 0:
            raise UsageError("noise_frames must be non-negative")
        # at most 30 caption words once wrapped with control tokens
        if self.events_max * 5 > 31:
            raise UsageError("events_max would exceed the caption budget")


class SyntheticGenerator:
    """Deterministic sample factory for one SyntheticSpec."""

    _STEPS = {"slides left": (0, -1), "slides right": (0, 1),
              "rises": (-1, 0), "falls": (1, 0)}

    def __init__(self, spec: SyntheticSpec):
        self.spec = spec
        self._channels = len(spec.shapes) + len(spec.colors) + 1  # +1 marker
        proj_rng = np.random.default_rng(spec.seed)
        flat = spec.grid * spec.grid * self._channels
        # fixed projection from rendered canvases to pseudo feature maps
        self._projection = proj_rng.standard_normal(
            (flat, spec.locations * spec.depth)) / np.sqrt(flat)
        self._rng = np.random.default_rng(spec.seed + 1)

    def vocabulary(self) -> Vocabulary:
        words = {"a", "then"}
        words.update(self.spec.shapes)
        words.update(self.spec.colors)
        for action in self.spec.actions:
            words.update(action.split())
        return Vocabulary(sorted(words))

    def caption_for_events(self, events) -> str:
        parts = [f"a {color} {shape} {action}" for color, shape, action in events]
        return " then ".join(parts)

    def _random_event(self):
        spec = self.spec
        return (spec.colors[self._rng.integers(len(spec.colors))],
                spec.shapes[self._rng.integers(len(spec.shapes))],
                spec.actions[self._rng.integers(len(spec.actions))])

    def _render_event(self, event):
        """Frames for one event: identity planes plus the moving marker."""
        spec = self.spec
        color, shape, action = event
        g = spec.grid
        row = col = g // 2
        step = self._STEPS[action]
        shape_plane = spec.shapes.index(shape)
        color_plane = len(spec.shapes) + spec.colors.index(color)
        frames = []
        for t in range(spec.frames_per_event):
            canvas = np.zeros((g, g, self._channels))
            canvas[:, :, shape_plane] = 1.0
            canvas[:, :, color_plane] = 1.0
            r = min(max(row + t * step[0], 0), g - 1)
            c = min(max(col + t * step[1], 0), g - 1)
            canvas[r, c, -1] = 3.0
            feat = canvas.reshape(-1) @ self._projection
            frames.append(Tensor(feat.reshape(spec.locations, spec.depth)))
        return frames

    def _render_noise(self):
        """One caption-irrelevant frame: a random canvas, same projection."""
        spec = self.spec
        canvas = self._rng.standard_normal(
            (spec.grid, spec.grid, self._channels)) * 0.7
        feat = canvas.reshape(-1) @ self._projection
        return Tensor(feat.reshape(spec.locations, spec.depth))

    def sample(self, index: int, vocab: Vocabulary) -> VideoSample:
        spec = self.spec
        count = int(self._rng.integers(spec.events_min, spec.events_max + 1))
        events = [self._random_event()]
        while len(events) < count:
            nxt = self._random_event()
            if nxt != events[-1]:  # consecutive events must differ
                events.append(nxt)
        blocks = [self._render_event(event) for event in events]
        # distractor frames may fall anywhere between (not inside) events
        for _ in range(spec.noise_frames):
            slot = int(self._rng.integers(0, len(blocks) + 1))
            blocks.insert(slot, [self._render_noise()])
        frames = [frame for block in blocks for frame in block]
        caption = preprocess_caption(self.caption_for_events(events), vocab)
        return VideoSample(id=f"syn-{index:04d}", frames=frames,
                           captions=[caption], meta={"events": tuple(events)})


def generate_synthetic(spec: SyntheticSpec, count: int):
    """``count`` reproducible samples plus their (closed) vocabulary."""
    if count < 1:
        raise UsageError("count must be positive")
    gen = SyntheticGenerator(spec)
    vocab = gen.vocabulary()
    return [gen.sample(i, vocab) for i in range(count)], vocab
