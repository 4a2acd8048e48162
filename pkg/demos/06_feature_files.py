"""Write a feature file and its caption sidecar, read them back, and
show the exact byte layout of the container.
"""

import struct
import tempfile
from pathlib import Path

import numpy as np

from memcap import Tensor, VideoSample, Vocabulary, load_features, save_features
from memcap.data import preprocess_caption, write_caption_sidecar

rng = np.random.default_rng(3)
vocab = Vocabulary.from_texts(["a man is waving"])
sample = VideoSample(
    id="clip0",
    frames=[Tensor(rng.standard_normal((4, 3)).astype("<f4").astype(float))
            for _ in range(2)],
    captions=[preprocess_caption("a man is waving", vocab)],
)

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    save_features(tmp / "clip0.mvfm", sample)
    write_caption_sidecar(tmp / "clip0.captions.tsv", [sample], vocab)

    raw = (tmp / "clip0.mvfm").read_bytes()
    magic, (n, l, d) = raw[:5], struct.unpack("<III", raw[5:17])
    print(f"magic={magic!r}  frames={n}  locations={l}  depth={d}")
    print(f"payload bytes={len(raw) - 17} (= {n}x{l}x{d} float32)")

    [loaded] = load_features(tmp / "clip0.mvfm", vocab=vocab)
    same = all(np.array_equal(a.data, b.data)
               for a, b in zip(loaded.frames, sample.frames))
    print("round trip preserves every value:", same)
    print("caption read back:", vocab.decode(loaded.captions[0]))
