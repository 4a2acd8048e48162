import struct

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, strategies as st

from memcap.data import (
    BOS,
    EOS,
    MAGIC,
    UNK,
    SyntheticGenerator,
    SyntheticSpec,
    VideoSample,
    Vocabulary,
    generate_synthetic,
    load_features,
    preprocess_caption,
    sample_frames,
    save_features,
    tokenize,
    write_caption_sidecar,
)
from memcap.errors import FormatError, UsageError
from memcap.tensor import Tensor


def make_sample(rng, vid="vid0", n=3, l=4, d=2, captions=("a man is waving",)):
    vocab = Vocabulary.from_texts(captions)
    frames = [Tensor(rng.standard_normal((l, d)).astype("<f4").astype(float))
              for _ in range(n)]
    caps = [preprocess_caption(c, vocab) for c in captions]
    return VideoSample(id=vid, frames=frames, captions=caps), vocab


def test_preprocess_basic():
    vocab = Vocabulary.from_texts(["a man is waving"])
    ids = preprocess_caption("A man is waving.", vocab)
    assert ids[0] == BOS and ids[-1] == EOS
    assert vocab.decode(ids) == "a man is waving"


def test_preprocess_clips_to_thirty_words():
    words = " ".join(f"w{i}" for i in range(40))
    vocab = Vocabulary.from_texts([words])
    ids = preprocess_caption(words, vocab)
    assert len(ids) == 32  # 30 content tokens plus BOS/EOS


def test_unknown_tokens_map_to_unk():
    vocab = Vocabulary.from_texts(["a man"])
    ids = preprocess_caption("a zebra", vocab)
    assert ids == [BOS, vocab.id_of("a"), UNK, EOS]


def test_tokenize_idempotent_on_clean_streams():
    tokens = tokenize("The Dog, chased; a Ball!")
    again = tokenize(" ".join(tokens))
    assert tokens == again == ["the", "dog", "chased", "a", "ball"]


def test_vocabulary_is_a_bijection_with_reserved_ids():
    vocab = Vocabulary.from_texts(["b a c"])
    assert [vocab.token_of(i) for i in range(4)] == ["<pad>", "<bos>", "<eos>", "<unk>"]
    for tok in ("a", "b", "c"):
        assert vocab.token_of(vocab.id_of(tok)) == tok
    assert len(set(vocab.tokens)) == len(vocab)


def test_feature_roundtrip(tmp_path, rng):
    sample, vocab = make_sample(rng)
    path = tmp_path / "vid0.mvfm"
    save_features(path, sample)
    write_caption_sidecar(tmp_path / "vid0.captions.tsv", [sample], vocab)

    loaded = load_features(path, vocab=vocab)
    assert len(loaded) == 1
    back = loaded[0]
    assert back.id == "vid0"
    assert back.captions == sample.captions
    for a, b in zip(back.frames, sample.frames):
        npt.assert_array_equal(a.data, b.data)


def test_hand_built_file_recovers_exact_floats(tmp_path):
    # written with struct directly, independent of save_features
    values = [0.5, -1.25, 3.0, 42.0, 0.0, -0.0078125, 7.5, -2.5]
    blob = MAGIC + struct.pack("<III", 2, 2, 2) + struct.pack("<8f", *values)
    path = tmp_path / "hand.mvfm"
    path.write_bytes(blob)

    [sample] = load_features(path)
    assert len(sample.frames) == 2
    flat = np.concatenate([f.data.reshape(-1) for f in sample.frames])
    npt.assert_array_equal(flat, values)


def test_zero_frame_file_rejected(tmp_path):
    path = tmp_path / "empty.mvfm"
    path.write_bytes(MAGIC + struct.pack("<III", 0, 2, 2))
    with pytest.raises(FormatError, match="N=0"):
        load_features(path)


def test_truncated_and_misdeclared_files_rejected(tmp_path):
    path = tmp_path / "bad.mvfm"
    path.write_bytes(MAGIC + struct.pack("<III", 2, 2, 2) + b"\0" * 8)
    with pytest.raises(FormatError, match="offset 17"):
        load_features(path)

    path.write_bytes(b"XVFM1" + struct.pack("<III", 1, 1, 1) + b"\0" * 4)
    with pytest.raises(FormatError, match="magic"):
        load_features(path)


def test_manifest_loading_builds_shared_vocab(tmp_path, rng):
    s1, _ = make_sample(rng, vid="a", captions=("a man is waving",))
    s2, _ = make_sample(rng, vid="b", captions=("the dog runs",))
    shared = Vocabulary.from_texts(["a man is waving", "the dog runs"])
    for s in (s1, s2):
        save_features(tmp_path / f"{s.id}.mvfm", s)
        write_caption_sidecar(tmp_path / f"{s.id}.captions.tsv", [s], shared)
    manifest = tmp_path / "manifest.txt"
    manifest.write_text("a.mvfm\nb.mvfm\n")

    samples = load_features(manifest)
    assert [s.id for s in samples] == ["a", "b"]
    assert all(UNK not in cap for s in samples for cap in s.captions)

    (tmp_path / "empty.txt").write_text("\n")
    with pytest.raises(FormatError, match="no feature files"):
        load_features(tmp_path / "empty.txt")


def test_sample_frames_stride_rule():
    frames = list(range(16))
    assert sample_frames(frames, 4) == [0, 5, 10, 15]
    assert sample_frames(list(range(8)), 8) == list(range(8))
    assert sample_frames([10, 11, 12], 4) == [10, 11, 12, 12]
    assert sample_frames(list(range(9)), 1) == [0]
    with pytest.raises(UsageError):
        sample_frames(frames, 0)


@given(total=st.integers(1, 60), n=st.integers(1, 60))
def test_sample_frames_indices_sorted_and_in_range(total, n):
    picked = sample_frames(list(range(total)), n)
    assert len(picked) == n
    assert all(0 <= i < total for i in picked)
    assert picked == sorted(picked)


def test_synthetic_is_bitwise_reproducible():
    spec = SyntheticSpec(seed=42)
    a, vocab_a = generate_synthetic(spec, 5)
    b, vocab_b = generate_synthetic(spec, 5)
    assert vocab_a.tokens == vocab_b.tokens
    for sa, sb in zip(a, b):
        assert sa.captions == sb.captions
        for fa, fb in zip(sa.frames, sb.frames):
            npt.assert_array_equal(fa.data, fb.data)


def test_synthetic_captions_are_order_sensitive():
    spec = SyntheticSpec(seed=7)
    samples, _ = generate_synthetic(spec, 20)
    gen = SyntheticGenerator(spec)
    for sample in samples:
        first, second = sample.meta["events"]
        assert first != second
        forward = gen.caption_for_events((first, second))
        backward = gen.caption_for_events((second, first))
        assert forward != backward


def test_synthetic_vocab_is_closed_and_samples_valid():
    samples, vocab = generate_synthetic(SyntheticSpec(seed=3), 10)
    for s in samples:
        assert len(s.frames) == 6
        assert s.frames[0].shape == (6, 10)
        for cap in s.captions:
            assert UNK not in cap
            assert len(cap) <= 32


def test_synthetic_variable_events_and_noise_frames():
    spec = SyntheticSpec(seed=9, frames_per_event=2, events_min=2,
                         events_max=4, noise_frames=3)
    samples, _ = generate_synthetic(spec, 30)
    counts = set()
    for s in samples:
        events = s.meta["events"]
        counts.add(len(events))
        assert 2 <= len(events) <= 4
        assert len(s.frames) == 2 * len(events) + 3
        for first, second in zip(events, events[1:]):
            assert first != second
    assert len(counts) > 1  # the event count actually varies

    again, _ = generate_synthetic(spec, 30)
    for a, b in zip(samples, again):
        assert a.captions == b.captions
        for fa, fb in zip(a.frames, b.frames):
            npt.assert_array_equal(fa.data, fb.data)


def test_video_sample_invariants_enforced(rng):
    with pytest.raises(UsageError):
        VideoSample(id="x", frames=[], captions=[])
    frames = [Tensor(rng.standard_normal((2, 3)))]
    with pytest.raises(UsageError):
        VideoSample(id="x", frames=frames, captions=[list(range(33))])
    with pytest.raises(UsageError):
        VideoSample(id="x",
                    frames=[Tensor(np.zeros((2, 3))), Tensor(np.zeros((3, 2)))],
                    captions=[])
