import numpy as np
import numpy.testing as npt
import pytest

from memcap.errors import DimensionError, UsageError
from memcap.tem import Tem, TemConfig, location_attention, tem_forward
from memcap.tensor import Tensor, tensor_sum

from gradcheck import finite_difference, max_rel_err


def tiny_tem(rng, locations=4, depth=3, hidden=2, layers=1, biases=True):
    return Tem(TemConfig(locations, depth, hidden, layers), rng, biases=biases)


def test_zero_hidden_gives_uniform_weights_and_column_mean(rng):
    tem = tiny_tem(rng)
    frame = Tensor(rng.standard_normal((4, 3)))
    mixed, weights = location_attention(tem, frame, Tensor(np.zeros(2)))
    npt.assert_allclose(weights.data, np.full(4, 0.25), atol=1e-15)
    npt.assert_allclose(mixed.data, frame.data.mean(axis=0), atol=1e-15)


def test_equal_rows_mix_to_that_row(rng):
    tem = tiny_tem(rng)
    v = rng.standard_normal(3)
    frame = Tensor(np.tile(v, (4, 1)))
    mixed, _ = location_attention(tem, frame, Tensor(rng.standard_normal(2)))
    npt.assert_allclose(mixed.data, v, atol=1e-12)


def test_location_attention_matches_dense_evaluation_and_gradients():
    rng = np.random.default_rng(3)
    tem = tiny_tem(rng, locations=4, depth=3, hidden=2)
    frame = rng.standard_normal((4, 3))
    h = rng.standard_normal(2)

    def dense():
        scores = tem.w_loc.data @ h
        e = np.exp(scores - scores.max())
        w = e / e.sum()
        return w @ frame

    mixed, weights = location_attention(tem, Tensor(frame), Tensor(h))
    npt.assert_allclose(mixed.data, dense(), atol=1e-14)
    assert abs(weights.data.sum() - 1.0) < 1e-12

    # gradient of a weighted reduction w.r.t. the attention matrix
    probe = np.array([0.2, -1.0, 0.5])
    loss = tensor_sum(mixed * Tensor(probe))
    loss.backward()
    numeric = finite_difference(lambda: float(dense() @ probe), [tem.w_loc.data])
    assert max_rel_err(tem.w_loc.grad, numeric[0]) < 1e-6


def test_dim_mismatch_raises(rng):
    tem = tiny_tem(rng)
    with pytest.raises(DimensionError):
        location_attention(tem, Tensor(np.zeros((5, 3))), Tensor(np.zeros(2)))
    with pytest.raises(DimensionError):
        location_attention(tem, Tensor(np.zeros((4, 3))), Tensor(np.zeros(3)))


def test_single_frame_encoding_matches_manual_composition(rng):
    from memcap.cells import stacked_step

    tem = tiny_tem(rng, layers=2)
    frame = Tensor(rng.standard_normal((4, 3)))
    enc = tem_forward(tem, [frame])
    assert enc.shape == (1, 2)

    mixed, _ = location_attention(tem, frame, Tensor(np.zeros(2)))
    states = stacked_step(tem.stack.cells, mixed, tem.stack.zero_states())
    npt.assert_array_equal(enc.data[0], states[-1].h.data)


def test_frame_duplication_changes_rows(rng):
    tem = tiny_tem(rng)
    frames = [Tensor(rng.standard_normal((4, 3))) for _ in range(3)]
    doubled = [f for f in frames for _ in range(2)]
    enc = tem_forward(tem, frames)
    enc2 = tem_forward(tem, doubled)
    assert enc2.shape == (6, 2)
    assert not np.allclose(enc2.data[-1], enc.data[-1])


def test_prefix_truncation_reproduces_leading_rows(rng):
    tem = tiny_tem(rng, layers=2)
    frames = [Tensor(rng.standard_normal((4, 3))) for _ in range(5)]
    full = tem_forward(tem, frames).data
    for t in (1, 3, 5):
        part = tem_forward(tem, frames[:t]).data
        npt.assert_array_equal(part, full[:t])


def test_weights_are_probabilities_and_mix_in_convex_hull(rng):
    tem = tiny_tem(rng, locations=6, depth=4, hidden=3)
    for _ in range(50):
        frame = rng.standard_normal((6, 4))
        h = rng.standard_normal(3) * 2
        mixed, weights = location_attention(tem, Tensor(frame), Tensor(h))
        assert abs(weights.data.sum() - 1.0) < 1e-12
        assert np.all(weights.data >= 0)
        assert np.all(mixed.data >= frame.min(axis=0) - 1e-12)
        assert np.all(mixed.data <= frame.max(axis=0) + 1e-12)


def test_empty_frame_list_rejected(rng):
    with pytest.raises(UsageError):
        tem_forward(tiny_tem(rng), [])


def test_tem_forward_gradients_match_finite_differences():
    rng = np.random.default_rng(5)
    tem = tiny_tem(rng, locations=3, depth=2, hidden=2, layers=2)
    frames_np = [rng.standard_normal((3, 2)) for _ in range(3)]
    probe = rng.standard_normal((3, 2))

    params = [(name, t) for name, t, _ in tem.parameters()]
    arrays = [t.data for _, t in params]

    def forward_np():
        frames = [Tensor(f) for f in frames_np]
        enc = tem_forward(tem, frames)
        return float((enc.data * probe).sum())

    enc = tem_forward(tem, [Tensor(f) for f in frames_np])
    tensor_sum(enc * Tensor(probe)).backward()

    numeric = finite_difference(forward_np, arrays)
    for (name, t), num in zip(params, numeric):
        assert max_rel_err(t.grad, num) < 1e-6, name
