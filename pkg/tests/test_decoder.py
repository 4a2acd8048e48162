import numpy as np
import numpy.testing as npt
import pytest

from memcap.decoder import Decoder, decode_step
from memcap.errors import UsageError
from memcap.tensor import Tensor, index_select, scale

from gradcheck import finite_difference, max_rel_err


def tiny_decoder(rng, vocab=5, embed=3, context=2, hidden=2, layers=1, biases=True):
    return Decoder(vocab, embed, context, hidden, layers, rng, biases=biases)


def test_zero_weights_give_uniform_distribution(rng):
    dec = tiny_decoder(rng, vocab=8, biases=False)
    for _, t, _ in dec.parameters():
        t.data.fill(0.0)
    step = decode_step(dec, 3, Tensor(np.zeros(2)), dec.stack.zero_states())
    npt.assert_allclose(step.probs.data, np.full(8, 0.125), atol=1e-15)
    assert abs(step.probs.data.sum() - 1.0) < 1e-12


def test_context_reaches_the_output(rng):
    dec = tiny_decoder(rng)
    states = dec.stack.zero_states()
    a = decode_step(dec, 1, Tensor(rng.standard_normal(2)), states)
    b = decode_step(dec, 1, Tensor(rng.standard_normal(2)), states)
    assert not np.allclose(a.logits.data, b.logits.data)


def test_out_of_range_token_rejected(rng):
    dec = tiny_decoder(rng, vocab=5)
    with pytest.raises(UsageError):
        decode_step(dec, 5, Tensor(np.zeros(2)), dec.stack.zero_states())


def test_log_probs_match_log_of_probs(rng):
    dec = tiny_decoder(rng)
    step = decode_step(dec, 2, Tensor(rng.standard_normal(2)), dec.stack.zero_states())
    npt.assert_allclose(step.log_probs.data, np.log(step.probs.data), atol=1e-12)


def test_cross_entropy_gradients_match_finite_differences():
    rng = np.random.default_rng(21)
    dec = tiny_decoder(rng, vocab=5, embed=3, context=2, hidden=2, layers=2)
    context = rng.standard_normal(2)
    gold = 4

    params = [(name, t) for name, t, _ in dec.parameters()]
    arrays = [t.data for _, t in params]

    def nll():
        step = decode_step(dec, 1, Tensor(context), dec.stack.zero_states())
        return scale(index_select(step.log_probs, gold), -1.0)

    nll().backward()
    numeric = finite_difference(lambda: float(nll().data), arrays)
    for (name, t), num in zip(params, numeric):
        assert max_rel_err(t.grad, num) < 1e-5, name
