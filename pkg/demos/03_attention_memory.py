"""Step the per-word attention and its LSTM memory by hand,
printing where the attention lands at each simulated word.
"""

import numpy as np

from memcap import Iam, Tensor, attention_update, memory_update

rng = np.random.default_rng(2)
iam = Iam(hidden=4, memory=3, rng=rng)

frame_states = Tensor(rng.standard_normal((5, 4)))  # five encoded frames
state = iam.initial_state()
h_dec = Tensor(np.zeros(4))                          # decoder state, zero at t=0

for word_step in range(1, 5):
    context, alpha = attention_update(iam, frame_states, h_dec, state.h)
    state = memory_update(iam, state, context, alpha=alpha)
    print(f"word {word_step}: alpha={np.round(alpha.data, 3)}  "
          f"sum={alpha.data.sum():.12f}")
    # a real decoder would update h_dec here; we drift it to move attention
    h_dec = Tensor(rng.standard_normal(4))

print("\nmemory state after four words:", np.round(state.h.data, 4))
print("attention stays a probability vector at every step, and the",
      "context is always a convex mix of the frame states.")
