"""Watch the temporal encoder at work: location attention turns each
frame map into a convex mix of its rows, and the frame-time LSTM turns
the mixes into one hidden state per frame.
"""

import numpy as np

from memcap import Tem, TemConfig, Tensor, location_attention, tem_forward

rng = np.random.default_rng(1)
tem = Tem(TemConfig(locations=5, depth=4, hidden=3, layers=2), rng)

frames = [Tensor(rng.standard_normal((5, 4))) for _ in range(4)]

# With a zero hidden state the location weights are uniform, so the mix
# is the column mean of the frame map.
mixed, weights = location_attention(tem, frames[0], Tensor(np.zeros(3)))
print("first-step location weights:", np.round(weights.data, 4))
print("column mean of the map:     ", np.round(frames[0].data.mean(axis=0), 4))
print("attended mix:               ", np.round(mixed.data, 4))

encoded = tem_forward(tem, frames)
print("\nencoded frame states, one row per frame:")
print(np.round(encoded.data, 4))

# Causality: encoding a prefix reproduces the leading rows exactly.
prefix = tem_forward(tem, frames[:2])
print("\nprefix rows equal:", np.array_equal(prefix.data, encoded.data[:2]))
