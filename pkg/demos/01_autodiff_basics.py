"""A walk through the tensor library: building a graph, running backward,
and checking a gradient against central finite differences by hand.
"""

import numpy as np

from memcap import Tensor, matmul, softmax, tanh, tensor_sum

rng = np.random.default_rng(0)

# Leaves that want gradients are created with requires_grad=True.
w = Tensor(rng.standard_normal((3, 2)), requires_grad=True)
x = Tensor(rng.standard_normal(3))

# Ops record the graph as they run.
hidden = tanh(matmul(x, w))
weights = softmax(hidden)
loss = tensor_sum(weights * Tensor(np.array([1.0, -1.0])))
print("loss:", loss.item())

# One backward pass fills w.grad.
loss.backward()
print("analytic dloss/dw:\n", w.grad)

# The same derivative by central differences, straight from the maths.
step = 1e-6
numeric = np.zeros_like(w.data)
for i in range(w.data.shape[0]):
    for j in range(w.data.shape[1]):
        orig = w.data[i, j]
        for sign, delta in ((+1, step), (-1, -step)):
            w.data[i, j] = orig + delta
            h = np.tanh(x.data @ w.data)
            e = np.exp(h - h.max())
            p = e / e.sum()
            value = float(p @ np.array([1.0, -1.0]))
            numeric[i, j] += sign * value
        w.data[i, j] = orig
numeric /= 2 * step
print("numeric  dloss/dw:\n", numeric)
print("max abs difference:", np.abs(w.grad - numeric).max())
