"""Dense float64 tensors with reverse-mode automatic differentiation.

The op set is the minimum the captioning architecture needs: matrix
products, stable softmax / log-softmax, tanh, sigmoid, elementwise
add / multiply / scale, log, full-sum reduction, row lookup (embedding),
vector concatenation, row stacking, and 2-D transpose.

Graphs are built define-by-run: every op result remembers its parents
and how to push a gradient back to each of them.  ``backward`` on a
scalar walks the recorded graph once in reverse topological order and
accumulates gradients into the ``requires_grad`` leaves, then drops the
graph.  Broadcasting is deliberately restricted to one pattern, a 1-D
vector broadcast over the rows of a 2-D operand.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, NumericError, UsageError


class Tensor:
    """A NumPy float64 array plus an optional gradient accumulator.

    Leaves created with ``requires_grad=True`` hold their accumulated
    gradient in ``grad`` after a backward pass.  Op results carry the
    parent links that make the backward pass possible; they are not
    leaves and never hold a ``grad`` themselves.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(self.data) if requires_grad else None
        self._parents: tuple = ()

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        if self.data.size != 1:
            raise UsageError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad.fill(0.0)

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # Operator sugar; all graph recording happens in the module functions.
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, scale(other, -1.0))

    def __mul__(self, other):
        return hadamard(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return scale(self, -1.0)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data: np.ndarray, parents) -> Tensor:
    """Wrap an op result, keeping only parents that can receive gradients."""
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    tracked = [pair for pair in parents if pair[0].requires_grad or pair[0]._parents]
    out.requires_grad = bool(tracked)
    out._parents = tracked
    return out


def topo_nodes(root: Tensor) -> list:
    """Recorded graph under ``root``, parents before children.

    The returned order is a topological order of the executed ops:
    every node appears after all of its inputs.  ``backward`` walks it
    reversed, visiting each node exactly once.
    """
    order: list = []
    seen = {id(root)}
    add_seen = seen.add
    stack = [(root, iter(root._parents))]
    push = stack.append
    while stack:
        node, parents = stack[-1]
        for parent, _ in parents:
            key = id(parent)
            if key not in seen:
                add_seen(key)
                push((parent, iter(parent._parents)))
                break
        else:
            order.append(node)
            stack.pop()
    return order


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into every reachable requires_grad leaf.

    ``loss`` must be a scalar.  The graph under it is consumed: parent
    links are cleared once visited, so a second backward over the same
    nodes sees an empty graph.
    """
    if loss.data.size != 1:
        raise UsageError(f"backward() needs a scalar loss, got shape {loss.shape}")
    order = topo_nodes(loss)
    grads = {id(loss): np.ones_like(loss.data)}
    pop = grads.pop
    for node in reversed(order):
        g = pop(id(node), None)
        if g is None:
            continue
        parents = node._parents
        if parents:
            for parent, pull in parents:
                contrib = pull(g)
                key = id(parent)
                held = grads.get(key)
                grads[key] = contrib if held is None else held + contrib
            node._parents = ()
        elif node.requires_grad and node.grad is not None:
            node.grad += g


# ---------------------------------------------------------------------------
# primitive ops


def matmul(a, b) -> Tensor:
    """Matrix / vector product for 1-D and 2-D operands."""
    a, b = _as_tensor(a), _as_tensor(b)
    da, db = a.data, b.data
    if da.ndim not in (1, 2) or db.ndim not in (1, 2):
        raise DimensionError(f"matmul supports 1-D/2-D operands, got {a.shape} @ {b.shape}")
    if da.shape[-1] != db.shape[0]:
        raise DimensionError(f"matmul inner extents differ: {a.shape} @ {b.shape}")
    out = np.dot(da, db)

    if da.ndim == 2 and db.ndim == 2:
        pulls = [(a, lambda g: np.dot(g, db.T)), (b, lambda g: np.dot(da.T, g))]
    elif da.ndim == 1 and db.ndim == 2:
        pulls = [(a, lambda g: np.dot(db, g)), (b, lambda g: np.outer(da, g))]
    elif da.ndim == 2 and db.ndim == 1:
        pulls = [(a, lambda g: np.outer(g, db)), (b, lambda g: np.dot(da.T, g))]
    else:  # 1-D @ 1-D, a true dot product
        pulls = [(a, lambda g: g * db), (b, lambda g: g * da)]
    return _result(out, pulls)


def _broadcast_pair(a: Tensor, b: Tensor, opname: str):
    """Resolve the documented broadcast rule.

    Returns (out_shape_owner, pull_fixups) semantics via a small tag:
    'same', 'b_row' (b is a vector spread over a's rows) or 'a_row'.
    """
    da, db = a.data, b.data
    if da.shape == db.shape:
        return "same"
    if da.ndim == 2 and db.ndim == 1 and db.shape[0] == da.shape[1]:
        return "b_row"
    if db.ndim == 2 and da.ndim == 1 and da.shape[0] == db.shape[1]:
        return "a_row"
    raise DimensionError(f"{opname}: shapes {a.shape} and {b.shape} do not conform")


def add(a, b) -> Tensor:
    """Elementwise sum; one operand may be a vector broadcast over rows."""
    a, b = _as_tensor(a), _as_tensor(b)
    kind = _broadcast_pair(a, b, "add")
    out = a.data + b.data
    if kind == "same":
        pulls = [(a, lambda g: g), (b, lambda g: g)]
    elif kind == "b_row":
        pulls = [(a, lambda g: g), (b, lambda g: g.sum(axis=0))]
    else:
        pulls = [(a, lambda g: g.sum(axis=0)), (b, lambda g: g)]
    return _result(out, pulls)


def hadamard(a, b) -> Tensor:
    """Elementwise product under the same broadcast rule as ``add``."""
    a, b = _as_tensor(a), _as_tensor(b)
    kind = _broadcast_pair(a, b, "hadamard")
    da, db = a.data, b.data
    out = da * db
    if kind == "same":
        pulls = [(a, lambda g: g * db), (b, lambda g: g * da)]
    elif kind == "b_row":
        pulls = [(a, lambda g: g * db), (b, lambda g: (g * da).sum(axis=0))]
    else:
        pulls = [(a, lambda g: (g * db).sum(axis=0)), (b, lambda g: g * da)]
    return _result(out, pulls)


def scale(x, c: float) -> Tensor:
    x = _as_tensor(x)
    c = float(c)
    return _result(x.data * c, [(x, lambda g: g * c)])


def tanh(x) -> Tensor:
    x = _as_tensor(x)
    out = np.tanh(x.data)
    return _result(out, [(x, lambda g: g * (1.0 - out * out))])


def sigmoid(x) -> Tensor:
    x = _as_tensor(x)
    # exp overflow for very negative inputs saturates to inf and the
    # ratio correctly rounds to 0, so only the warning needs silencing
    with np.errstate(over="ignore"):
        out = 1.0 / (1.0 + np.exp(-x.data))
    return _result(out, [(x, lambda g: g * out * (1.0 - out))])


def softmax(x) -> Tensor:
    """Stable softmax of a 1-D tensor; output is positive and sums to 1."""
    x = _as_tensor(x)
    if x.ndim != 1:
        raise DimensionError(f"softmax expects a 1-D tensor, got shape {x.shape}")
    if x.data.size == 0:
        raise UsageError("softmax of an empty tensor")
    if not np.all(np.isfinite(x.data)):
        raise NumericError("softmax input contains non-finite values")
    e = np.exp(x.data - x.data.max())
    out = e / e.sum()

    def pull(g):
        return out * (g - np.dot(g, out))

    return _result(out, [(x, pull)])


def log_softmax(x) -> Tensor:
    """log(softmax(x)) computed without forming the ratio."""
    x = _as_tensor(x)
    if x.ndim != 1:
        raise DimensionError(f"log_softmax expects a 1-D tensor, got shape {x.shape}")
    if not np.all(np.isfinite(x.data)):
        raise NumericError("log_softmax input contains non-finite values")
    shifted = x.data - x.data.max()
    out = shifted - np.log(np.exp(shifted).sum())
    probs = np.exp(out)

    def pull(g):
        return g - probs * g.sum()

    return _result(out, [(x, pull)])


def log(x) -> Tensor:
    x = _as_tensor(x)
    if np.any(x.data <= 0.0):
        raise NumericError("log requires strictly positive input")
    return _result(np.log(x.data), [(x, lambda g: g / x.data)])


def tensor_sum(x) -> Tensor:
    """Sum of all entries, as a 0-d scalar tensor."""
    x = _as_tensor(x)
    out = np.asarray(x.data.sum())
    return _result(out, [(x, lambda g: np.full_like(x.data, float(g)))])


def index_select(x, i: int) -> Tensor:
    """Row ``i`` of a matrix (embedding lookup) or entry ``i`` of a vector."""
    x = _as_tensor(x)
    i = int(i)
    if x.ndim not in (1, 2):
        raise DimensionError(f"index_select expects a 1-D/2-D tensor, got {x.shape}")
    if not 0 <= i < x.shape[0]:
        raise UsageError(f"index {i} out of range for extent {x.shape[0]}")
    out = x.data[i].copy() if x.ndim == 2 else np.asarray(x.data[i])

    def pull(g):
        z = np.zeros_like(x.data)
        z[i] = g
        return z

    return _result(out, [(x, pull)])


def concat(*xs) -> Tensor:
    """Concatenate 1-D tensors end to end."""
    ts = [_as_tensor(x) for x in xs]
    if not ts:
        raise UsageError("concat of no tensors")
    for t in ts:
        if t.ndim != 1:
            raise DimensionError(f"concat expects 1-D tensors, got shape {t.shape}")
    out = np.concatenate([t.data for t in ts])
    pulls = []
    offset = 0
    for t in ts:
        n = t.data.shape[0]
        lo = offset
        pulls.append((t, lambda g, lo=lo, n=n: g[lo:lo + n]))
        offset += n
    return _result(out, pulls)


def stack_rows(xs) -> Tensor:
    """Stack equal-length 1-D tensors as the rows of a matrix."""
    ts = [_as_tensor(x) for x in xs]
    if not ts:
        raise UsageError("stack_rows of no tensors")
    width = ts[0].data.shape[0]
    for t in ts:
        if t.ndim != 1 or t.data.shape[0] != width:
            raise DimensionError(f"stack_rows row shape {t.shape} != ({width},)")
    out = np.stack([t.data for t in ts])
    pulls = [(t, lambda g, i=i: g[i]) for i, t in enumerate(ts)]
    return _result(out, pulls)


def transpose(x) -> Tensor:
    x = _as_tensor(x)
    if x.ndim != 2:
        raise DimensionError(f"transpose expects a 2-D tensor, got shape {x.shape}")
    return _result(x.data.T.copy(), [(x, lambda g: g.T)])


def affine(x: Tensor, wx: Tensor, h: Tensor, wh: Tensor, b: Tensor | None = None) -> Tensor:
    """Fused ``x @ wx + h @ wh (+ b)`` for 1-D ``x``/``h``.

    Value-identical to composing matmul and add; recorded as a single
    graph node because it is the inner loop of every recurrent step.
    """
    dx, dwx, dh, dwh = x.data, wx.data, h.data, wh.data
    if dx.ndim != 1 or dh.ndim != 1 or dwx.ndim != 2 or dwh.ndim != 2 \
            or dx.shape[0] != dwx.shape[0] or dh.shape[0] != dwh.shape[0] \
            or dwx.shape[1] != dwh.shape[1]:
        raise DimensionError(
            f"affine shapes do not conform: {x.shape} @ {wx.shape} + {h.shape} @ {wh.shape}")
    out = np.dot(dx, dwx) + np.dot(dh, dwh)
    if b is not None:
        out = out + b.data
    pulls = [(x, lambda g: np.dot(dwx, g)),
             (wx, lambda g: np.multiply.outer(dx, g)),
             (h, lambda g: np.dot(dwh, g)),
             (wh, lambda g: np.multiply.outer(dh, g))]
    if b is not None:
        pulls.append((b, lambda g: g))
    return _result(out, pulls)


def uniform_init(rng: np.random.Generator, *shape: int) -> np.ndarray:
    """Uniform(-s, s) weights with s = 1/sqrt(output extent)."""
    bound = 1.0 / np.sqrt(shape[-1])
    return rng.uniform(-bound, bound, size=shape)
