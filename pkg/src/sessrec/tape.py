"""Reverse-mode automatic differentiation over numpy float64 arrays.

Small tape just big enough for this library: dense ops, broadcasting,
advanced indexing, and a few custom kernels (pairwise distances, safe row
normalization, log-softmax) with hand-written backward rules.  Everything
runs in float64 and is deterministic: no threads, no in-place gradient
mutation, accumulation order fixed by the topological order of the graph.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit


def _to_value(x) -> np.ndarray:
    if isinstance(x, np.ndarray):
        return x if x.dtype == np.float64 else x.astype(np.float64)
    return np.asarray(x, dtype=np.float64)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


class Tensor:
    """A node in the computation graph wrapping a float64 ndarray."""

    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, value, requires_grad: bool = False,
                 parents: tuple = (), backward=None):
        self.value = _to_value(value)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def item(self) -> float:
        return float(self.value)

    def __repr__(self):
        return f"Tensor(shape={self.value.shape}, requires_grad={self.requires_grad})"

    # -- graph traversal ---------------------------------------------------

    def backward(self):
        """Backpropagate from a scalar tensor."""
        if self.value.size != 1:
            raise ValueError("backward() requires a scalar tensor")
        order = _topo_order(self)
        self.grad = np.ones_like(self.value)
        for node in reversed(order):
            if node._backward is not None:
                node._backward()
                node._backward = None  # free closures as we go

    # -- operators ---------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __getitem__(self, key):
        return getitem(self, key)


class Parameter(Tensor):
    """Leaf tensor updated by an optimizer."""

    def __init__(self, value):
        super().__init__(value, requires_grad=True)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _topo_order(root: Tensor) -> list:
    order, visited = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))
    return order


def _accum(t: Tensor, g: np.ndarray):
    if t.requires_grad:
        t.grad = g if t.grad is None else t.grad + g


def _make(value, parents, backward):
    if any(p.requires_grad for p in parents):
        return Tensor(value, requires_grad=True, parents=parents, backward=backward)
    return Tensor(value)


# -- arithmetic -------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def _bw():
        _accum(a, _unbroadcast(out.grad, a.value.shape))
        _accum(b, _unbroadcast(out.grad, b.value.shape))

    out = _make(a.value + b.value, (a, b), _bw)
    return out


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def _bw():
        _accum(a, _unbroadcast(out.grad, a.value.shape))
        _accum(b, _unbroadcast(-out.grad, b.value.shape))

    out = _make(a.value - b.value, (a, b), _bw)
    return out


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def _bw():
        _accum(a, _unbroadcast(out.grad * b.value, a.value.shape))
        _accum(b, _unbroadcast(out.grad * a.value, b.value.shape))

    out = _make(a.value * b.value, (a, b), _bw)
    return out


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def _bw():
        _accum(a, _unbroadcast(out.grad / b.value, a.value.shape))
        _accum(b, _unbroadcast(-out.grad * a.value / (b.value * b.value),
                               b.value.shape))

    out = _make(a.value / b.value, (a, b), _bw)
    return out


def power(a, exponent: float) -> Tensor:
    a = as_tensor(a)
    exponent = float(exponent)

    def _bw():
        _accum(a, out.grad * exponent * a.value ** (exponent - 1.0))

    out = _make(a.value ** exponent, (a,), _bw)
    return out


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError("matmul operands must have ndim >= 2")

    def _bw():
        ga = out.grad @ np.swapaxes(b.value, -1, -2)
        gb = np.swapaxes(a.value, -1, -2) @ out.grad
        _accum(a, _unbroadcast(ga, a.value.shape))
        _accum(b, _unbroadcast(gb, b.value.shape))

    out = _make(a.value @ b.value, (a, b), _bw)
    return out


# -- shape ops --------------------------------------------------------------

def reshape(a, shape) -> Tensor:
    a = as_tensor(a)

    def _bw():
        _accum(a, out.grad.reshape(a.value.shape))

    out = _make(a.value.reshape(shape), (a,), _bw)
    return out


def swap_last(a) -> Tensor:
    """Transpose the last two axes."""
    a = as_tensor(a)

    def _bw():
        _accum(a, np.swapaxes(out.grad, -1, -2))

    out = _make(np.swapaxes(a.value, -1, -2), (a,), _bw)
    return out


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.value.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def _bw():
        for t, g in zip(tensors, np.split(out.grad, splits, axis=axis)):
            _accum(t, g)

    out = _make(np.concatenate([t.value for t in tensors], axis=axis),
                tuple(tensors), _bw)
    return out


def getitem(a, key) -> Tensor:
    a = as_tensor(a)

    def _bw():
        buf = np.zeros_like(a.value)
        np.add.at(buf, key, out.grad)
        _accum(a, buf)

    out = _make(a.value[key], (a,), _bw)
    return out


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)

    def _bw():
        g = out.grad
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(g, a.value.shape))

    out = _make(a.value.sum(axis=axis, keepdims=keepdims), (a,), _bw)
    return out


def tmean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    count = a.value.size if axis is None else np.prod(
        [a.value.shape[ax] for ax in np.atleast_1d(axis)])

    def _bw():
        g = out.grad / count
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(g, a.value.shape))

    out = _make(a.value.mean(axis=axis, keepdims=keepdims), (a,), _bw)
    return out


# -- nonlinearities ---------------------------------------------------------

def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    s = expit(a.value)

    def _bw():
        _accum(a, out.grad * s * (1.0 - s))

    out = _make(s, (a,), _bw)
    return out


def tanh(a) -> Tensor:
    a = as_tensor(a)
    t = np.tanh(a.value)

    def _bw():
        _accum(a, out.grad * (1.0 - t * t))

    out = _make(t, (a,), _bw)
    return out


def exp(a) -> Tensor:
    a = as_tensor(a)
    e = np.exp(a.value)

    def _bw():
        _accum(a, out.grad * e)

    out = _make(e, (a,), _bw)
    return out


def log(a) -> Tensor:
    a = as_tensor(a)

    def _bw():
        _accum(a, out.grad / a.value)

    out = _make(np.log(a.value), (a,), _bw)
    return out


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    s = np.sqrt(a.value)

    def _bw():
        _accum(a, out.grad * 0.5 / s)

    out = _make(s, (a,), _bw)
    return out


def softplus(a) -> Tensor:
    """log(1 + exp(x)), overflow-safe; note -log(sigmoid(x)) = softplus(-x)."""
    a = as_tensor(a)

    def _bw():
        _accum(a, out.grad * expit(a.value))

    out = _make(np.logaddexp(0.0, a.value), (a,), _bw)
    return out


def clip_min(a, lo: float) -> Tensor:
    """Elementwise max(x, lo); gradient is zero where the clip is active."""
    a = as_tensor(a)
    mask = a.value > lo

    def _bw():
        _accum(a, out.grad * mask)

    out = _make(np.maximum(a.value, lo), (a,), _bw)
    return out


def log_softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.value - a.value.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    val = shifted - lse

    def _bw():
        g = out.grad
        _accum(a, g - np.exp(val) * g.sum(axis=axis, keepdims=True))

    out = _make(val, (a,), _bw)
    return out


# -- custom kernels ---------------------------------------------------------

def pairwise_distances(a) -> Tensor:
    """Euclidean distance matrix of the rows of a 2-d array.

    The diagonal is exactly zero and carries no gradient; off-diagonal
    zeros (duplicate rows) also get zero gradient, the subgradient choice
    at the non-differentiable point.
    """
    a = as_tensor(a)
    x = a.value
    if x.ndim != 2:
        raise ValueError("pairwise_distances expects a 2-d array")
    sq = (x * x).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    dist = np.sqrt(d2)

    def _bw():
        g = out.grad + out.grad.T
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dist > 0.0, g / np.where(dist > 0.0, dist, 1.0), 0.0)
        _accum(a, ratio.sum(axis=1, keepdims=True) * x - ratio @ x)

    out = _make(dist, (a,), _bw)
    return out


def normalize_rows(a) -> Tensor:
    """L2-normalize along the last axis; rows with zero norm map to zero."""
    a = as_tensor(a)
    x = a.value
    norm = np.sqrt((x * x).sum(axis=-1, keepdims=True))
    safe = np.where(norm > 0.0, norm, 1.0)
    unit = np.where(norm > 0.0, x / safe, 0.0)

    def _bw():
        g = out.grad
        inner = (x * g).sum(axis=-1, keepdims=True)
        grad = g / safe - x * inner / (safe ** 3)
        _accum(a, np.where(norm > 0.0, grad, 0.0))

    out = _make(unit, (a,), _bw)
    return out
