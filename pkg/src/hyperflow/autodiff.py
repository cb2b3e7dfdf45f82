"""Minimal reverse-mode automatic differentiation over numpy arrays.

Only the handful of operations the influence model needs are provided.
Constant operators (sparse propagation matrices, incidence matrices) enter
through :func:`spmm` and never receive gradients.
"""

from __future__ import annotations

import hashlib
from typing import Callable, Iterable, Sequence

import numpy as np


class Tensor:
    __slots__ = ("data", "grad", "parents", "backward_fn", "name", "requires_grad")

    def __init__(self, data, requires_grad: bool = False, name: str = "",
                 parents: Sequence["Tensor"] = (), backward_fn: Callable | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self.parents = tuple(parents)
        self.backward_fn = backward_fn

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(name={self.name!r}, shape={self.data.shape})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def backward(self):
        """Accumulate d(self)/d(leaf) into every leaf with ``requires_grad``."""
        if self.data.size != 1:
            raise ValueError("backward() needs a scalar output")
        order = _topological(self)
        grads = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if not node.parents:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node.parents, node.backward_fn(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg
        return self


def _topological(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward_fn):
    req = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=req, parents=parents if req else (),
                  backward_fn=backward_fn if req else None)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# Kink recorder: every piecewise op registers its active mask here while a
# recorder is installed, so finite-difference checks can detect when a probe
# step crosses a non-differentiable boundary.
_kink_log: list[np.ndarray] | None = None


class record_kinks:
    def __enter__(self):
        global _kink_log
        self._prev = _kink_log
        _kink_log = []
        self.masks = _kink_log
        return self

    def __exit__(self, *exc):
        global _kink_log
        _kink_log = self._prev
        return False

    def signature(self) -> str:
        h = hashlib.sha1()
        for m in self.masks:
            h.update(np.packbits(m.ravel()).tobytes())
        return h.hexdigest()


def _log_mask(mask: np.ndarray):
    if _kink_log is not None:
        _kink_log.append(mask)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _make(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _make(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _make(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape),
                            _unbroadcast(g * a.data, b.shape)))


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _make(a.data @ b.data, (a, b),
                 lambda g: (g @ b.data.T, a.data.T @ g))


def spmm(op, x) -> Tensor:
    """Left-multiply ``x`` by a constant linear operator.

    ``op`` may be a dense array, a scipy sparse matrix, or any object with
    ``dot`` and ``T`` (for instance :class:`hyperflow.model.Propagator`).
    """
    x = as_tensor(x)
    return _make(np.asarray(op.dot(x.data)), (x,),
                 lambda g: (np.asarray(op.T.dot(g)),))


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    _log_mask(mask)
    return _make(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def clamp_min(x, lo: float) -> Tensor:
    x = as_tensor(x)
    mask = x.data > lo
    _log_mask(mask)
    return _make(np.where(mask, x.data, lo), (x,), lambda g: (g * mask,))


def identity(x) -> Tensor:
    return as_tensor(x)


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    s = _stable_sigmoid(x.data)
    return _make(s, (x,), lambda g: (g * s * (1.0 - s),))


def _stable_sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softplus(x) -> Tensor:
    x = as_tensor(x)
    out = np.logaddexp(0.0, x.data)
    return _make(out, (x,), lambda g: (g * _stable_sigmoid(x.data),))


def exp(x) -> Tensor:
    x = as_tensor(x)
    out = np.exp(x.data)
    return _make(out, (x,), lambda g: (g * out,))


def log(x) -> Tensor:
    x = as_tensor(x)
    return _make(np.log(x.data), (x,), lambda g: (g / x.data,))


def absolute(x) -> Tensor:
    x = as_tensor(x)
    sign = np.sign(x.data)
    _log_mask(sign > 0)
    return _make(np.abs(x.data), (x,), lambda g: (g * sign,))


def tsum(x, axis=None) -> Tensor:
    x = as_tensor(x)
    out = x.data.sum(axis=axis)

    def back(g):
        if axis is None:
            return (np.broadcast_to(g, x.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), x.shape).copy(),)

    return _make(out, (x,), back)


def mean(x) -> Tensor:
    x = as_tensor(x)
    n = x.data.size
    return mul(tsum(x), 1.0 / n) if n else Tensor(0.0)


def take_rows(x, idx) -> Tensor:
    x = as_tensor(x)
    idx = np.asarray(idx, dtype=np.int64)

    def back(g):
        out = np.zeros_like(x.data)
        np.add.at(out, idx, g)
        return (out,)

    return _make(x.data[idx], (x,), back)


def concat(parts: Iterable, axis: int = 1) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    sizes = [p.shape[axis] for p in parts]
    bounds = np.cumsum([0] + sizes)

    def back(g):
        return tuple(np.take(g, range(bounds[i], bounds[i + 1]), axis=axis)
                     for i in range(len(parts)))

    return _make(np.concatenate([p.data for p in parts], axis=axis), tuple(parts), back)


ACTIVATIONS: dict[str, Callable[[Tensor], Tensor]] = {
    "relu": relu,
    "sigmoid": sigmoid,
    "identity": identity,
}


def activation(name: str) -> Callable[[Tensor], Tensor]:
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ValueError(f"unknown activation {name!r}; choose from {sorted(ACTIVATIONS)}") from None
