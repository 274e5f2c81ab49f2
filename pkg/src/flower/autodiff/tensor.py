"""Reverse-mode autodiff over dense float64 arrays.

Define-by-run: every primitive that touches a tensor requiring gradients
records its parents and a backward closure on the result. ``backward()``
walks the recorded graph once in reverse topological order and frees it,
so a fresh tape is built on every training step.
"""

from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible for a primitive."""


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """Dense n-dimensional float64 array with optional gradient tracking.

    Invariants: ``data`` is always float64; ``grad`` is either None or an
    array of identical shape. A tensor created from an op holds references
    to its parents until ``backward()`` releases them.
    """

    __slots__ = ("data", "requires_grad", "grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.name = name
        self._parents: tuple = ()
        self._backward = None

    # ------------------------------------------------------------------ util

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        """Constant view of this tensor; gradients do not flow past it."""
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g: np.ndarray):
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad += g

    @staticmethod
    def _lift(value) -> "Tensor":
        return value if isinstance(value, Tensor) else Tensor(value)

    def _make(self, data, parents, backward) -> "Tensor":
        out = Tensor(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    # ------------------------------------------------------------ primitives

    def __add__(self, other):
        other = self._lift(other)
        data = _elementwise(np.add, self, other, "add")

        def backward(g):
            return _unbroadcast(g, self.shape), _unbroadcast(g, other.shape)

        return self._make(data, (self, other), backward)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._lift(other)
        data = _elementwise(np.subtract, self, other, "sub")

        def backward(g):
            return _unbroadcast(g, self.shape), _unbroadcast(-g, other.shape)

        return self._make(data, (self, other), backward)

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        other = self._lift(other)
        data = _elementwise(np.multiply, self, other, "mul")

        def backward(g):
            return (
                _unbroadcast(g * other.data, self.shape),
                _unbroadcast(g * self.data, other.shape),
            )

        return self._make(data, (self, other), backward)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._lift(other)
        data = _elementwise(np.divide, self, other, "div")

        def backward(g):
            return (
                _unbroadcast(g / other.data, self.shape),
                _unbroadcast(-g * self.data / (other.data * other.data), other.shape),
            )

        return self._make(data, (self, other), backward)

    def __rtruediv__(self, other):
        return self._lift(other) / self

    def __neg__(self):
        def backward(g):
            return (-g,)

        return self._make(-self.data, (self,), backward)

    def matmul(self, other) -> "Tensor":
        other = self._lift(other)
        if self.ndim != 2 or other.ndim != 2 or self.shape[1] != other.shape[0]:
            raise ShapeError(
                f"matmul requires 2-d operands with matching inner dimension, "
                f"got {self.shape} and {other.shape}"
            )
        data = self.data @ other.data

        def backward(g):
            return g @ other.data.T, self.data.T @ g

        return self._make(data, (self, other), backward)

    __matmul__ = matmul

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        data = self.data.sum(axis=axis, keepdims=keepdims)
        shape = self.shape

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)

        return self._make(data, (self,), backward)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        data = self.data.mean(axis=axis, keepdims=keepdims)
        shape = self.shape
        count = self.size if axis is None else shape[axis]

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy() / count,)

        return self._make(data, (self,), backward)

    def exp(self) -> "Tensor":
        data = np.exp(self.data)

        def backward(g):
            return (g * data,)

        return self._make(data, (self,), backward)

    def log(self) -> "Tensor":
        def backward(g):
            return (g / self.data,)

        return self._make(np.log(self.data), (self,), backward)

    def tanh(self) -> "Tensor":
        data = np.tanh(self.data)

        def backward(g):
            return (g * (1.0 - data * data),)

        return self._make(data, (self,), backward)

    def softplus(self) -> "Tensor":
        # log(1 + e^x), computed stably for large |x|
        data = np.logaddexp(0.0, self.data)

        def backward(g):
            return (g * _sigmoid(self.data),)

        return self._make(data, (self,), backward)

    def softmax(self, axis: int = -1) -> "Tensor":
        shifted = self.data - self.data.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        data = e / e.sum(axis=axis, keepdims=True)

        def backward(g):
            inner = (g * data).sum(axis=axis, keepdims=True)
            return ((g - inner) * data,)

        return self._make(data, (self,), backward)

    def square(self) -> "Tensor":
        def backward(g):
            return (g * 2.0 * self.data,)

        return self._make(self.data * self.data, (self,), backward)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.shape

        def backward(g):
            return (g.reshape(old),)

        return self._make(self.data.reshape(shape), (self,), backward)

    def __getitem__(self, key) -> "Tensor":
        data = self.data[key]
        shape = self.shape

        def backward(g):
            full = np.zeros(shape)
            np.add.at(full, key, g)
            return (full,)

        return self._make(data.copy(), (self,), backward)

    def take(self, indices, axis: int = -1) -> "Tensor":
        """Gather along `axis`; backward scatter-adds into the source."""
        indices = np.asarray(indices, dtype=np.intp)
        data = np.take(self.data, indices, axis=axis)
        shape = self.shape

        def backward(g):
            full = np.zeros(shape)
            moved = np.moveaxis(full, axis, 0)
            np.add.at(moved, indices, np.moveaxis(g, axis, 0))
            return (full,)

        return self._make(data, (self,), backward)

    def broadcast_to(self, shape) -> "Tensor":
        shape = tuple(shape)
        data = np.broadcast_to(self.data, shape).copy()
        old = self.shape

        def backward(g):
            return (_unbroadcast(g, old),)

        return self._make(data, (self,), backward)

    # --------------------------------------------------------------- backward

    def backward(self):
        """Populate ``grad`` on every requires_grad leaf reachable from here.

        Requires a scalar; each node's gradient accumulates once per use,
        and the graph is released afterwards.
        """
        if self.data.size != 1:
            raise ValueError(f"backward() requires a scalar loss, got shape {self.shape}")
        order = _toposort(self)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            fn = node._backward
            if fn is None:
                continue
            grads = fn(node.grad)
            for parent, g in zip(node._parents, grads):
                if parent.requires_grad:
                    parent._accumulate(g)
        for node in order:
            if node._backward is not None:
                node._parents = ()
                node._backward = None
                node.grad = None


def _toposort(root: Tensor) -> list:
    order, visited, stack = [], set(), [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _elementwise(op, a: Tensor, b: Tensor, opname: str) -> np.ndarray:
    try:
        return op(a.data, b.data)
    except ValueError as exc:
        raise ShapeError(
            f"{opname} cannot broadcast shapes {a.shape} and {b.shape}"
        ) from exc


# Functional aliases, convenient for composing without method chains.

def add(a, b):
    return Tensor._lift(a) + b


def sub(a, b):
    return Tensor._lift(a) - b


def mul(a, b):
    return Tensor._lift(a) * b


def div(a, b):
    return Tensor._lift(a) / b


def matmul(a, b):
    return Tensor._lift(a).matmul(b)


def concat(tensors, axis: int = -1) -> Tensor:
    """Concatenate tensors along `axis`; backward splits the gradient."""
    tensors = [Tensor._lift(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    out = Tensor(data)
    if any(t.requires_grad for t in tensors):
        out.requires_grad = True
        out._parents = tuple(tensors)
        out._backward = backward
    return out
