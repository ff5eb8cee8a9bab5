"""Reverse-mode automatic differentiation over dense 64-bit arrays.

A Tensor wraps a numpy array and remembers how it was produced; calling
``backward()`` on a scalar result walks the recorded graph in reverse
topological order and accumulates gradients into every tensor that
requires them. Graphs are rebuilt on every forward pass; calling backward
again without clearing gradients adds another copy of the same gradient.
"""
from __future__ import annotations

from typing import Callable, Iterable, Optional

import numpy as np

from .errors import GraphError, NumericsError

# op backward: (upstream gradient, accumulate(parent, grad)) -> None
BackwardFn = Callable[[np.ndarray, Callable[["Tensor", np.ndarray], None]], None]


class Tensor:
    """An n-dimensional float64 array node in the autodiff graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        _parents: tuple["Tensor", ...] = (),
        _backward: Optional[BackwardFn] = None,
    ):
        self.data = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(self.data)):
            raise NumericsError("tensor holds non-finite values")
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64)
        else:
            self.grad += g

    def backward(self) -> None:
        """Populate ``grad`` on every tensor this scalar depends on."""
        if self.size != 1:
            raise GraphError(f"backward requires a scalar, got shape {self.shape}")
        if self._backward is None and not self._parents:
            raise GraphError("backward on a tensor detached from any computation")

        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited and parent.requires_grad:
                    stack.append((parent, False))

        # per-call gradients live in this dict; .grad only receives the
        # finished per-call value, so repeated backward adds exact copies
        pending: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}

        def accumulate(parent: "Tensor", g: np.ndarray) -> None:
            key = id(parent)
            if key in pending:
                pending[key] += g
            else:
                pending[key] = np.array(g, dtype=np.float64)

        for node in reversed(topo):
            g = pending.pop(id(node), None)
            if g is None:
                continue
            node.accumulate_grad(g)
            if node._backward is not None:
                node._backward(g, accumulate)

    # -- small algebra, mostly for tests and auxiliary computations --------

    def __add__(self, other) -> "Tensor":
        return add(self, _as_tensor(other))

    def __radd__(self, other) -> "Tensor":
        return add(_as_tensor(other), self)

    def __mul__(self, other) -> "Tensor":
        return mul(self, _as_tensor(other))

    def __rmul__(self, other) -> "Tensor":
        return mul(_as_tensor(other), self)

    def __sub__(self, other) -> "Tensor":
        return add(self, mul(_as_tensor(other), _as_tensor(-1.0)))

    def __neg__(self) -> "Tensor":
        return mul(self, _as_tensor(-1.0))

    def __pow__(self, exponent: float) -> "Tensor":
        return pow_scalar(self, exponent)

    def __matmul__(self, other) -> "Tensor":
        return matmul(self, _as_tensor(other))

    def sum(self) -> "Tensor":
        return tsum(self)

    def mean(self) -> "Tensor":
        return tmean(self)

    def reshape(self, *shape: int) -> "Tensor":
        return reshape(self, shape)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def _as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def make_op(data: np.ndarray, parents: Iterable[Tensor], backward: BackwardFn) -> Tensor:
    """Create a graph node; gradient tracking is inherited from the parents."""
    parents = tuple(parents)
    requires = any(p.requires_grad for p in parents)
    return Tensor(
        data,
        requires_grad=requires,
        _parents=parents if requires else (),
        _backward=backward if requires else None,
    )


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the original operand shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a: Tensor, b: Tensor) -> Tensor:
    def backward(g, accumulate):
        if a.requires_grad:
            accumulate(a, _unbroadcast(g, a.shape))
        if b.requires_grad:
            accumulate(b, _unbroadcast(g, b.shape))

    return make_op(a.data + b.data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    def backward(g, accumulate):
        if a.requires_grad:
            accumulate(a, _unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            accumulate(b, _unbroadcast(g * a.data, b.shape))

    return make_op(a.data * b.data, (a, b), backward)


def pow_scalar(a: Tensor, exponent: float) -> Tensor:
    def backward(g, accumulate):
        if a.requires_grad:
            accumulate(a, g * exponent * a.data ** (exponent - 1.0))

    return make_op(a.data**exponent, (a,), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    def backward(g, accumulate):
        if a.requires_grad:
            accumulate(a, g @ b.data.T)
        if b.requires_grad:
            accumulate(b, a.data.T @ g)

    return make_op(a.data @ b.data, (a, b), backward)


def tsum(a: Tensor) -> Tensor:
    def backward(g, accumulate):
        if a.requires_grad:
            accumulate(a, np.broadcast_to(g, a.shape))

    return make_op(a.data.sum(), (a,), backward)


def tmean(a: Tensor) -> Tensor:
    def backward(g, accumulate):
        if a.requires_grad:
            accumulate(a, np.broadcast_to(g / a.size, a.shape))

    return make_op(a.data.mean(), (a,), backward)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    old_shape = a.shape

    def backward(g, accumulate):
        if a.requires_grad:
            accumulate(a, g.reshape(old_shape))

    return make_op(a.data.reshape(shape), (a,), backward)
