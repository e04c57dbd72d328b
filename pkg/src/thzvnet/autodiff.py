"""Minimal reverse-mode automatic differentiation on numpy arrays.

Double precision throughout; deterministic: identical inputs replay the same
op order and produce bit-identical values and gradients. Covers exactly the
primitives the dense layers, aggregation functions, and the binary
cross-entropy loss need; no broadcasting beyond standard numpy rules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

BCE_CLAMP = 1e-12  # sigmoid outputs are clamped to [BCE_CLAMP, 1-BCE_CLAMP]


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcast gradient back to the original operand shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, (g, s) in enumerate(zip(grad.shape, shape)):
        if s == 1 and g != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """A numpy array plus the bookkeeping reverse mode needs."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self.grad: np.ndarray | None = None
        self._parents = _parents if self.requires_grad else ()
        self._backward = _backward if self.requires_grad else None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def _accumulate(self, g: np.ndarray) -> None:
        g = _unbroadcast(np.asarray(g, dtype=np.float64), self.data.shape)
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_ensure(other), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        out_data = self.data[key]

        def bw(g, self=self, key=key):
            full = np.zeros_like(self.data)
            full[key] = g
            self._accumulate(full)

        return Tensor(out_data, _parents=(self,), _backward=bw)

    # -- reductions ---------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False):
        out_data = self.data.sum(axis=axis, keepdims=keepdims)

        def bw(g, self=self, axis=axis, keepdims=keepdims):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            self._accumulate(np.broadcast_to(g, self.data.shape))

        return Tensor(out_data, _parents=(self,), _backward=bw)

    def mean(self, axis=None, keepdims: bool = False):
        count = self.data.size if axis is None else self.data.shape[axis]
        return scale(self.sum(axis=axis, keepdims=keepdims), 1.0 / count)

    def max(self, axis=None, keepdims: bool = False):
        out_data = self.data.max(axis=axis, keepdims=keepdims)

        def bw(g, self=self, axis=axis, keepdims=keepdims, out_data=out_data):
            full_max = out_data if keepdims or axis is None else np.expand_dims(out_data, axis)
            gg = g if keepdims or axis is None else np.expand_dims(g, axis)
            mask = (self.data == full_max).astype(np.float64)
            counts = mask.sum(axis=axis, keepdims=True) if axis is not None else mask.sum()
            self._accumulate(mask / counts * gg)

        return Tensor(out_data, _parents=(self,), _backward=bw)

    def reshape(self, *shape):
        out_data = self.data.reshape(*shape)

        def bw(g, self=self):
            self._accumulate(g.reshape(self.data.shape))

        return Tensor(out_data, _parents=(self,), _backward=bw)

    def transpose(self, axes):
        out_data = self.data.transpose(axes)
        inverse = np.argsort(axes)

        def bw(g, self=self, inverse=inverse):
            self._accumulate(g.transpose(inverse))

        return Tensor(out_data, _parents=(self,), _backward=bw)


def _ensure(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


@dataclass
class Tape:
    """Topologically ordered record of the graph below one output tensor.

    Reverse traversal visits every node after all of its consumers, which is
    exactly the order gradient accumulation requires.
    """

    nodes: list[Tensor]

    @classmethod
    def from_output(cls, out: Tensor) -> "Tape":
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(out, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        return cls(order)

    def run_backward(self, out: Tensor) -> None:
        if out.data.size != 1:
            raise ValueError("backward() expects a scalar output")
        out.grad = np.ones_like(out.data)
        for node in reversed(self.nodes):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def backward(out: Tensor) -> None:
    """Populate .grad on every tensor below out (out must be scalar)."""
    Tape.from_output(out).run_backward(out)


# -- primitives --------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _ensure(a), _ensure(b)
    out = Tensor(a.data + b.data, _parents=(a, b),
                 _backward=lambda g: (a._accumulate(g), b._accumulate(g)))
    return out


def sub(a, b) -> Tensor:
    a, b = _ensure(a), _ensure(b)
    return Tensor(a.data - b.data, _parents=(a, b),
                  _backward=lambda g: (a._accumulate(g), b._accumulate(-g)))


def mul(a, b) -> Tensor:
    a, b = _ensure(a), _ensure(b)
    return Tensor(a.data * b.data, _parents=(a, b),
                  _backward=lambda g: (a._accumulate(g * b.data),
                                       b._accumulate(g * a.data)))


def div(a, b) -> Tensor:
    a, b = _ensure(a), _ensure(b)
    return Tensor(a.data / b.data, _parents=(a, b),
                  _backward=lambda g: (a._accumulate(g / b.data),
                                       b._accumulate(-g * a.data / (b.data ** 2))))


def scale(a, c: float) -> Tensor:
    a = _ensure(a)
    return Tensor(a.data * c, _parents=(a,),
                  _backward=lambda g: a._accumulate(g * c))


def matmul(a, b) -> Tensor:
    a, b = _ensure(a), _ensure(b)
    out_data = a.data @ b.data

    def bw(g):
        a._accumulate(g @ np.swapaxes(b.data, -1, -2))
        b._accumulate(np.swapaxes(a.data, -1, -2) @ g)

    return Tensor(out_data, _parents=(a, b), _backward=bw)


def matvec(w, x) -> Tensor:
    """Matrix (m, n) times vector (n,) -> vector (m,)."""
    w, x = _ensure(w), _ensure(x)
    if w.ndim != 2 or x.ndim != 1 or w.shape[1] != x.shape[0]:
        raise ValueError(f"matvec shape mismatch: {w.shape} @ {x.shape}")
    return matmul(w, x.reshape(-1, 1)).reshape(-1)


def concat(tensors: list[Tensor], axis: int = -1) -> Tensor:
    tensors = [_ensure(t) for t in tensors]
    shapes = [t.data.shape for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [s[axis] for s in shapes]
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            t._accumulate(g[tuple(idx)])

    return Tensor(out_data, _parents=tuple(tensors), _backward=bw)


def relu(a) -> Tensor:
    a = _ensure(a)
    mask = (a.data > 0).astype(np.float64)
    return Tensor(a.data * mask, _parents=(a,),
                  _backward=lambda g: a._accumulate(g * mask))


def leaky_relu(a, alpha: float = 0.2) -> Tensor:
    a = _ensure(a)
    slope = np.where(a.data > 0, 1.0, alpha)
    return Tensor(a.data * slope, _parents=(a,),
                  _backward=lambda g: a._accumulate(g * slope))


def sigmoid(a) -> Tensor:
    a = _ensure(a)
    # Numerically stable two-sided form.
    s = np.where(a.data >= 0, 1.0 / (1.0 + np.exp(-np.abs(a.data))),
                 np.exp(-np.abs(a.data)) / (1.0 + np.exp(-np.abs(a.data))))
    return Tensor(s, _parents=(a,),
                  _backward=lambda g: a._accumulate(g * s * (1.0 - s)))


def log(a) -> Tensor:
    a = _ensure(a)
    return Tensor(np.log(a.data), _parents=(a,),
                  _backward=lambda g: a._accumulate(g / a.data))


def exp(a) -> Tensor:
    a = _ensure(a)
    out_data = np.exp(a.data)
    return Tensor(out_data, _parents=(a,),
                  _backward=lambda g: a._accumulate(g * out_data))


def sqrt(a) -> Tensor:
    a = _ensure(a)
    out_data = np.sqrt(a.data)
    return Tensor(out_data, _parents=(a,),
                  _backward=lambda g: a._accumulate(g * 0.5 / out_data))


def clip(a, lo: float, hi: float) -> Tensor:
    """Clamp values; gradient passes through the un-clamped region only."""
    a = _ensure(a)
    mask = ((a.data >= lo) & (a.data <= hi)).astype(np.float64)
    return Tensor(np.clip(a.data, lo, hi), _parents=(a,),
                  _backward=lambda g: a._accumulate(g * mask))


def softmax(a, axis: int = -1) -> Tensor:
    a = _ensure(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        inner = (g * s).sum(axis=axis, keepdims=True)
        a._accumulate(s * (g - inner))

    return Tensor(s, _parents=(a,), _backward=bw)


def bce_loss(y: Tensor, z) -> Tensor:
    """Binary cross entropy between raw scores y and binary targets z.

    Applies the sigmoid internally, with outputs clamped away from 0 and 1 so
    the logs stay finite at any score.
    """
    y = _ensure(y)
    z_arr = np.asarray(z, dtype=np.float64)
    if z_arr.shape != y.data.shape:
        raise ValueError(f"bce_loss shape mismatch: scores {y.data.shape} "
                         f"vs targets {z_arr.shape}")
    p = clip(sigmoid(y), BCE_CLAMP, 1.0 - BCE_CLAMP)
    loss = sub(scale(mul(Tensor(z_arr), log(p)), -1.0),
               mul(Tensor(1.0 - z_arr), log(sub(Tensor(np.ones_like(z_arr)), p))))
    return loss.sum()


def grad_check(f, x: Tensor, eps: float = 1e-6) -> float:
    """Max relative error between tape gradients and central differences.

    f maps a Tensor to a scalar Tensor; x is perturbed componentwise.
    """
    x.zero_grad()
    out = f(x)
    backward(out)
    analytic = np.zeros_like(x.data) if x.grad is None else x.grad.copy()

    numeric = np.zeros_like(x.data)
    flue = x.data.reshape(-1)
    num_flat = numeric.reshape(-1)
    for i in range(flue.size):
        orig = flue[i]
        flue[i] = orig + eps
        hi = float(f(Tensor(x.data, requires_grad=False)).data)
        flue[i] = orig - eps
        lo = float(f(Tensor(x.data, requires_grad=False)).data)
        flue[i] = orig
        num_flat[i] = (hi - lo) / (2.0 * eps)

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))


def sgd_step(params: dict[str, Tensor], grads: dict[str, np.ndarray],
             lr: float) -> dict[str, Tensor]:
    """Plain gradient descent: p <- p - lr * g, elementwise, in place."""
    for name, p in params.items():
        g = grads.get(name)
        if g is not None:
            p.data = p.data - lr * g
    return params


def uniform_init(rng: np.random.Generator, shape: tuple[int, ...],
                 fan_in: int) -> Tensor:
    """Weight init: uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)]."""
    bound = 1.0 / math.sqrt(max(fan_in, 1))
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)
