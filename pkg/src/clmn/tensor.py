"""Dense float64 tensors with a reverse-mode gradient tape.

Every operation that touches a tensor with ``requires_grad=True`` records a
closure computing the vector-Jacobian product for its inputs; :meth:`Tensor.backward`
replays those closures in reverse topological order.  Broadcasting follows numpy
rules and gradients are summed back to each operand's shape.
"""

from __future__ import annotations

import contextlib
import threading
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import GradientError, ShapeError

_state = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (inference only)."""
    prev = is_grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = prev


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.array(data, dtype=np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable | None = None
        self.name = name

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "Tensor":
        t = cls.__new__(cls)
        t.data = arr
        t.requires_grad = False
        t.grad = None
        t._parents = ()
        t._backward = None
        t.name = None
        return t

    # -- basic properties -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def tape_node(self) -> int | None:
        """Identifier of this tensor's node on the tape, or None for leaves and constants."""
        return id(self) if self._backward is not None else None

    def item(self) -> float:
        return float(self.data.item())

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def detach(self) -> "Tensor":
        return Tensor._wrap(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    def __len__(self) -> int:
        return len(self.data)

    # -- backward ---------------------------------------------------------
    def backward(self) -> None:
        """Accumulate d(self)/d(t) into ``t.grad`` for every reachable tensor."""
        if self.data.size != 1 or self.data.ndim > 1:
            raise GradientError(f"backward() requires a scalar tensor, got shape {self.shape}")
        if self._backward is None:
            raise GradientError("backward() called on a tensor that is not on the tape")

        order = _toposort(self)
        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in order:
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.grad is None:
                node.grad = g.copy()
            else:
                node.grad = node.grad + g
            if node._backward is None:
                continue
            parent_grads = node._backward(g)
            for parent, pg in zip(node._parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg

    # -- operator sugar ---------------------------------------------------
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

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def sum(self, axis=None, keepdims: bool = False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        return mean(self, axis, keepdims)

    def max(self, axis=None):
        return tmax(self, axis)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    @property
    def T(self):
        return transpose(self)

    def tanh(self):
        return tanh(self)

    def sigmoid(self):
        return sigmoid(self)


def _toposort(root: Tensor) -> list[Tensor]:
    # iterative post-order DFS; deep LSTM graphs would overflow recursion
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in reversed(node._parents):
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))
    order.reverse()
    return order


def as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor._wrap(np.asarray(x, dtype=np.float64))


def _result(arr: np.ndarray, parents: Sequence[Tensor], backward: Callable) -> Tensor:
    out = Tensor._wrap(arr)
    if is_grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def _broadcast_check(opname: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{opname}: shapes {a.shape} and {b.shape} are not broadcast-compatible") from None


# -- elementwise binary ---------------------------------------------------
def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("add", a, b)

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _result(a.data + b.data, (a, b), bw)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("sub", a, b)

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _result(a.data - b.data, (a, b), bw)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("mul", a, b)

    def bw(g):
        ga = _unbroadcast(g * b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(g * a.data, b.shape) if b.requires_grad else None
        return ga, gb

    return _result(a.data * b.data, (a, b), bw)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("div", a, b)
    out = a.data / b.data

    def bw(g):
        ga = _unbroadcast(g / b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(-g * out / b.data, b.shape) if b.requires_grad else None
        return ga, gb

    return _result(out, (a, b), bw)


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _result(-a.data, (a,), lambda g: (-g,))


def square(a) -> Tensor:
    a = as_tensor(a)
    return _result(a.data * a.data, (a,), lambda g: (2.0 * a.data * g,))


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    out = np.sqrt(a.data)
    return _result(out, (a,), lambda g: (g / (2.0 * out),))


# -- elementwise unary ----------------------------------------------------
def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _result(out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    # tanh form is overflow-free for large |x|
    out = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return _result(out, (a,), lambda g: (g * out * (1.0 - out),))


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return _result(out, (a,), lambda g: (g * out,))


def log(a) -> Tensor:
    a = as_tensor(a)
    return _result(np.log(a.data), (a,), lambda g: (g / a.data,))


def relu(a) -> Tensor:
    a = as_tensor(a)
    pos = a.data > 0
    return _result(np.where(pos, a.data, 0.0), (a,), lambda g: (g * pos,))


# -- linear algebra -------------------------------------------------------
def matmul(a, b) -> Tensor:
    """Matrix product with numpy ``@`` semantics for operands of rank >= 1."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim == 0 or b.ndim == 0:
        raise ShapeError("matmul: scalar operands are not allowed")
    ka = a.shape[-1]
    kb = b.shape[0] if b.ndim == 1 else b.shape[-2]
    if ka != kb:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} @ {b.shape}")
    # promote vectors to matrices so one backward rule covers every rank
    ad = a.data if a.ndim > 1 else a.data[None, :]
    bd = b.data if b.ndim > 1 else b.data[:, None]
    out = ad @ bd
    if b.ndim == 1:
        out = out[..., 0]
    if a.ndim == 1:
        out = out[..., 0, :] if b.ndim > 1 else out[..., 0]

    def bw(g):
        g2 = g
        if b.ndim == 1:
            g2 = g2[..., None]
        if a.ndim == 1:
            g2 = np.expand_dims(g2, -2)
        ga = gb = None
        if a.requires_grad:
            ga = _unbroadcast(g2 @ np.swapaxes(bd, -1, -2), ad.shape).reshape(a.shape)
        if b.requires_grad:
            gb = _unbroadcast(np.swapaxes(ad, -1, -2) @ g2, bd.shape).reshape(b.shape)
        return ga, gb

    return _result(np.asarray(out), (a, b), bw)


def dot(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
        raise ShapeError(f"dot: expected two equal-length vectors, got {a.shape} and {b.shape}")
    return matmul(a, b)


def transpose(a, axes: Sequence[int] | None = None) -> Tensor:
    a = as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    inv = np.argsort(axes)
    return _result(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inv),))


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot reshape {a.shape} into {tuple(shape)}") from None
    return _result(out, (a,), lambda g: (g.reshape(a.shape),))


def _is_basic_index(idx) -> bool:
    items = idx if isinstance(idx, tuple) else (idx,)
    return all(isinstance(i, (int, slice, type(None), type(Ellipsis))) for i in items)


def getitem(a, idx) -> Tensor:
    a = as_tensor(a)
    out = a.data[idx]
    basic = _is_basic_index(idx)

    def bw(g):
        ga = np.zeros_like(a.data)
        if basic:
            ga[idx] = g
        else:
            np.add.at(ga, idx, g)
        return (ga,)

    return _result(np.asarray(out), (a,), bw)


def concat(tensors: Iterable, axis: int = -1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise ShapeError("concat: no tensors given")
    try:
        out = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError as e:
        raise ShapeError(f"concat: {e}") from None
    ax = axis % out.ndim
    bounds = np.cumsum([t.shape[ax] for t in ts])[:-1]

    def bw(g):
        return tuple(np.split(g, bounds, axis=ax))

    return _result(out, ts, bw)


def stack(tensors: Iterable, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise ShapeError("stack: no tensors given")
    try:
        out = np.stack([t.data for t in ts], axis=axis)
    except ValueError as e:
        raise ShapeError(f"stack: {e}") from None
    ax = axis % out.ndim

    def bw(g):
        return tuple(np.take(g, i, axis=ax) for i in range(len(ts)))

    return _result(out, ts, bw)


# -- reductions -----------------------------------------------------------
def _expand_grad(g: np.ndarray, shape, axis, keepdims: bool) -> np.ndarray:
    if axis is None:
        return np.broadcast_to(np.reshape(g, (1,) * len(shape)), shape)
    if not keepdims:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        axes = tuple(ax % len(shape) for ax in axes)
        for ax in sorted(axes):
            g = np.expand_dims(g, ax)
    return np.broadcast_to(g, shape)


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out = np.asarray(a.data.sum(axis=axis, keepdims=keepdims))
    return _result(out, (a,), lambda g: (np.array(_expand_grad(g, a.shape, axis, keepdims)),))


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    if axis is None:
        n = a.size
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        n = int(np.prod([a.shape[ax] for ax in axes]))
    if n == 0:
        raise ShapeError(f"mean: empty reduction over shape {a.shape}")
    out = np.asarray(a.data.mean(axis=axis, keepdims=keepdims))
    return _result(out, (a,), lambda g: (np.array(_expand_grad(g, a.shape, axis, keepdims)) / n,))


def tmax(a, axis: int | None = None) -> Tensor:
    """Maximum; the gradient flows to the first maximal element only."""
    a = as_tensor(a)
    if a.size == 0:
        raise ShapeError("max: empty reduction")
    if axis is None:
        flat = int(np.argmax(a.data))

        def bw_all(g):
            ga = np.zeros_like(a.data)
            ga.flat[flat] = g
            return (ga,)

        return _result(np.asarray(a.data.flat[flat]), (a,), bw_all)
    ax = axis % a.ndim
    idx = np.expand_dims(np.argmax(a.data, axis=ax), ax)
    out = np.take_along_axis(a.data, idx, axis=ax).squeeze(ax)

    def bw(g):
        ga = np.zeros_like(a.data)
        np.put_along_axis(ga, idx, np.expand_dims(g, ax), axis=ax)
        return (ga,)

    return _result(out, (a,), bw)


def masked_max(a, mask, axis: int) -> Tensor:
    """Max over ``axis`` restricted to positions where ``mask`` is true.

    Reductions with no true position yield 0.  Ties route the gradient to the
    lowest index.
    """
    a = as_tensor(a)
    m = np.broadcast_to(np.asarray(mask, dtype=bool), a.shape)
    ax = axis % a.ndim
    filled = np.where(m, a.data, -np.inf)
    idx = np.expand_dims(np.argmax(filled, axis=ax), ax)
    any_real = m.any(axis=ax)
    out = np.take_along_axis(a.data, idx, axis=ax).squeeze(ax)
    out = np.where(any_real, out, 0.0)

    def bw(g):
        ga = np.zeros_like(a.data)
        np.put_along_axis(ga, idx, np.expand_dims(np.where(any_real, g, 0.0), ax), axis=ax)
        return (ga,)

    return _result(out, (a,), bw)


def masked_mean(a, mask, axis: int) -> Tensor:
    """Mean over ``axis`` restricted to masked-in positions; empty reductions yield 0."""
    a = as_tensor(a)
    m = np.asarray(mask, dtype=np.float64)
    m = np.broadcast_to(m, a.shape) if m.shape != a.shape else m
    count = np.maximum(m.sum(axis=axis), 1.0)
    return tsum(a * m, axis=axis) / count


def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    if a.ndim == 0 or a.shape[axis] == 0:
        raise ShapeError(f"softmax: empty axis {axis} in shape {a.shape}")
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        return ((g - (g * out).sum(axis=axis, keepdims=True)) * out,)

    return _result(out, (a,), bw)


def log_softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    if a.ndim == 0 or a.shape[axis] == 0:
        raise ShapeError(f"log_softmax: empty axis {axis} in shape {a.shape}")
    z = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    out = z - lse
    sm = np.exp(out)

    def bw(g):
        return (g - sm * g.sum(axis=axis, keepdims=True),)

    return _result(out, (a,), bw)


def cross_entropy(logits, labels) -> Tensor:
    """Per-row categorical cross-entropy of (B, C) logits against integer labels (B,)."""
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError(f"cross_entropy: logits {logits.shape} vs labels {labels.shape}")
    if logits.shape[1] == 0:
        raise ShapeError("cross_entropy: zero classes")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(len(labels))
    out = lse - z[rows, labels]

    def bw(g):
        p = np.exp(z - lse[:, None])
        p[rows, labels] -= 1.0
        return (p * g[:, None],)

    return _result(out, (logits,), bw)


# -- distances ------------------------------------------------------------
def squared_distance(a, b, axis: int = -1) -> Tensor:
    d = sub(a, b)
    return tsum(square(d), axis=axis)


def euclidean_distance(a, b, axis: int = -1) -> Tensor:
    """Euclidean norm of ``a - b``; the gradient at zero distance is defined as 0."""
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("euclidean_distance", a, b)
    diff = a.data - b.data
    out = np.sqrt((diff * diff).sum(axis=axis))

    def bw(g):
        safe = np.where(out > 0, out, 1.0)
        unit = diff / np.expand_dims(safe, axis) * np.expand_dims(out > 0, axis)
        ga = np.expand_dims(g, axis) * unit
        return _unbroadcast(ga, a.shape), _unbroadcast(-ga, b.shape)

    return _result(np.asarray(out), (a, b), bw)


def cosine_similarity(a, b, axis: int = -1, eps: float = 1e-12) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("cosine_similarity", a, b)
    num = tsum(a * b, axis=axis)
    na = sqrt(tsum(square(a), axis=axis) + eps)
    nb = sqrt(tsum(square(b), axis=axis) + eps)
    return num / (na * nb)


# -- convolution helper ---------------------------------------------------
def unfold1d(x, width: int) -> Tensor:
    """Same-padded sliding windows: (N, T, E) -> (N, T, width * E).

    Window t covers positions t - (width-1)//2 .. t + width//2, zero outside [0, T).
    """
    x = as_tensor(x)
    if x.ndim != 3:
        raise ShapeError(f"unfold1d: expected (N, T, E), got {x.shape}")
    n, t, e = x.shape
    left = (width - 1) // 2
    right = width - 1 - left
    padded = np.pad(x.data, ((0, 0), (left, right), (0, 0)))
    out = np.concatenate([padded[:, k:k + t] for k in range(width)], axis=2)

    def bw(g):
        g = g.reshape(n, t, width, e)
        gp = np.zeros_like(padded)
        for k in range(width):
            gp[:, k:k + t] += g[:, :, k]
        return (gp[:, left:left + t],)

    return _result(out, (x,), bw)


def scatter_rows(x, index, n_rows: int) -> Tensor:
    """Place the rows of ``x`` (R, ...) at ``index`` (R,) in a zero tensor of ``n_rows`` rows."""
    x = as_tensor(x)
    index = np.asarray(index, dtype=np.int64)
    if index.shape != (x.shape[0],):
        raise ShapeError(f"scatter_rows: {index.shape[0] if index.ndim else 0} indices for {x.shape[0]} rows")
    if len(np.unique(index)) != len(index):
        raise ShapeError("scatter_rows: duplicate target rows")
    out = np.zeros((n_rows,) + x.shape[1:])
    out[index] = x.data
    return _result(out, (x,), lambda g: (g[index],))
