"""Dense tensors recorded on a reverse-mode tape.

Every differentiable op appends its output node to a thread-local tape in
creation order; :func:`backward` walks that list in reverse, so gradient
contributions are accumulated in a fixed, reproducible order.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager

import numpy as np

_DTYPES = {"float32": np.float32, "float64": np.float64}

_local = threading.local()


class NumericError(FloatingPointError):
    """A NaN or infinity escaped an op."""


class ShapeError(ValueError):
    """Operand shapes are incompatible."""


class ContractError(ValueError):
    """A precondition of an op was violated."""


def _tls():
    if not hasattr(_local, "tape"):
        _local.tape = []
        _local.grad_enabled = True
        _local.dtype = np.float32
    return _local


def get_dtype():
    return _tls().dtype


def set_precision(name: str) -> None:
    """Select the default float type for new tensors: ``float32`` or ``float64``."""
    try:
        _tls().dtype = _DTYPES[name]
    except KeyError:
        raise ValueError(f"unknown precision {name!r}; use one of {sorted(_DTYPES)}") from None


@contextmanager
def precision(name: str):
    prev = get_dtype()
    set_precision(name)
    try:
        yield
    finally:
        _tls().dtype = prev


def grad_enabled() -> bool:
    return _tls().grad_enabled


@contextmanager
def no_grad():
    """Run ops without recording them on the tape."""
    state = _tls()
    prev = state.grad_enabled
    state.grad_enabled = False
    try:
        yield
    finally:
        state.grad_enabled = prev


def tape_size() -> int:
    return len(_tls().tape)


def reset_tape() -> None:
    """Drop every recorded node (and the references they hold)."""
    tape = _tls().tape
    for node in tape:
        node.parents = ()
        node.backward_fn = None
    tape.clear()


class Tensor:
    """An ndarray plus the bookkeeping a tape node needs.

    Leaves created by the user have no ``backward_fn``; gradients accumulate
    into their ``grad`` until cleared with :meth:`zero_grad`.
    """

    __slots__ = ("data", "grad", "parents", "backward_fn", "op", "requires_grad")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype.kind in "fiub":
            arr = arr.astype(get_dtype(), copy=False)
        if arr.ndim == 0:
            arr = arr.reshape(())
        self.data = arr
        self.grad = None
        self.parents = ()
        self.backward_fn = None
        self.op = "leaf"
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, op={self.op})"

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

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        return transpose(self, axes or None)

    def sum(self):
        return tensor_sum(self)


def _check_finite(arr: np.ndarray, op: str) -> None:
    if arr.dtype.kind == "f" and not np.isfinite(arr).all():
        raise NumericError(f"non-finite value produced by {op}")


def _const(x, like: Tensor) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=like.dtype))


def _node(data: np.ndarray, parents, backward_fn, op: str) -> Tensor:
    _check_finite(data, op)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.op = op
    out.parents = ()
    out.backward_fn = None
    out.requires_grad = False
    state = _tls()
    if state.grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.parents = tuple(parents)
        out.backward_fn = backward_fn
        state.tape.append(out)
    return out


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def backward(loss: Tensor) -> dict:
    """Backpropagate from scalar ``loss``; return ``{leaf: grad}``.

    Consumes the tape: after the call no recorded node keeps its parents.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    tape = _tls().tape
    loss.grad = np.ones_like(loss.data)
    leaves = {}
    if loss.backward_fn is None:
        if loss.requires_grad:
            leaves[loss] = loss.grad
        reset_tape()
        return leaves
    try:
        stop = len(tape) - 1 - tape[::-1].index(loss)
    except ValueError:
        raise ContractError("loss is not on the current tape") from None
    for i in range(stop, -1, -1):
        node = tape[i]
        if node.grad is None:
            continue
        grads = node.backward_fn(node.grad)
        for parent, g in zip(node.parents, grads):
            if g is None or not parent.requires_grad:
                continue
            parent.grad = g if parent.grad is None else parent.grad + g
            if parent.backward_fn is None:
                leaves[parent] = parent.grad
    for node in tape:
        node.grad = None
    for leaf in leaves:
        leaves[leaf] = leaf.grad
    loss.grad = np.ones_like(loss.data)
    reset_tape()
    return leaves


# ---------------------------------------------------------------------------
# Closed op set
# ---------------------------------------------------------------------------


def add(a, b) -> Tensor:
    a = a if isinstance(a, Tensor) else _const(a, b)
    b = _const(b, a)
    sa, sb = a.shape, b.shape

    def bw(g):
        return _unbroadcast(g, sa), _unbroadcast(g, sb)

    return _node(a.data + b.data, (a, b), bw, "add")


def sub(a, b) -> Tensor:
    a = a if isinstance(a, Tensor) else _const(a, b)
    b = _const(b, a)
    sa, sb = a.shape, b.shape

    def bw(g):
        return _unbroadcast(g, sa), _unbroadcast(-g, sb)

    return _node(a.data - b.data, (a, b), bw, "sub")


def mul(a, b) -> Tensor:
    a = a if isinstance(a, Tensor) else _const(a, b)
    b = _const(b, a)
    av, bv = a.data, b.data

    def bw(g):
        ga = _unbroadcast(g * bv, av.shape) if a.requires_grad else None
        gb = _unbroadcast(g * av, bv.shape) if b.requires_grad else None
        return ga, gb

    return _node(av * bv, (a, b), bw, "mul")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product over the last two axes."""
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs rank >= 2 operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    av, bv = a.data, b.data

    def bw(g):
        ga = gb = None
        if a.requires_grad:
            ga = _unbroadcast(g @ np.swapaxes(bv, -1, -2), av.shape)
        if b.requires_grad:
            if bv.ndim == 2 and av.ndim > 2:
                k = av.shape[-1]
                gb = av.reshape(-1, k).T @ g.reshape(-1, g.shape[-1])
            else:
                gb = _unbroadcast(np.swapaxes(av, -1, -2) @ g, bv.shape)
        return ga, gb

    return _node(av @ bv, (a, b), bw, "matmul")


def transpose(x: Tensor, axes=None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))

    def bw(g):
        return (np.transpose(g, inv),)

    return _node(np.transpose(x.data, axes), (x,), bw, "transpose")


def reshape(x: Tensor, shape) -> Tensor:
    orig = x.shape

    def bw(g):
        return (g.reshape(orig),)

    return _node(x.data.reshape(shape), (x,), bw, "reshape")


def tensor_sum(x: Tensor) -> Tensor:
    shape = x.shape

    def bw(g):
        return (np.broadcast_to(g, shape).copy(),)

    return _node(np.asarray(x.data.sum(), dtype=x.dtype), (x,), bw, "sum")


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _node(y, (x,), bw, "softmax")


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeError(f"layer_norm affine shapes {gamma.shape}/{beta.shape} do not match last dim {d}")
    xv = x.data
    mu = xv.mean(axis=-1, keepdims=True)
    xc = xv - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        rstd = 1.0 / np.sqrt(var + eps)
    xhat = xc * rstd
    _check_finite(xhat, "layer_norm")
    gv = gamma.data

    def bw(g):
        lead = tuple(range(g.ndim - 1))
        dgamma = (g * xhat).sum(axis=lead)
        dbeta = g.sum(axis=lead)
        dxhat = g * gv
        dx = rstd * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                     - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
        return dx, dgamma, dbeta

    return _node(xhat * gv + beta.data, (x, gamma, beta), bw, "layer_norm")


def embedding(table: Tensor, ids) -> Tensor:
    """Gather rows of ``table`` by integer ``ids`` (any shape)."""
    ids = np.asarray(ids)
    if ids.dtype.kind not in "iu":
        raise ContractError("embedding ids must be integers")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ContractError(f"embedding id out of range [0, {table.shape[0]})")
    shape = table.shape

    def bw(g):
        gt = np.zeros(shape, dtype=g.dtype)
        np.add.at(gt, ids.reshape(-1), g.reshape(-1, shape[1]))
        return (gt,)

    return _node(table.data[ids], (table,), bw, "embedding")


def cross_entropy(logits: Tensor, targets, mask) -> Tensor:
    """Mean negative log-likelihood of ``targets`` over positions where ``mask`` holds."""
    targets = np.asarray(targets)
    mask = np.asarray(mask, dtype=bool)
    if logits.shape[:-1] != targets.shape or targets.shape != mask.shape:
        raise ShapeError(f"cross_entropy shapes differ: logits {logits.shape}, targets {targets.shape}, mask {mask.shape}")
    count = int(mask.sum())
    if count == 0:
        raise ContractError("cross_entropy over an all-padding target")
    lv = logits.data
    m = lv.max(axis=-1, keepdims=True)
    e = np.exp(lv - m)
    z = e.sum(axis=-1, keepdims=True)
    logp = lv - m - np.log(z)
    picked = np.take_along_axis(logp, targets[..., None], axis=-1)[..., 0]
    w = mask.astype(lv.dtype)
    loss = -(picked * w).sum() / count

    def bw(g):
        p = e / z
        np.put_along_axis(p, targets[..., None], np.take_along_axis(p, targets[..., None], axis=-1) - 1.0, axis=-1)
        return (p * (w[..., None] * (g / count)),)

    return _node(np.asarray(loss, dtype=lv.dtype), (logits,), bw, "cross_entropy")


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = list(tensors)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        return tuple(np.split(g, splits, axis=axis))

    return _node(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), bw, "concat")


def masked_fill(x: Tensor, mask, value: float) -> Tensor:
    """Replace entries where ``mask`` (broadcastable to ``x``) is true by ``value``."""
    mask = np.asarray(mask, dtype=bool)
    try:
        full = np.broadcast_to(mask, x.shape)
    except ValueError:
        raise ShapeError(f"mask shape {mask.shape} does not broadcast to {x.shape}") from None
    keep = ~full

    def bw(g):
        return (g * keep,)

    return _node(np.where(full, np.asarray(value, dtype=x.dtype), x.data), (x,), bw, "masked_fill")


_GELU_C = np.sqrt(2.0 / np.pi)


def gelu(x: Tensor) -> Tensor:
    """tanh-approximated GELU."""
    xv = x.data
    inner = _GELU_C * (xv + 0.044715 * xv ** 3)
    th = np.tanh(inner)
    y = 0.5 * xv * (1.0 + th)

    def bw(g):
        dinner = _GELU_C * (1.0 + 3 * 0.044715 * xv ** 2)
        return (g * (0.5 * (1.0 + th) + 0.5 * xv * (1.0 - th * th) * dinner).astype(xv.dtype),)

    return _node(y.astype(xv.dtype, copy=False), (x,), bw, "gelu")


def dropout(x: Tensor, rate: float, rng) -> Tensor:
    """Inverted dropout; identity when ``rate`` is 0 or ``rng`` is None."""
    if rate <= 0.0 or rng is None:
        return x
    keep = rng.random(x.shape) >= rate
    return mul(x, keep.astype(x.dtype) / (1.0 - rate))
