"""Reverse-mode automatic differentiation over dense float64 numpy arrays.

Every operation returns a new :class:`Tensor` and, while gradients are
enabled, records itself on the output node (parents + backward closure).
:func:`grad` linearizes the recorded graph into an ordered tape and replays
it backward, accumulating adjoints for the requested leaves.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "NonFiniteError",
    "grad",
    "no_grad",
    "finite_checks",
    "add",
    "sub",
    "mul",
    "neg",
    "matmul",
    "linear",
    "attention_scores",
    "transpose",
    "reshape",
    "concat",
    "narrow",
    "gather_rows",
    "relu",
    "tanh",
    "sigmoid",
    "exp",
    "log",
    "logsigmoid",
    "tsum",
    "tmean",
    "logsumexp",
    "masked_softmax",
    "layer_norm",
    "logabsdet",
]


class NonFiniteError(RuntimeError):
    """Raised when a primitive produces a non-finite value (checks enabled)."""


_GRAD_ENABLED = True
_FINITE_CHECKS = False


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (forward values only)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


@contextlib.contextmanager
def finite_checks(enabled: bool = True):
    """Validate every primitive output for NaN/Inf inside the block.

    Off by default: the per-op scan roughly doubles the cost of small-array
    workloads. Training loops re-run a failing evaluation under this context
    to name the offending primitive.
    """
    global _FINITE_CHECKS
    prev = _FINITE_CHECKS
    _FINITE_CHECKS = enabled
    try:
        yield
    finally:
        _FINITE_CHECKS = prev


class Tensor:
    """Immutable dense float64 array node in the computation graph."""

    __slots__ = ("data", "requires_grad", "_parents", "_bwd", "_opname")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._bwd: Callable[[np.ndarray], tuple] | None = None
        self._opname = "leaf"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, op={self._opname})"

    # -- operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return mul(self, Tensor(1.0 / other))
        raise TypeError("tensor division is only supported by python scalars")

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _lift(other))

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes if axes else None)


def _lift(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x)


def _check(name: str, arr: np.ndarray) -> None:
    if _FINITE_CHECKS and not np.isfinite(arr).all():
        raise NonFiniteError(f"primitive '{name}' produced a non-finite value")


def _make(name: str, data: np.ndarray, parents: Sequence[Tensor], bwd) -> Tensor:
    _check(name, data)
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._bwd = bwd
        out._opname = name
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum gradient over the axes that numpy broadcasting expanded."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gd, sd) in enumerate(zip(g.shape, shape)) if sd == 1 and gd != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# -- arithmetic ----------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    data = a.data + b.data

    def bwd(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _make("add", data, (a, b), bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    data = a.data - b.data

    def bwd(g):
        return _unbroadcast(g, a.data.shape), -_unbroadcast(g, b.data.shape)

    return _make("sub", data, (a, b), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    data = a.data * b.data

    def bwd(g):
        ga = _unbroadcast(g * b.data, a.data.shape) if a.requires_grad else None
        gb = _unbroadcast(g * a.data, b.data.shape) if b.requires_grad else None
        return ga, gb

    return _make("mul", data, (a, b), bwd)


def neg(a: Tensor) -> Tensor:
    return _make("neg", -a.data, (a,), lambda g: (-g,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError("matmul expects operands with at least 2 dimensions")
    data = a.data @ b.data

    def bwd(g):
        ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.data.shape) if a.requires_grad else None
        gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.data.shape) if b.requires_grad else None
        return ga, gb

    return _make("matmul", data, (a, b), bwd)


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """Fused x @ w + b; ``b`` broadcasts over the row axes."""
    data = x.data @ w.data
    if b is not None:
        data += b.data

    if b is None:

        def bwd(g):
            gx = _unbroadcast(g @ np.swapaxes(w.data, -1, -2), x.data.shape) if x.requires_grad else None
            gw = _unbroadcast(np.swapaxes(x.data, -1, -2) @ g, w.data.shape) if w.requires_grad else None
            return gx, gw

        return _make("linear", data, (x, w), bwd)

    def bwd(g):
        gx = _unbroadcast(g @ np.swapaxes(w.data, -1, -2), x.data.shape) if x.requires_grad else None
        gw = _unbroadcast(np.swapaxes(x.data, -1, -2) @ g, w.data.shape) if w.requires_grad else None
        gb = _unbroadcast(g, b.data.shape) if b.requires_grad else None
        return gx, gw, gb

    return _make("linear", data, (x, w, b), bwd)


def attention_scores(q: Tensor, k: Tensor, scale: float) -> Tensor:
    """Fused scale * q @ k^T over the last two axes."""
    data = q.data @ np.swapaxes(k.data, -1, -2)
    data *= scale

    def bwd(g):
        gq = scale * (g @ k.data) if q.requires_grad else None
        gk = scale * (np.swapaxes(g, -1, -2) @ q.data) if k.requires_grad else None
        return gq, gk

    return _make("attention_scores", data, (q, k), bwd)


# -- shape surgery -------------------------------------------------------


def transpose(a: Tensor, axes: tuple[int, ...] | None = None) -> Tensor:
    data = np.transpose(a.data, axes)
    if axes is None:
        inv = None
    else:
        inv = tuple(np.argsort(axes))

    def bwd(g):
        return (np.transpose(g, inv),)

    return _make("transpose", data, (a,), bwd)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    old = a.data.shape
    data = a.data.reshape(shape)

    def bwd(g):
        return (g.reshape(old),)

    return _make("reshape", data, (a,), bwd)


def concat(parts: Iterable[Tensor], axis: int = 0) -> Tensor:
    parts = list(parts)
    data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.split(g, splits, axis=axis))

    return _make("concat", data, parts, bwd)


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice [start, start+length) along one axis."""
    idx = [slice(None)] * a.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)
    data = a.data[idx]

    def bwd(g):
        full = np.zeros_like(a.data)
        full[idx] = g
        return (full,)

    return _make("narrow", data, (a,), bwd)


def gather_rows(a: Tensor, index: np.ndarray) -> Tensor:
    """Select rows a[index] (first axis); duplicates accumulate in backward."""
    index = np.asarray(index, dtype=np.intp)
    data = a.data[index]

    def bwd(g):
        full = np.zeros_like(a.data)
        np.add.at(full, index, g)
        return (full,)

    return _make("gather_rows", data, (a,), bwd)


# -- pointwise nonlinearities --------------------------------------------


def relu(a: Tensor) -> Tensor:
    data = np.maximum(a.data, 0.0)

    def bwd(g):
        return (g * (a.data > 0.0),)

    return _make("relu", data, (a,), bwd)


def tanh(a: Tensor) -> Tensor:
    data = np.tanh(a.data)

    def bwd(g):
        return (g * (1.0 - data * data),)

    return _make("tanh", data, (a,), bwd)


def sigmoid(a: Tensor) -> Tensor:
    data = _sigmoid_np(a.data)

    def bwd(g):
        return (g * data * (1.0 - data),)

    return _make("sigmoid", data, (a,), bwd)


def _sigmoid_np(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def exp(a: Tensor) -> Tensor:
    data = np.exp(a.data)

    def bwd(g):
        return (g * data,)

    return _make("exp", data, (a,), bwd)


def log(a: Tensor) -> Tensor:
    data = np.log(a.data)

    def bwd(g):
        return (g / a.data,)

    return _make("log", data, (a,), bwd)


def logsigmoid(a: Tensor) -> Tensor:
    """log(sigmoid(x)), stable for large |x|."""
    data = -np.logaddexp(0.0, -a.data)

    def bwd(g):
        # d/dx log(sigmoid(x)) = 1 - sigmoid(x) = 1 - exp(logsigmoid(x))
        return (g * (1.0 - np.exp(data)),)

    return _make("logsigmoid", data, (a,), bwd)


# -- reductions ----------------------------------------------------------


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).copy(),)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.data.shape).copy(),)

    return _make("sum", data, (a,), bwd)


def tmean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = a.data.size if axis is None else a.data.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), Tensor(1.0 / n))


def logsumexp(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    x = a.data
    m = x.max(axis=axis, keepdims=True) if x.size else np.zeros((1,) * x.ndim)
    m = np.where(np.isfinite(m), m, 0.0)
    e = np.exp(x - m)
    s = e.sum(axis=axis, keepdims=True)
    out = np.log(s) + m
    soft = e / s
    if not keepdims:
        out = out.squeeze() if axis is None else out.squeeze(axis=axis)

    def bwd(g):
        if axis is None:
            return (g * soft,)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (g * soft,)

    return _make("logsumexp", out, (a,), bwd)


def masked_softmax(logits: Tensor, mask: np.ndarray) -> Tensor:
    """Softmax over the last axis restricted to ``mask``; empty rows yield zeros.

    ``mask`` is a boolean array broadcastable to ``logits.shape``; masked-out
    positions receive exactly zero weight and no gradient.
    """
    x = logits.data
    if _FINITE_CHECKS and not np.isfinite(np.where(mask, x, 0.0)).all():
        raise NonFiniteError("primitive 'masked_softmax' received non-finite logits")
    neg = np.where(mask, x, -np.inf)
    m = neg.max(axis=-1, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    e = np.exp(neg - m)
    s = e.sum(axis=-1, keepdims=True)
    out = e / np.where(s > 0.0, s, 1.0)

    def bwd(g):
        dot = (g * out).sum(axis=-1, keepdims=True)
        return (out * (g - dot),)

    return _make("masked_softmax", out, (logits,), bwd)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis to zero mean / unit variance, then affine."""
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    y = xc * inv
    data = y * gain.data + bias.data

    def bwd(g):
        ggain = _unbroadcast(g * y, gain.data.shape) if gain.requires_grad else None
        gbias = _unbroadcast(g, bias.data.shape) if bias.requires_grad else None
        if not x.requires_grad:
            return None, ggain, gbias
        gh = g * gain.data
        gx = inv * (gh - gh.mean(axis=-1, keepdims=True) - y * (gh * y).mean(axis=-1, keepdims=True))
        return gx, ggain, gbias

    return _make("layer_norm", data, (x, gain, bias), bwd)


def logabsdet(a: Tensor) -> Tensor:
    """log |det A| of a square matrix; gradient is inv(A)^T."""
    sign, ld = np.linalg.slogdet(a.data)
    if sign == 0 or not np.isfinite(ld):
        raise NonFiniteError("primitive 'logabsdet' received a singular matrix")

    def bwd(g):
        return (g * np.linalg.inv(a.data).T,)

    return _make("logabsdet", np.asarray(ld), (a,), bwd)


# -- backward pass -------------------------------------------------------


def _linearize(root: Tensor) -> list[Tensor]:
    """Ordered tape of recorded ops reachable from ``root`` (parents first)."""
    tape: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            tape.append(node)
            continue
        if id(node) in visited or node._bwd is None:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p._bwd is not None and id(p) not in visited:
                stack.append((p, False))
    return tape


def grad(objective: Tensor, leaves: Sequence[Tensor]) -> dict[Tensor, np.ndarray]:
    """Gradient of a scalar objective with respect to each leaf tensor.

    Leaves that do not participate in the objective receive a zero gradient
    of their own shape. Raises :class:`NonFiniteError` if the objective value
    is not finite; re-evaluate under :func:`finite_checks` to learn which
    primitive produced the bad value.
    """
    if objective.data.size != 1:
        raise ValueError("objective must be a scalar")
    if not np.isfinite(objective.data):
        raise NonFiniteError("objective is not finite")
    adjoint: dict[int, np.ndarray] = {id(objective): np.ones_like(objective.data)}
    for node in reversed(_linearize(objective)):
        g = adjoint.pop(id(node), None)
        if g is None:
            continue
        parts = node._bwd(g)
        for parent, pg in zip(node._parents, parts):
            if pg is None or not parent.requires_grad:
                continue
            if _FINITE_CHECKS and not np.isfinite(pg).all():
                raise NonFiniteError(
                    f"backward of primitive '{node._opname}' produced a non-finite gradient"
                )
            key = id(parent)
            if key in adjoint:
                adjoint[key] = adjoint[key] + pg
            else:
                adjoint[key] = pg
    out: dict[Tensor, np.ndarray] = {}
    for leaf in leaves:
        g = adjoint.get(id(leaf))
        out[leaf] = np.zeros_like(leaf.data) if g is None else np.asarray(g, dtype=np.float64)
    return out
