"""Dense float64 tensors with reverse-mode automatic differentiation.

Every primitive records its inputs and a backward closure on the produced
tensor, so the computation graph is implicit in the tensor references.
``backward`` walks that graph once in reverse topological order and
accumulates gradients, summing across repeated uses of a shared tensor.

All data is row-major float64. Any primitive that produces a non-finite
value raises NumericError immediately; NaN/Inf is never a valid state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from ..errors import ContractError, DimensionError, NumericError

Array = np.ndarray


def _as_array(value) -> Array:
    arr = np.asarray(value, dtype=np.float64)
    return np.ascontiguousarray(arr)


def _check_finite(arr: Array, op: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values produced by '{op}'")


class Tensor:
    """A float64 array plus the autodiff bookkeeping that produced it."""

    __slots__ = ("data", "requires_grad", "name", "op", "parents", "_backward")

    # make ndarray <op> Tensor defer to our reflected operators
    __array_ufunc__ = None

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = _as_array(data)
        _check_finite(self.data, "leaf")
        self.requires_grad = bool(requires_grad)
        self.name = name
        self.op = "leaf"
        self.parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[Array], tuple] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:
        tag = self.name or self.op
        return f"Tensor({tag}, shape={self.shape}, requires_grad={self.requires_grad})"

    # -- arithmetic sugar ------------------------------------------------

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
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return slice_(self, key)

    def sum(self, axis=None, keepdims: bool = False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, axes=None):
        return transpose(self, axes)

    @property
    def T(self):
        return transpose(self, None)


def as_tensor(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def _result(data: Array, op: str, parents: tuple[Tensor, ...], backward) -> Tensor:
    _check_finite(data, op)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.requires_grad = any(p.requires_grad for p in parents)
    out.name = None
    out.op = op
    if out.requires_grad:
        out.parents = parents
        out._backward = backward
    else:
        out.parents = ()
        out._backward = None
    return out


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# -- elementwise primitives ----------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError:
        raise DimensionError(f"add: shapes {a.shape} and {b.shape} do not broadcast")
    return _result(data, "add", (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data - b.data
    except ValueError:
        raise DimensionError(f"sub: shapes {a.shape} and {b.shape} do not broadcast")
    return _result(data, "sub", (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError:
        raise DimensionError(f"multiply: shapes {a.shape} and {b.shape} do not broadcast")

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _result(data, "multiply", (a, b), backward)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data / b.data
    except ValueError:
        raise DimensionError(f"divide: shapes {a.shape} and {b.shape} do not broadcast")

    def backward(g):
        return (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.shape),
        )

    return _result(data, "divide", (a, b), backward)


def relu(a) -> Tensor:
    a = as_tensor(a)
    data = np.maximum(a.data, 0.0)
    return _result(data, "relu", (a,), lambda g: (g * (a.data > 0.0),))


def leaky_relu(a, alpha: float = 0.2) -> Tensor:
    a = as_tensor(a)
    data = np.where(a.data > 0.0, a.data, alpha * a.data)
    return _result(data, "leaky_relu", (a,), lambda g: (g * np.where(a.data > 0.0, 1.0, alpha),))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    data = np.empty_like(a.data)
    pos = a.data >= 0
    data[pos] = 1.0 / (1.0 + np.exp(-a.data[pos]))
    ez = np.exp(a.data[~pos])
    data[~pos] = ez / (1.0 + ez)
    return _result(data, "sigmoid", (a,), lambda g: (g * data * (1.0 - data),))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    data = np.tanh(a.data)
    return _result(data, "tanh", (a,), lambda g: (g * (1.0 - data * data),))


def exp(a) -> Tensor:
    a = as_tensor(a)
    data = np.exp(a.data)
    return _result(data, "exp", (a,), lambda g: (g * data,))


def log(a) -> Tensor:
    a = as_tensor(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        data = np.log(a.data)
    return _result(data, "log", (a,), lambda g: (g / a.data,))


def clip(a, lo: float, hi: float) -> Tensor:
    """Clamp values to [lo, hi]; gradient is zero outside the bounds."""
    a = as_tensor(a)
    data = np.clip(a.data, lo, hi)
    inside = (a.data >= lo) & (a.data <= hi)
    return _result(data, "clip", (a,), lambda g: (g * inside,))


# -- linear algebra and shape primitives -----------------------------------


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(f"matmul: operands must be at least 2-D, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: shapes {a.shape} and {b.shape} are not aligned")
    try:
        data = a.data @ b.data
    except ValueError:
        raise DimensionError(f"matmul: shapes {a.shape} and {b.shape} do not broadcast")

    def backward(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _result(data, "matmul", (a, b), backward)


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    if not parts:
        raise ContractError("concat: need at least one tensor")
    try:
        data = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError:
        raise DimensionError(f"concat: shapes {[p.shape for p in parts]} are incompatible on axis {axis}")
    sizes = [p.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.ascontiguousarray(piece) for piece in np.split(g, splits, axis=axis))

    return _result(data, "concat", tuple(parts), backward)


def transpose(a, axes=None) -> Tensor:
    a = as_tensor(a)
    data = np.transpose(a.data, axes)
    if axes is None:
        inverse = None
    else:
        inverse = np.argsort(axes)

    def backward(g):
        return (np.transpose(g, inverse),)

    return _result(np.ascontiguousarray(data), "transpose", (a,), backward)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    try:
        data = a.data.reshape(shape)
    except ValueError:
        raise DimensionError(f"reshape: cannot view {a.shape} as {shape}")
    return _result(np.ascontiguousarray(data), "reshape", (a,), lambda g: (g.reshape(a.shape),))


def broadcast_to(a, shape) -> Tensor:
    a = as_tensor(a)
    try:
        data = np.broadcast_to(a.data, shape)
    except ValueError:
        raise DimensionError(f"broadcast_to: cannot broadcast {a.shape} to {shape}")
    return _result(np.ascontiguousarray(data), "broadcast_to", (a,), lambda g: (_unbroadcast(g, a.shape),))


def slice_(a, key) -> Tensor:
    """Basic indexing with ints and slices; backward scatters into zeros."""
    a = as_tensor(a)
    try:
        data = a.data[key]
    except IndexError:
        raise DimensionError(f"slice: index {key!r} out of range for shape {a.shape}")

    def backward(g):
        full = np.zeros_like(a.data)
        full[key] = g
        return (full,)

    return _result(np.ascontiguousarray(data), "slice", (a,), backward)


def take(a, indices, axis: int = 0) -> Tensor:
    """Gather rows by integer index; repeated indices accumulate gradient."""
    a = as_tensor(a)
    idx = np.asarray(indices, dtype=np.intp)
    data = np.take(a.data, idx, axis=axis)

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, (slice(None),) * axis + (idx,), g)
        return (full,)

    return _result(np.ascontiguousarray(data), "take", (a,), backward)


# -- reductions ------------------------------------------------------------


def sum_(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _result(np.asarray(data, dtype=np.float64), "sum", (a,), backward)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    data = a.data.mean(axis=axis, keepdims=keepdims)
    if axis is None:
        count = a.size
    elif isinstance(axis, tuple):
        count = int(np.prod([a.shape[ax] for ax in axis]))
    else:
        count = a.shape[axis]

    def backward(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, a.shape).copy(),)

    return _result(np.asarray(data, dtype=np.float64), "mean", (a,), backward)


# -- softmax family ---------------------------------------------------------


def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    num = np.exp(shifted)
    data = num / num.sum(axis=axis, keepdims=True)

    def backward(g):
        dot = (g * data).sum(axis=axis, keepdims=True)
        return (data * (g - dot),)

    return _result(data, "softmax", (a,), backward)


def masked_softmax(scores, mask: Array, axis: int = -1) -> Tensor:
    """Softmax restricted to positions where mask is nonzero.

    Rows whose mask is entirely zero come out as all zeros (the row sum is
    the empty sum), not NaN. `mask` is a constant, not differentiated.
    """
    scores = as_tensor(scores)
    mask_arr = np.broadcast_to(np.asarray(mask) != 0.0, scores.shape)
    row_max = np.amax(scores.data, axis=axis, keepdims=True, where=mask_arr, initial=-np.inf)
    np.maximum(row_max, 0.0, out=row_max, where=~np.isfinite(row_max))  # empty rows
    num = np.zeros_like(scores.data)
    np.exp(scores.data - row_max, out=num, where=mask_arr)
    denom = num.sum(axis=axis, keepdims=True)
    np.maximum(denom, 1.0, out=denom, where=denom == 0.0)
    data = num / denom

    def backward(g):
        dot = (g * data).sum(axis=axis, keepdims=True)
        return (data * (g - dot),)

    return _result(data, "masked_softmax", (scores,), backward)


# -- primitive dispatch (uniform entry point) -------------------------------

_PRIMITIVES: dict[str, Callable[..., Tensor]] = {
    "matmul": matmul,
    "add": add,
    "sub": sub,
    "multiply": mul,
    "divide": div,
    "concat": lambda *ts, axis=-1: concat(ts, axis=axis),
    "relu": relu,
    "leaky_relu": leaky_relu,
    "sigmoid": sigmoid,
    "tanh": tanh,
    "exp": exp,
    "log": log,
    "clip": clip,
    "softmax": softmax,
    "masked_softmax": masked_softmax,
    "mean": mean,
    "sum": sum_,
    "slice": slice_,
    "take": take,
    "transpose": transpose,
    "reshape": reshape,
    "broadcast_to": broadcast_to,
}


def forward_primitive(kind: str, *inputs, **kwargs) -> Tensor:
    """Apply a primitive by name; the op is recorded for backward."""
    if kind not in _PRIMITIVES:
        raise ContractError(f"unknown primitive '{kind}'")
    return _PRIMITIVES[kind](*inputs, **kwargs)


# -- graph traversal ---------------------------------------------------------


@dataclass(frozen=True)
class OpRecord:
    """One primitive application as seen from a result tensor."""

    kind: str
    inputs: tuple[Tensor, ...]
    output: Tensor


def trace(result: Tensor) -> list[OpRecord]:
    """Topologically ordered op records reachable from `result`.

    Leaves are excluded; each op appears exactly once, inputs before users.
    """
    order: list[OpRecord] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(result, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            if node.parents:
                order.append(OpRecord(node.op, node.parents, node))
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            stack.append((p, False))
    return order


def backward(loss: Tensor, params: Iterable[Tensor] | None = None) -> dict[int, Array]:
    """Gradients of a scalar loss w.r.t. every requires_grad leaf it uses.

    Returns a dict keyed by `id(tensor)`. When `params` is given, every
    listed tensor gets an entry, zero-filled if the loss never touched it.
    Use `grad_of(grads, t)` for lookup.
    """
    if loss.size != 1:
        raise ContractError(f"backward: loss must be scalar, got shape {loss.shape}")

    order = trace(loss)
    grads: dict[int, Array] = {id(loss): np.ones_like(loss.data)}
    for record in reversed(order):
        node = record.output
        g = grads.pop(id(node), None)
        if g is None or node._backward is None:
            continue
        parent_grads = node._backward(g)
        for parent, pg in zip(node.parents, parent_grads):
            if not parent.requires_grad or pg is None:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = np.asarray(pg, dtype=np.float64)

    result = {k: v for k, v in grads.items()}
    if params is not None:
        for p in params:
            if p.requires_grad and id(p) not in result:
                result[id(p)] = np.zeros_like(p.data)
    return result


def grad_of(grads: dict[int, Array], tensor: Tensor) -> Array:
    return grads.get(id(tensor), np.zeros_like(tensor.data))
