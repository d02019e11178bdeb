"""Dense float64 tensors with tape-based reverse-mode automatic differentiation.

All values are 64-bit floats in row-major numpy arrays; the problem sizes here
(tens of nodes, a handful of snapshots) make precision and determinism worth
far more than throughput. Operations record themselves on the active Tape when
any input requires gradients; Tape.backward replays the records in reverse
execution order, which is a reverse topological order by construction, so two
backward passes over the same tape produce bit-identical gradients.
"""
from __future__ import annotations

import numpy as np

from .errors import ContractError, DomainError, ShapeError

_TAPE_STACK: list["Tape"] = []


def _asarray(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    # ascontiguousarray would promote 0-d scalars to shape (1,)
    return a if a.flags["C_CONTIGUOUS"] else np.ascontiguousarray(a)


class Tensor:
    """A dense float64 array plus gradient metadata."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _asarray(data)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        """Copy with gradient flow cut (stop-gradient)."""
        return Tensor(self.data.copy())

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # arithmetic sugar; all dispatch to the module-level ops
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

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return neg(self)

    def __getitem__(self, key):
        return take(self, key)

    def sum(self, axis=None, keepdims=False):
        return tensor_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tensor_mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self):
        return transpose(self)

    @property
    def T(self):
        return transpose(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class Tape:
    """Ordered record of executed primitive operations.

    Execution order is a topological order of the computation graph, so
    iterating the record backwards visits consumers before producers.
    """

    def __init__(self):
        self._ops: list[tuple[Tensor, tuple[Tensor, ...], object]] = []

    def __len__(self):
        return len(self._ops)

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _TAPE_STACK.pop()
        assert popped is self
        return False

    def backward(self, loss: Tensor, params=None) -> dict[Tensor, np.ndarray]:
        """Reverse-mode gradients of a scalar loss over this tape.

        Returns a map from leaf tensor to gradient and writes each leaf's
        `.grad`. Leaves in `params` that the loss does not reach get zeros.
        """
        if loss.data.shape != ():
            raise ContractError(f"backward needs a scalar loss, got shape {loss.data.shape}")
        grads: dict[int, np.ndarray] = {id(loss): np.ones((), dtype=np.float64)}
        produced = {id(out) for out, _, _ in self._ops}
        leaves: dict[int, Tensor] = {}
        for out, inputs, vjp in reversed(self._ops):
            g = grads.pop(id(out), None)
            if g is None:
                continue
            for t, gt in zip(inputs, vjp(g)):
                if gt is None or not t.requires_grad:
                    continue
                key = id(t)
                prev = grads.get(key)
                grads[key] = gt if prev is None else prev + gt
                if key not in produced:
                    leaves[key] = t
        result: dict[Tensor, np.ndarray] = {}
        for key, t in leaves.items():
            t.grad = grads[key]
            result[t] = t.grad
        if params is not None:
            for p in params:
                if p not in result:
                    p.grad = np.zeros_like(p.data)
                    result[p] = p.grad
        return result


def backward(loss: Tensor, params=None) -> dict[Tensor, np.ndarray]:
    """Backward through the innermost active tape."""
    if not _TAPE_STACK:
        raise ContractError("backward called with no active tape")
    return _TAPE_STACK[-1].backward(loss, params=params)


def _record(out: Tensor, inputs: tuple[Tensor, ...], vjp) -> Tensor:
    if out.requires_grad and _TAPE_STACK:
        _TAPE_STACK[-1]._ops.append((out, inputs, vjp))
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum gradient over axes that were broadcast in the forward pass."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _binary(op_name, a, b, fwd, vjp_a, vjp_b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = fwd(a.data, b.data)
    except ValueError as e:
        raise ShapeError(f"{op_name}: shapes {a.shape} and {b.shape} do not conform ({e})")
    out = Tensor(data)
    out.requires_grad = a.requires_grad or b.requires_grad

    def vjp(g):
        return (
            _unbroadcast(vjp_a(g, a.data, b.data), a.shape) if a.requires_grad else None,
            _unbroadcast(vjp_b(g, a.data, b.data), b.shape) if b.requires_grad else None,
        )

    return _record(out, (a, b), vjp)


def add(a, b) -> Tensor:
    return _binary("add", a, b, lambda x, y: x + y, lambda g, x, y: g, lambda g, x, y: g)


def sub(a, b) -> Tensor:
    return _binary("sub", a, b, lambda x, y: x - y, lambda g, x, y: g, lambda g, x, y: -g)


def mul(a, b) -> Tensor:
    """Element-wise (Hadamard) product with broadcasting."""
    return _binary("mul", a, b, lambda x, y: x * y, lambda g, x, y: g * y, lambda g, x, y: g * x)


def div(a, b) -> Tensor:
    return _binary(
        "div", a, b, lambda x, y: x / y, lambda g, x, y: g / y, lambda g, x, y: -g * x / (y * y)
    )


def neg(a) -> Tensor:
    a = as_tensor(a)
    out = Tensor(-a.data)
    out.requires_grad = a.requires_grad
    return _record(out, (a,), lambda g: (-g,))


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} do not conform")
    out = Tensor(a.data @ b.data)
    out.requires_grad = a.requires_grad or b.requires_grad
    ad, bd = a.data, b.data

    def vjp(g):
        return (
            g @ bd.T if a.requires_grad else None,
            ad.T @ g if b.requires_grad else None,
        )

    return _record(out, (a, b), vjp)


def bmm(a, b) -> Tensor:
    """Batched matrix product over matching leading batch dimension."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 3 or b.ndim != 3 or a.shape[0] != b.shape[0] or a.shape[2] != b.shape[1]:
        raise ShapeError(f"bmm: shapes {a.shape} and {b.shape} do not conform")
    out = Tensor(a.data @ b.data)
    out.requires_grad = a.requires_grad or b.requires_grad
    ad, bd = a.data, b.data

    def vjp(g):
        return (
            g @ bd.swapaxes(-1, -2) if a.requires_grad else None,
            ad.swapaxes(-1, -2) @ g if b.requires_grad else None,
        )

    return _record(out, (a, b), vjp)


def transpose(a) -> Tensor:
    """Swap the last two axes."""
    a = as_tensor(a)
    if a.ndim < 2:
        raise ShapeError(f"transpose: needs at least 2 dimensions, got shape {a.shape}")
    out = Tensor(np.ascontiguousarray(a.data.swapaxes(-1, -2)))
    out.requires_grad = a.requires_grad
    return _record(out, (a,), lambda g: (g.swapaxes(-1, -2),))


def concat(parts, axis: int = 1) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    try:
        data = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError as e:
        raise ShapeError(f"concat: shapes {[p.shape for p in parts]} do not conform ({e})")
    out = Tensor(data)
    out.requires_grad = any(p.requires_grad for p in parts)
    sizes = [p.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        pieces = np.split(g, splits, axis=axis)
        return [piece if p.requires_grad else None for p, piece in zip(parts, pieces)]

    return _record(out, tuple(parts), vjp)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    try:
        data = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view shape {a.shape} as {shape}")
    out = Tensor(data)
    out.requires_grad = a.requires_grad
    orig = a.shape
    return _record(out, (a,), lambda g: (g.reshape(orig),))


def take(a, key) -> Tensor:
    """Basic (non-fancy) indexing; gradients scatter back into place."""
    a = as_tensor(a)
    out = Tensor(np.ascontiguousarray(a.data[key]))
    out.requires_grad = a.requires_grad
    shape = a.shape

    def vjp(g):
        full = np.zeros(shape, dtype=np.float64)
        full[key] = g
        return (full,)

    return _record(out, (a,), vjp)


def _unary(a, data, dfn) -> Tensor:
    out = Tensor(data)
    out.requires_grad = a.requires_grad
    return _record(out, (a,), lambda g: (dfn(g),))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    with np.errstate(over="ignore"):
        s = 1.0 / (1.0 + np.exp(-a.data))
    return _unary(a, s, lambda g: g * s * (1.0 - s))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    t = np.tanh(a.data)
    return _unary(a, t, lambda g: g * (1.0 - t * t))


def relu(a) -> Tensor:
    a = as_tensor(a)
    keep = a.data > 0
    return _unary(a, np.where(keep, a.data, 0.0), lambda g: g * keep)


def exp(a) -> Tensor:
    a = as_tensor(a)
    e = np.exp(a.data)
    return _unary(a, e, lambda g: g * e)


def log(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.data <= 0):
        raise DomainError("log: input has non-positive entries")
    x = a.data
    return _unary(a, np.log(x), lambda g: g / x)


def power(a, exponent: float) -> Tensor:
    a = as_tensor(a)
    p = float(exponent)
    if p != int(p) and np.any(a.data < 0):
        raise DomainError(f"power: fractional exponent {p} on negative entries")
    if p < 0 and np.any(a.data == 0):
        raise DomainError(f"power: exponent {p} on zero entries")
    x = a.data
    return _unary(a, x**p, lambda g: g * p * x ** (p - 1.0))


def tensor_sum(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    out = Tensor(np.sum(a.data, axis=axis, keepdims=keepdims))
    out.requires_grad = a.requires_grad
    shape = a.shape

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _record(out, (a,), vjp)


def tensor_mean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    out = Tensor(np.mean(a.data, axis=axis, keepdims=keepdims))
    out.requires_grad = a.requires_grad
    shape = a.shape
    count = a.size if axis is None else np.prod([shape[i] for i in np.atleast_1d(axis)])

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy() / count,)

    return _record(out, (a,), vjp)


def softmax(a, mask: np.ndarray | None = None, axis: int = -1) -> Tensor:
    """Row softmax with optional additive {0, -inf} mask.

    The max subtraction for stability ranges over unmasked entries only;
    masked positions come out exactly 0 and receive zero gradient.
    """
    a = as_tensor(a)
    scores = a.data
    if mask is not None:
        mask = np.asarray(mask, dtype=np.float64)
        if not np.all((mask == 0.0) | np.isneginf(mask)):
            raise ContractError("softmax: mask entries must be 0 or -inf")
        scores = scores + mask  # broadcasts; masked entries become -inf
    m = np.max(scores, axis=axis, keepdims=True)
    if np.any(np.isneginf(m)):
        raise DomainError("softmax: a row is fully masked")
    with np.errstate(invalid="ignore"):
        e = np.exp(scores - m)
    p = e / np.sum(e, axis=axis, keepdims=True)
    out = Tensor(p)
    out.requires_grad = a.requires_grad

    def vjp(g):
        inner = np.sum(p * g, axis=axis, keepdims=True)
        return (p * (g - inner),)

    return _record(out, (a,), vjp)


def masked_softmax(scores, mask) -> Tensor:
    """Probability vector over the unmasked positions of the last axis."""
    return softmax(scores, mask=mask, axis=-1)
