"""Dense tensors with tape-based reverse-mode differentiation.

Operations record themselves on the innermost active :class:`Tape` when at
least one input requires a gradient. Outside a tape every operation is a
plain numpy evaluation, which is how inference runs.

Broadcasting is limited to python scalars combined with tensors; every other
binary operation requires identical shapes. ``linear`` adds its bias row-wise
as part of the fused op.
"""

from __future__ import annotations

import functools
import itertools
from contextlib import contextmanager
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ContractError, DegenerateInputError, DimensionError, InvalidMaskError

_PRECISIONS = {"float64": np.float64, "float32": np.float32}
_dtype = np.float64
_tapes: list = []
_ids = itertools.count()


def set_precision(name: str) -> None:
    """Select the dtype used for newly created tensors ("float64" or "float32")."""
    global _dtype
    try:
        _dtype = _PRECISIONS[name]
    except KeyError:
        raise ContractError(f"unknown precision {name!r}; expected one of {sorted(_PRECISIONS)}")


def get_dtype():
    return _dtype


@contextmanager
def precision(name: str):
    global _dtype
    old = _dtype
    set_precision(name)
    try:
        yield
    finally:
        _dtype = old


class Tape:
    """Ordered record of differentiable operations.

    Use as a context manager; operations executed inside are appended in
    execution order, which is also a valid topological order.
    """

    def __init__(self):
        self.records: list[Tensor] = []

    def __enter__(self):
        _tapes.append(self)
        return self

    def __exit__(self, *exc):
        _tapes.pop()
        return False

    def __len__(self):
        return len(self.records)

    def backward(self, loss: "Tensor") -> None:
        if loss.data.size != 1:
            raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
        if not self.records:
            raise ContractError("backward on an empty tape")
        grads = {loss.node_id: np.ones_like(loss.data)}
        for node in reversed(self.records):
            g = grads.pop(node.node_id, None)
            if g is None:
                continue
            for parent, pg in zip(node.parents, node.backward_fn(g)):
                if pg is None or not parent.requires_grad:
                    continue
                if parent.is_leaf:
                    if parent.grad is None:
                        parent.grad = np.array(pg, dtype=parent.data.dtype)
                    else:
                        parent.grad += pg
                elif parent.node_id in grads:
                    grads[parent.node_id] = grads[parent.node_id] + pg
                else:
                    grads[parent.node_id] = pg


@contextmanager
def no_tape():
    """Suspend recording, e.g. for evaluation inside a training step."""
    _tapes.append(None)
    try:
        yield
    finally:
        _tapes.pop()


def _active_tape():
    return _tapes[-1] if _tapes else None


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "parents", "backward_fn", "node_id", "tape", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None, dtype=None):
        if dtype is None:
            floating = isinstance(data, np.ndarray) and data.dtype.kind == "f"
            dtype = data.dtype if floating else _dtype
        self.data = np.array(data, dtype=dtype)
        self.grad = None
        self.requires_grad = requires_grad
        self.parents = ()
        self.backward_fn = None
        self.node_id = next(_ids)
        self.tape = None
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def is_leaf(self) -> bool:
        return not self.parents

    def zero_grad(self) -> None:
        self.grad = None

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    __add__ = lambda self, other: add(self, other)
    __radd__ = lambda self, other: add(self, other)
    __sub__ = lambda self, other: sub(self, other)
    __rsub__ = lambda self, other: sub(other, self)
    __mul__ = lambda self, other: mul(self, other)
    __rmul__ = lambda self, other: mul(self, other)
    __neg__ = lambda self: neg(self)
    __matmul__ = lambda self, other: matmul(self, other)


def parameter(values, name: str | None = None) -> Tensor:
    """Trainable leaf in the current default precision."""
    return Tensor(values, requires_grad=True, name=name, dtype=_dtype)


def constant(values) -> Tensor:
    return values if isinstance(values, Tensor) else Tensor(values)


def _make(data: np.ndarray, parents: Sequence[Tensor], backward_fn: Callable) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.node_id = next(_ids)
    out.name = None
    tape = _tapes[-1] if _tapes else None
    if tape is not None:
        for p in parents:
            if p.requires_grad:
                out.requires_grad = True
                out.parents = tuple(parents)
                out.backward_fn = backward_fn
                out.tape = tape
                tape.records.append(out)
                return out
    out.requires_grad = False
    out.parents = ()
    out.backward_fn = None
    out.tape = None
    return out


def custom(data: np.ndarray, parents: Sequence[Tensor], backward_fn: Callable) -> Tensor:
    """Record a fused op whose vector-Jacobian product is written by hand.

    ``backward_fn(g)`` must return one gradient per parent, each shaped like
    that parent's data.
    """
    return _make(data, tuple(constant(p) for p in parents), backward_fn)


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every reachable leaf."""
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss.tape is None:
        if loss.requires_grad and loss.is_leaf:
            loss.grad = np.ones_like(loss.data) if loss.grad is None else loss.grad + 1.0
            return
        raise ContractError("loss was not recorded on any tape")
    loss.tape.backward(loss)


# ---------------------------------------------------------------------------
# elementwise


def _same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.data.shape != b.data.shape:
        raise DimensionError(f"{op}: incompatible shapes {a.shape} and {b.shape}")


def _operands(a, b):
    """Return (tensor, tensor) or (tensor, python scalar)."""
    if type(a) is Tensor and type(b) is Tensor:
        return a, b
    if isinstance(a, np.ndarray) and a.ndim:
        a = constant(a)
    if isinstance(b, np.ndarray) and b.ndim:
        b = constant(b)
    if isinstance(a, Tensor) and isinstance(b, Tensor):
        return a, b
    if isinstance(a, Tensor):
        return a, float(b)
    return b, float(a)


def add(a, b) -> Tensor:
    a, b = _operands(a, b)
    if not isinstance(b, Tensor):
        return _make(a.data + b, (a,), lambda g: (g,))
    _same_shape(a, b, "add")
    return _make(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a, b) -> Tensor:
    if not isinstance(a, Tensor) and not (isinstance(a, np.ndarray) and a.ndim):
        return add(neg(b), a)
    a, b = _operands(a, b)
    if not isinstance(b, Tensor):
        return add(a, -b)
    _same_shape(a, b, "sub")
    return _make(a.data - b.data, (a, b), lambda g: (g, -g))


def neg(a: Tensor) -> Tensor:
    return _make(-a.data, (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    a, b = _operands(a, b)
    if not isinstance(b, Tensor):
        c = b
        return _make(a.data * c, (a,), lambda g: (g * c,))
    _same_shape(a, b, "mul")
    ad, bd = a.data, b.data
    return _make(ad * bd, (a, b), lambda g: (g * bd, g * ad))


def where(condition, a: Tensor, b: Tensor) -> Tensor:
    """Exact elementwise select; ``condition`` is a constant boolean array."""
    cond = np.asarray(condition, dtype=bool)
    _same_shape(a, b, "where")
    if cond.shape != a.shape:
        cond = np.broadcast_to(cond, a.shape)
    return _make(np.where(cond, a.data, b.data), (a, b), lambda g: (np.where(cond, g, 0.0), np.where(cond, 0.0, g)))


def one_minus(z: Tensor) -> Tensor:
    return _make(1.0 - z.data, (z,), lambda g: (-g,))


def sigmoid(x: Tensor) -> Tensor:
    # tanh form is overflow-free and gives sigmoid(0) == 0.5 exactly
    s = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return _make(s, (x,), lambda g: (g * s * (1.0 - s),))


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.data)
    return _make(t, (x,), lambda g: (g * (1.0 - t * t),))


_ELEMENTWISE = {
    "sigmoid": sigmoid,
    "tanh": tanh,
    "one-minus": one_minus,
    "add": add,
    "mul": mul,
    "sub": sub,
}


def elementwise(kind: str, *args) -> Tensor:
    """Dispatch by name: sigmoid, tanh, one-minus, add, mul, sub."""
    try:
        fn = _ELEMENTWISE[kind]
    except KeyError:
        raise ContractError(f"unknown elementwise op {kind!r}")
    return fn(*args)


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = constant(a), constant(b)
    ad, bd = a.data, b.data
    if ad.ndim != 2 or bd.ndim != 2 or ad.shape[1] != bd.shape[0]:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    return _make(ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g))


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """``x @ w + b`` with ``b`` added to every row."""
    xd, wd = x.data, w.data
    if xd.ndim != 2 or wd.ndim != 2 or xd.shape[1] != wd.shape[0]:
        raise DimensionError(f"linear: cannot multiply {x.shape} by {w.shape}")
    out = xd @ wd
    if b is None:
        return _make(out, (x, w), lambda g: (g @ wd.T, xd.T @ g))
    if b.data.shape != (wd.shape[1],):
        raise DimensionError(f"linear: bias shape {b.shape} does not match {w.shape}")
    return _make(out + b.data, (x, w, b), lambda g: (g @ wd.T, xd.T @ g, g.sum(axis=0)))


# ---------------------------------------------------------------------------
# structural


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [constant(t) for t in tensors]
    if not tensors:
        raise DegenerateInputError("concat of zero tensors")
    ax = axis % tensors[0].data.ndim
    try:
        data = np.concatenate([t.data for t in tensors], axis=ax)
    except ValueError:
        raise DimensionError(f"concat: incompatible shapes {[t.shape for t in tensors]}") from None
    bounds = list(itertools.accumulate(t.data.shape[ax] for t in tensors))[:-1]

    def back(g):
        return tuple(np.split(g, bounds, axis=ax))

    return _make(data, tensors, back)


def cols(x: Tensor, start: int, stop: int) -> Tensor:
    """Slice of the last axis."""
    shape = x.data.shape

    def back(g):
        full = np.zeros(shape, dtype=g.dtype)
        full[..., start:stop] = g
        return (full,)

    return _make(x.data[..., start:stop], (x,), back)


def reshape(x: Tensor, shape) -> Tensor:
    old = x.shape
    return _make(x.data.reshape(shape), (x,), lambda g: (g.reshape(old),))


def rows(x: Tensor, index) -> Tensor:
    """Gather rows ``x[index]``; gradients scatter-add back."""
    idx = np.asarray(index, dtype=np.intp)
    shape = x.shape

    def back(g):
        full = np.zeros(shape, dtype=g.dtype)
        np.add.at(full, idx, g)
        return (full,)

    return _make(x.data[idx], (x,), back)


embedding_lookup = rows


def pick(x: Tensor, flat_index) -> Tensor:
    """Gather scalars from the flattened tensor into a vector."""
    idx = np.asarray(flat_index, dtype=np.intp)
    shape = x.shape

    def back(g):
        full = np.zeros(int(np.prod(shape)), dtype=g.dtype)
        np.add.at(full, idx, g)
        return (full.reshape(shape),)

    return _make(x.data.ravel()[idx], (x,), back)


@functools.lru_cache(maxsize=256)
def _segment_plan(key: bytes, count: int, n: int):
    ids = np.frombuffer(key, dtype=np.intp)
    order = np.argsort(ids, kind="stable")
    sorted_ids = ids[order]
    starts = np.searchsorted(sorted_ids, np.arange(n))
    pos = np.arange(count) - starts[sorted_ids]
    return order, sorted_ids, pos, int(pos.max()) + 1


def _canonical_segment_sum(values: np.ndarray, ids: np.ndarray, n: int) -> np.ndarray:
    # Summing sorted per-column values makes the result independent of the
    # order in which rows arrive, so graph relabelings give identical bits.
    width = values.shape[1]
    if len(ids) == 0:
        return np.zeros((n, width), dtype=values.dtype)
    order, sorted_ids, pos, depth = _segment_plan(ids.tobytes(), len(ids), n)
    pad = np.zeros((n, depth, width), dtype=values.dtype)
    pad[sorted_ids, pos] = values[order]
    if depth > 1:
        pad.sort(axis=1)
    return pad.sum(axis=1)


def segment_sum(x: Tensor, segment_ids, num_segments: int) -> Tensor:
    """Row sums grouped by ``segment_ids``; empty segments are zero."""
    ids = np.asarray(segment_ids, dtype=np.intp)
    if x.ndim != 2 or len(ids) != x.shape[0]:
        raise DimensionError(f"segment_sum: {len(ids)} ids for shape {x.shape}")
    out = _canonical_segment_sum(x.data, ids, num_segments)
    return _make(out, (x,), lambda g: (g[ids],))


def segment_mean(x: Tensor, segment_ids, num_segments: int) -> Tensor:
    """Row means grouped by ``segment_ids``; empty segments are zero."""
    ids = np.asarray(segment_ids, dtype=np.intp)
    if x.ndim != 2 or len(ids) != x.shape[0]:
        raise DimensionError(f"segment_mean: {len(ids)} ids for shape {x.shape}")
    counts = np.bincount(ids, minlength=num_segments).astype(x.data.dtype)
    inv = np.divide(1.0, counts, out=np.zeros_like(counts), where=counts > 0)[:, None]
    out = _canonical_segment_sum(x.data, ids, num_segments) * inv
    return _make(out, (x,), lambda g: ((g * inv)[ids],))


def mean(x: Tensor, axis: int = 0) -> Tensor:
    if x.shape[axis] == 0:
        raise DegenerateInputError(f"mean over empty axis {axis} of shape {x.shape}")
    n = x.shape[axis]
    shape = x.shape

    def back(g):
        return (np.broadcast_to(np.expand_dims(g, axis) / n, shape).copy(),)

    return _make(x.data.mean(axis=axis), (x,), back)


def sum(x: Tensor) -> Tensor:  # noqa: A001 - mirrors numpy naming
    shape = x.shape
    return _make(np.asarray(x.data.sum()), (x,), lambda g: (np.full(shape, g, dtype=x.data.dtype),))


# ---------------------------------------------------------------------------
# normalisation


def _check_mask(x: Tensor, mask):
    if mask is None:
        return np.ones(x.shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != x.shape:
        raise DimensionError(f"mask shape {mask.shape} does not match {x.shape}")
    if not mask.any(axis=-1).all():
        raise InvalidMaskError("every softmax row needs at least one unmasked entry")
    return mask


def softmax(x: Tensor, mask=None) -> Tensor:
    """Softmax over the last axis; masked entries are exactly zero."""
    if x.ndim not in (1, 2):
        raise DimensionError(f"softmax expects a vector or matrix, got {x.shape}")
    mask = _check_mask(x, mask)
    z = np.where(mask, x.data, -np.inf)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.where(mask, np.exp(z), 0.0)
    s = e / e.sum(axis=-1, keepdims=True)

    def back(g):
        return (s * (g - (g * s).sum(axis=-1, keepdims=True)),)

    return _make(s, (x,), back)


def log_softmax(x: Tensor, mask=None) -> Tensor:
    """Log-softmax over the last axis; masked entries are ``-inf``."""
    if x.ndim not in (1, 2):
        raise DimensionError(f"log_softmax expects a vector or matrix, got {x.shape}")
    mask = _check_mask(x, mask)
    z = np.where(mask, x.data, -np.inf)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.where(mask, np.exp(z), 0.0)
    total = e.sum(axis=-1, keepdims=True)
    out = np.where(mask, z - np.log(total), -np.inf)
    s = e / total

    def back(g):
        g = np.where(mask, g, 0.0)
        return (g - s * g.sum(axis=-1, keepdims=True),)

    return _make(out, (x,), back)


def dropout(x: Tensor, p: float, rng: np.random.Generator | None = None, training: bool = True) -> Tensor:
    """Inverted dropout; identity when ``p == 0`` or outside training."""
    if not 0.0 <= p < 1.0:
        raise ContractError(f"dropout probability must lie in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ContractError("training-mode dropout needs a seeded generator")
    keep = (rng.random(x.shape) >= p).astype(x.data.dtype) / (1.0 - p)
    return _make(x.data * keep, (x,), lambda g: (g * keep,))


# ---------------------------------------------------------------------------
# gradient checking


def numerical_gradient(f: Callable[[], Tensor], param: Tensor, step: float = 1e-5) -> np.ndarray:
    """Central finite differences of the scalar ``f()`` w.r.t. ``param``."""
    grad = np.zeros_like(param.data)
    flat = param.data.reshape(-1)
    out = grad.reshape(-1)
    with no_tape():
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + step
            hi = float(f().data)
            flat[k] = orig - step
            lo = float(f().data)
            flat[k] = orig
            out[k] = (hi - lo) / (2.0 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / scale)


def check_gradients(
    f: Callable[[], Tensor], params: dict[str, Tensor] | Iterable[Tensor], step: float = 1e-5
) -> dict[str, float]:
    """Relative error between tape gradients and finite differences, per tensor."""
    if not isinstance(params, dict):
        params = {p.name or str(k): p for k, p in enumerate(params)}
    for p in params.values():
        p.zero_grad()
    with Tape():
        loss = f()
        backward(loss)
    errors = {}
    for name, p in params.items():
        analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
        errors[name] = relative_error(analytic, numerical_gradient(f, p, step))
    return errors
