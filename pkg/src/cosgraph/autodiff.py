"""Dense 2-D tensors with a reverse-mode gradient tape.

Operations record onto the active :class:`Tape` (``with Tape():``) when at
least one input is a parameter or already on that tape. Outside a tape every
op is a plain numpy computation, which is what inference uses.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp


class ShapeError(ValueError):
    pass


class TapeError(RuntimeError):
    pass


class LossError(ValueError):
    pass


class OptimizerError(RuntimeError):
    pass


_active: list["Tape"] = []


class Tape:
    """Ordered record of operations; parents always precede their outputs."""

    def __init__(self):
        self.nodes: list[tuple["Tensor", tuple["Tensor", ...], Callable]] = []
        self.consumed = False

    def __enter__(self):
        _active.append(self)
        return self

    def __exit__(self, *exc):
        _active.remove(self)
        return False

    def record(self, out: "Tensor", parents, backward_fn) -> None:
        out.tape = self
        out.node_id = len(self.nodes)
        self.nodes.append((out, tuple(parents), backward_fn))


class Tensor:
    __slots__ = ("data", "requires_grad", "tape", "node_id", "name", "__weakref__")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ShapeError(f"tensors are 2-D, got shape {arr.shape}")
        self.data = arr
        self.requires_grad = requires_grad
        self.tape: Tape | None = None
        self.node_id: int | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.data[0, 0])

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag})"

    def __matmul__(self, other):
        return matmul(self, other)

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _tracked(*xs: Tensor) -> bool:
    return any(x.requires_grad or x.tape is not None for x in xs)


def _emit(data: np.ndarray, parents: Sequence[Tensor], backward_fn) -> Tensor:
    out = Tensor(data)
    if _active and _tracked(*parents):
        tape = _active[-1]
        for p in parents:
            if p.tape is not None and p.tape is not tape:
                raise TapeError("tensor belongs to a different tape")
        tape.record(out, parents, backward_fn)
    return out


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    if grad.shape == shape:
        return grad
    if shape[0] == 1 and grad.shape[0] != 1:
        grad = grad.sum(axis=0, keepdims=True)
    if shape[1] == 1 and grad.shape[1] != 1:
        grad = grad.sum(axis=1, keepdims=True)
    return grad


def _broadcast_shape(a: Tensor, b: Tensor, op: str):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# -- products -----------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.cols != b.rows:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} do not align")
    return _emit(a.data @ b.data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def spmm(adj: sp.spmatrix, x: Tensor) -> Tensor:
    """Constant sparse matrix times tensor; only ``x`` receives gradient."""
    if adj.shape[1] != x.rows:
        raise ShapeError(f"spmm: sparse shape {adj.shape} and {x.shape} do not align")
    adj_t = adj.T.tocsr()
    return _emit(np.asarray(adj @ x.data), (x,), lambda g: (np.asarray(adj_t @ g),))


# -- elementwise --------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_shape(a, b, "add")
    return _emit(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_shape(a, b, "mul")
    return _emit(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def scale(a: Tensor, c: float) -> Tensor:
    return _emit(a.data * c, (a,), lambda g: (g * c,))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _emit(a.data * mask, (a,), lambda g: (g * mask,))


def concat(parts: Sequence[Tensor], axis: int = 1) -> Tensor:
    parts = list(parts)
    if not parts:
        raise ShapeError("concat of zero tensors")
    other = 1 - axis
    if len({p.shape[other] for p in parts}) != 1:
        raise ShapeError(f"concat: mismatched shapes {[p.shape for p in parts]}")
    bounds = np.cumsum([0] + [p.shape[axis] for p in parts])

    def backward(g):
        if axis == 1:
            return tuple(g[:, bounds[i]:bounds[i + 1]] for i in range(len(parts)))
        return tuple(g[bounds[i]:bounds[i + 1]] for i in range(len(parts)))

    return _emit(np.concatenate([p.data for p in parts], axis=axis), parts, backward)


# -- reductions ---------------------------------------------------------

def sum_all(a: Tensor) -> Tensor:
    return _emit(a.data.sum().reshape(1, 1), (a,), lambda g: (np.full(a.shape, g[0, 0]),))


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size
    return _emit(
        a.data.mean().reshape(1, 1), (a,), lambda g: (np.full(a.shape, g[0, 0] / n),)
    )


def _argmax_route(a: np.ndarray, axis: int):
    # np.argmax returns the first (lowest-index) maximum on ties
    idx = np.argmax(a, axis=axis)
    return idx


def rowmax(a: Tensor) -> Tensor:
    if a.cols == 0:
        raise ShapeError("rowmax of a tensor with no columns")
    idx = _argmax_route(a.data, 1)
    rows = np.arange(a.rows)

    def backward(g):
        out = np.zeros(a.shape)
        out[rows, idx] = g[:, 0]
        return (out,)

    return _emit(a.data[rows, idx].reshape(-1, 1), (a,), backward)


def rowmean(a: Tensor) -> Tensor:
    if a.cols == 0:
        raise ShapeError("rowmean of a tensor with no columns")
    c = a.cols
    return _emit(
        a.data.mean(axis=1, keepdims=True), (a,), lambda g: (np.repeat(g / c, c, axis=1),)
    )


def segment_max(a: Tensor, offsets: np.ndarray) -> Tensor:
    """Column-wise max over each row block ``offsets[i]:offsets[i+1]``."""
    offsets = np.asarray(offsets)
    sizes = np.diff(offsets)
    if (sizes <= 0).any():
        raise ShapeError("segment_max over an empty segment")
    # reduceat picks values; argmax per segment picks the lowest row on ties
    vals = np.maximum.reduceat(a.data, offsets[:-1], axis=0)
    arg = np.empty(vals.shape, dtype=np.int64)
    for s in range(len(sizes)):
        arg[s] = offsets[s] + np.argmax(a.data[offsets[s]:offsets[s + 1]], axis=0)
    cols = np.arange(a.cols)

    def backward(g):
        out = np.zeros(a.shape)
        for s in range(len(sizes)):
            out[arg[s], cols] += g[s]
        return (out,)

    return _emit(vals, (a,), backward)


def segment_mean(a: Tensor, offsets: np.ndarray) -> Tensor:
    offsets = np.asarray(offsets)
    sizes = np.diff(offsets)
    if (sizes <= 0).any():
        raise ShapeError("segment_mean over an empty segment")
    vals = np.add.reduceat(a.data, offsets[:-1], axis=0) / sizes[:, None]
    seg = np.repeat(np.arange(len(sizes)), sizes)
    return _emit(vals, (a,), lambda g: ((g / sizes[:, None])[seg],))


def colmax(a: Tensor) -> Tensor:
    return segment_max(a, np.array([0, a.rows]))


def colmean(a: Tensor) -> Tensor:
    return segment_mean(a, np.array([0, a.rows]))


# -- loss ---------------------------------------------------------------

def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean negative log-likelihood of the true classes."""
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.size != logits.rows:
        raise LossError(f"{labels.size} labels for {logits.rows} rows of logits")
    if labels.size and (labels.min() < 0 or labels.max() >= logits.cols):
        raise LossError(f"labels must lie in [0, {logits.cols})")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(labels.size)
    loss = float(np.mean(logsum - z[rows, labels]))

    def backward(g):
        grad = softmax(logits.data)
        grad[rows, labels] -= 1.0
        return (grad * (g[0, 0] / labels.size),)

    return _emit(np.array([[loss]]), (logits,), backward)


# -- backward -----------------------------------------------------------

def backward(loss: Tensor) -> dict[Tensor, np.ndarray]:
    """Gradients of a scalar ``loss`` for every parameter it depends on."""
    if loss.tape is None:
        raise TapeError("loss is not on a gradient tape")
    if loss.data.size != 1:
        raise TapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    tape = loss.tape
    if tape.consumed:
        raise TapeError("tape already consumed by a previous backward pass")
    tape.consumed = True
    node_grads: dict[int, np.ndarray] = {loss.node_id: np.ones((1, 1))}
    leaf_grads: dict[Tensor, np.ndarray] = {}
    for i in range(loss.node_id, -1, -1):
        g = node_grads.pop(i, None)
        if g is None:
            continue
        _, parents, fn = tape.nodes[i]
        for p, pg in zip(parents, fn(g)):
            if p.node_id is not None and p.tape is tape:
                prev = node_grads.get(p.node_id)
                node_grads[p.node_id] = pg if prev is None else prev + pg
            elif p.requires_grad:
                prev = leaf_grads.get(p)
                leaf_grads[p] = pg if prev is None else prev + pg
    # drop recorded closures so tape <-> tensor cycles do not pin large buffers
    for out, _, _ in tape.nodes:
        if out is not loss:
            out.tape = None
    tape.nodes.clear()
    return leaf_grads


# -- parameters and optimizer -------------------------------------------

def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, name: str | None = None) -> Tensor:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-limit, limit, size=(fan_in, fan_out)), requires_grad=True, name=name)


def zeros(rows: int, cols: int, name: str | None = None) -> Tensor:
    return Tensor(np.zeros((rows, cols)), requires_grad=True, name=name)


class Adam:
    """Adam with bias correction. Parameters are updated in place."""

    def __init__(self, params: Sequence[Tensor], lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self, grads: dict[Tensor, np.ndarray]) -> None:
        missing = [p.name or repr(p) for p in self.params if p not in grads]
        if missing:
            raise OptimizerError(f"no gradient for parameters: {', '.join(missing)}")
        self.t += 1
        b1, b2 = self.betas
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = grads[p]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state(self) -> dict:
        return {"t": self.t, "m": [m.copy() for m in self.m], "v": [v.copy() for v in self.v]}


def adam_step(params, grads, lr, betas=(0.9, 0.999), eps=1e-8, t=1, state=None) -> dict:
    """Functional Adam update; ``state`` holds first/second moments between calls."""
    params = list(params)
    if state is None:
        state = {"m": [np.zeros_like(p.data) for p in params], "v": [np.zeros_like(p.data) for p in params]}
    opt = Adam(params, lr, betas, eps)
    opt.m, opt.v, opt.t = state["m"], state["v"], t - 1
    opt.step(grads)
    return state
