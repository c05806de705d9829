"""Reverse-mode automatic differentiation over numpy vectors.

Each :class:`Tensor` records its parents and a closure mapping the output
gradient to parent gradients.  Operations on tensors that do not require
gradients skip recording entirely, so the same code path serves plain
inference.  Ties in max/min style operations route the gradient to the first
argument (or the existing value for scatter reductions), then to the lowest
index.
"""

from __future__ import annotations

from typing import Callable, Sequence, Union

import numpy as np

ArrayLike = Union["Tensor", np.ndarray, float, int]


class Tensor:
    __slots__ = ("value", "grad", "parents", "backward_fn", "requires_grad")

    def __init__(
        self,
        value,
        parents: Sequence["Tensor"] = (),
        backward_fn: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None,
        requires_grad: bool = False,
    ):
        self.value = np.asarray(value, dtype=float)
        self.grad: np.ndarray | None = None
        self.parents = tuple(parents)
        self.backward_fn = backward_fn
        self.requires_grad = requires_grad

    def __repr__(self) -> str:
        return f"Tensor({self.value!r}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __len__(self) -> int:
        return len(self.value)

    # operator sugar
    def __add__(self, o: ArrayLike) -> "Tensor":
        return add(self, o)

    __radd__ = __add__

    def __sub__(self, o: ArrayLike) -> "Tensor":
        return sub(self, o)

    def __rsub__(self, o: ArrayLike) -> "Tensor":
        return sub(o, self)

    def __mul__(self, o: ArrayLike) -> "Tensor":
        return mul(self, o)

    __rmul__ = __mul__

    def __truediv__(self, o: ArrayLike) -> "Tensor":
        return div(self, o)

    def __neg__(self) -> "Tensor":
        return mul(self, -1.0)

    def __getitem__(self, idx) -> "Tensor":
        return gather(self, idx)


def param(value) -> Tensor:
    """A leaf that accumulates gradients."""
    return Tensor(np.array(value, dtype=float), requires_grad=True)


def const(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _make(value, parents, fn) -> Tensor:
    if any(p.requires_grad for p in parents):
        return Tensor(value, parents, fn, True)
    return Tensor(value)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.reshape(shape)


# --------------------------------------------------------------------------
# elementwise arithmetic
# --------------------------------------------------------------------------


def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = const(a), const(b)
    return _make(a.value + b.value, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = const(a), const(b)
    return _make(a.value - b.value, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = const(a), const(b)
    return _make(a.value * b.value, (a, b),
                 lambda g: (_unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)))


def div(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = const(a), const(b)
    if np.any(b.value == 0):
        with np.errstate(divide="ignore", invalid="ignore"):
            out = a.value / b.value
    else:
        out = a.value / b.value
    return _make(out, (a, b), lambda g: (
        _unbroadcast(g / b.value, a.shape),
        _unbroadcast(-g * a.value / b.value**2, b.shape),
    ))


def exp(a: ArrayLike) -> Tensor:
    a = const(a)
    out = np.exp(a.value)
    return _make(out, (a,), lambda g: (g * out,))


def log(a: ArrayLike) -> Tensor:
    a = const(a)
    with np.errstate(divide="ignore"):
        out = np.log(a.value)
    return _make(out, (a,), lambda g: (g / a.value,))


def absolute(a: ArrayLike) -> Tensor:
    """|a| with zero subgradient at 0."""
    a = const(a)
    return _make(np.abs(a.value), (a,), lambda g: (g * np.sign(a.value),))


def relu(a: ArrayLike) -> Tensor:
    """max(0, a) with a conventional (zero) gradient below 0."""
    a = const(a)
    return _make(np.maximum(a.value, 0.0), (a,), lambda g: (g * (a.value > 0),))


def clamp(a: ArrayLike, lo: float = 0.0, hi: float = 1.0, scale: float = 1.0, side: str = "both") -> Tensor:
    """Clamp values; gradients beyond the clamped ``side`` ("lo", "hi" or "both")
    are multiplied by ``scale``, gradients beyond the other side are zeroed."""
    a = const(a)
    out = np.clip(a.value, lo, hi)
    if scale == 1.0 and side == "both":
        return _make(out, (a,), lambda g: (g,))
    below, above = a.value < lo, a.value > hi
    f = np.ones(a.shape)
    f[below] = scale if side in ("lo", "both") else 0.0
    f[above] = scale if side in ("hi", "both") else 0.0
    return _make(out, (a,), lambda g: (g * f,))


def maximum(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = const(a), const(b)
    pick_a = a.value >= b.value
    return _make(np.where(pick_a, a.value, b.value), (a, b), lambda g: (
        _unbroadcast(np.where(pick_a, g, 0.0), a.shape),
        _unbroadcast(np.where(pick_a, 0.0, g), b.shape),
    ))


def minimum(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = const(a), const(b)
    pick_a = a.value <= b.value
    return _make(np.where(pick_a, a.value, b.value), (a, b), lambda g: (
        _unbroadcast(np.where(pick_a, g, 0.0), a.shape),
        _unbroadcast(np.where(pick_a, 0.0, g), b.shape),
    ))


def where(mask: np.ndarray, a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = const(a), const(b)
    mask = np.asarray(mask, dtype=bool)
    return _make(np.where(mask, a.value, b.value), (a, b), lambda g: (
        _unbroadcast(np.where(mask, g, 0.0), a.shape),
        _unbroadcast(np.where(mask, 0.0, g), b.shape),
    ))


# --------------------------------------------------------------------------
# reductions and indexing
# --------------------------------------------------------------------------


def total(a: ArrayLike) -> Tensor:
    a = const(a)
    return _make(a.value.sum(), (a,), lambda g: (np.broadcast_to(g, a.shape).copy(),))


def mean(a: ArrayLike) -> Tensor:
    a = const(a)
    n = max(a.value.size, 1)
    return _make(a.value.mean() if a.value.size else 0.0, (a,),
                 lambda g: (np.broadcast_to(g / n, a.shape).copy(),))


def gather(a: ArrayLike, idx) -> Tensor:
    a = const(a)
    idx = np.asarray(idx)

    def back(g: np.ndarray):
        out = np.zeros(a.shape)
        np.add.at(out, idx, g)
        return (out,)

    return _make(a.value[idx], (a,), back)


def expand(a: ArrayLike, n: int) -> Tensor:
    """Broadcast a scalar to a length-``n`` vector."""
    a = const(a)
    return _make(np.full(n, float(a.value)), (a,), lambda g: (np.asarray(g.sum()),))


def concat(parts: Sequence[ArrayLike]) -> Tensor:
    ts = [const(p) for p in parts]
    cuts = np.cumsum([0] + [t.value.size for t in ts])
    return _make(np.concatenate([t.value.ravel() for t in ts]), ts,
                 lambda g: tuple(g[cuts[i]:cuts[i + 1]].reshape(t.shape) for i, t in enumerate(ts)))


def _scatter(base: Tensor, idx: np.ndarray, src: Tensor, better) -> Tensor:
    """result[r] = best of base[r] and all src[k] with idx[k] = r."""
    idx = np.asarray(idx, dtype=np.int64)
    out = base.value.copy()
    if better is np.greater:
        np.maximum.at(out, idx, src.value)
    else:
        np.minimum.at(out, idx, src.value)
    if not (base.requires_grad or src.requires_grad):
        return Tensor(out)
    won = (src.value == out[idx]) & better(src.value, base.value[idx])
    cand = np.nonzero(won)[0]
    _, first = np.unique(idx[cand], return_index=True)
    chosen = cand[first]
    src_mask = np.zeros(src.shape, dtype=bool)
    src_mask[chosen] = True
    base_mask = np.ones(base.shape, dtype=bool)
    base_mask[idx[chosen]] = False
    return Tensor(out, (base, src), lambda g: (np.where(base_mask, g, 0.0), np.where(src_mask, g[idx], 0.0)), True)


def scatter_max(base: ArrayLike, idx, src: ArrayLike) -> Tensor:
    return _scatter(const(base), idx, const(src), np.greater)


def scatter_min(base: ArrayLike, idx, src: ArrayLike) -> Tensor:
    return _scatter(const(base), idx, const(src), np.less)


def segment_reduce(src: ArrayLike, idx, n: int, kind: str, empty: float) -> Tensor:
    """Per-group min or max of ``src``; groups without members get ``empty``."""
    src = const(src)
    idx = np.asarray(idx, dtype=np.int64)
    if kind == "min":
        red = scatter_min(np.full(n, np.inf), idx, src)
    elif kind == "max":
        red = scatter_max(np.full(n, -np.inf), idx, src)
    else:
        raise ValueError(kind)
    hollow = ~np.isfinite(red.value)
    return where(hollow, np.full(n, empty), red) if hollow.any() else red


# --------------------------------------------------------------------------
# backward
# --------------------------------------------------------------------------


def backward(root: Tensor, seed: np.ndarray | float = 1.0) -> None:
    """Accumulate d root / d leaf into ``leaf.grad`` for every recorded leaf."""
    if not root.requires_grad:
        return
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        t, done = stack.pop()
        if done:
            order.append(t)
            continue
        if id(t) in seen:
            continue
        seen.add(id(t))
        stack.append((t, True))
        for p in t.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    grads: dict[int, np.ndarray] = {id(root): np.broadcast_to(np.asarray(seed, dtype=float), root.shape).copy()}
    for t in reversed(order):
        g = grads.pop(id(t), None)
        if g is None:
            continue
        if t.backward_fn is None:
            t.grad = g if t.grad is None else t.grad + g
            continue
        for p, pg in zip(t.parents, t.backward_fn(g)):
            if pg is None or not p.requires_grad:
                continue
            k = id(p)
            grads[k] = pg if k not in grads else grads[k] + pg
