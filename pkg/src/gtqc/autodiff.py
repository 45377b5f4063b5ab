"""A small reverse-mode differentiation tape over numpy arrays.

Only the operations the models need are provided. Every op records its
parents and a vector-Jacobian product; ``Tape.backward`` replays them in
reverse once.
"""

from __future__ import annotations

import numpy as np


class TapeConsumedError(RuntimeError):
    pass


class Var:
    __slots__ = ("value", "tape", "index")

    def __init__(self, value, tape: "Tape", index: int):
        self.value = value
        self.tape = tape
        self.index = index

    @property
    def shape(self):
        return self.value.shape

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, neg(other))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return neg(self)

    def __repr__(self):
        return f"Var(shape={np.shape(self.value)})"


class Tape:
    """Records a forward computation for a single reverse pass."""

    def __init__(self):
        self._parents: list[tuple[int, ...]] = []
        self._vjps: list = []
        self._names: dict[int, str] = {}
        self._shapes: dict[int, tuple] = {}
        self._consumed = False

    def __len__(self):
        return len(self._vjps)

    def leaf(self, value, name: str | None = None) -> Var:
        if self._consumed:
            raise TapeConsumedError("tape already used for a backward pass")
        v = Var(np.asarray(value, dtype=float), self, len(self._vjps))
        self._parents.append(())
        self._vjps.append(None)
        if name is not None:
            if name in self._names.values():
                raise ValueError(f"duplicate leaf name {name!r}")
            self._names[v.index] = name
            self._shapes[v.index] = v.value.shape
        return v

    def record(self, value, parents: tuple[Var, ...], vjp) -> Var:
        if self._consumed:
            raise TapeConsumedError("tape already used for a backward pass")
        v = Var(value, self, len(self._vjps))
        self._parents.append(tuple(p.index for p in parents))
        self._vjps.append(vjp)
        return v

    def backward(self, out: Var, grad=None) -> dict[str, np.ndarray]:
        """Gradients of ``out`` (seeded with ``grad``, default ones) for all named leaves."""
        if self._consumed:
            raise TapeConsumedError("tape already used for a backward pass")
        self._consumed = True
        grads: dict[int, np.ndarray] = {
            out.index: np.ones_like(out.value) if grad is None else np.asarray(grad, dtype=float)
        }
        for idx in range(out.index, -1, -1):
            # named leaves keep their gradient, everything else is freed once used
            g = grads.get(idx) if idx in self._names else grads.pop(idx, None)
            if g is None or self._vjps[idx] is None:
                continue
            for p, pg in zip(self._parents[idx], self._vjps[idx](g)):
                if pg is None:
                    continue
                grads[p] = grads[p] + pg if p in grads else pg
        return {
            name: grads[idx] if idx in grads else np.zeros(self._shapes[idx])
            for idx, name in self._names.items()
        }


def _lift(x, tape: Tape) -> Var:
    if isinstance(x, Var):
        return x
    return tape.record(np.asarray(x, dtype=float), (), None)


def _tape_of(*xs) -> Tape:
    for x in xs:
        if isinstance(x, Var):
            return x.tape
    raise TypeError("at least one operand must be a Var")


def unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum ``g`` down to ``shape`` after numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b) -> Var:
    tape = _tape_of(a, b)
    a, b = _lift(a, tape), _lift(b, tape)
    sa, sb = a.value.shape, b.value.shape
    return tape.record(
        a.value + b.value, (a, b), lambda g: (unbroadcast(g, sa), unbroadcast(g, sb))
    )


def neg(a: Var) -> Var:
    return a.tape.record(-a.value, (a,), lambda g: (-g,))


def mul(a, b) -> Var:
    tape = _tape_of(a, b)
    a, b = _lift(a, tape), _lift(b, tape)
    av, bv = a.value, b.value
    return tape.record(
        av * bv,
        (a, b),
        lambda g: (unbroadcast(g * bv, av.shape), unbroadcast(g * av, bv.shape)),
    )


def matmul(a, b) -> Var:
    """``a @ b`` with numpy semantics, including a 1-D right operand."""
    tape = _tape_of(a, b)
    a, b = _lift(a, tape), _lift(b, tape)
    av, bv = a.value, b.value
    if bv.ndim == 1:

        def vjp(g):
            return g[..., None] * bv, np.tensordot(g, av, axes=g.ndim)

        return tape.record(av @ bv, (a, b), vjp)

    def vjp(g):
        ga = g @ np.swapaxes(bv, -1, -2)
        gb = np.swapaxes(av, -1, -2) @ g
        return unbroadcast(ga, av.shape), unbroadcast(gb, bv.shape)

    return tape.record(av @ bv, (a, b), vjp)


def relu(a: Var) -> Var:
    # subgradient at exactly zero is taken as zero
    mask = a.value > 0
    return a.tape.record(np.where(mask, a.value, 0.0), (a,), lambda g: (g * mask,))


def concat(xs: list[Var], axis: int = -1) -> Var:
    tape = _tape_of(*xs)
    xs = [_lift(x, tape) for x in xs]
    sizes = [x.value.shape[axis] for x in xs]
    cuts = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, cuts, axis=axis))

    return tape.record(np.concatenate([x.value for x in xs], axis=axis), tuple(xs), vjp)


def softmax(a: Var, mask: np.ndarray | None = None) -> Var:
    """Softmax along the last axis; entries where ``mask`` is False get zero weight."""
    z = a.value
    if mask is not None:
        z = np.where(mask, z, -np.inf)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=-1, keepdims=True)

    def vjp(g):
        return (s * (g - (g * s).sum(axis=-1, keepdims=True)),)

    return a.tape.record(s, (a,), vjp)


def sum_(a: Var, axis=None, keepdims: bool = False) -> Var:
    shape = a.value.shape

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return a.tape.record(a.value.sum(axis=axis, keepdims=keepdims), (a,), vjp)


def cross_entropy(logits: Var, labels: np.ndarray, weights: np.ndarray | None = None) -> Var:
    """Weighted mean of ``-log softmax(logits)[label]`` over the leading axes."""
    z = logits.value
    flat = z.reshape(-1, z.shape[-1])
    lab = np.asarray(labels).reshape(-1)
    w = np.ones(lab.shape) if weights is None else np.asarray(weights, float).reshape(-1)
    m = flat.max(axis=1, keepdims=True)
    logp = flat - m - np.log(np.exp(flat - m).sum(axis=1, keepdims=True))
    total = w.sum()
    picked = logp[np.arange(lab.size), np.where(w > 0, lab, 0)]
    loss = -(w * picked).sum() / total

    def vjp(g):
        p = np.exp(logp)
        p[np.arange(lab.size), np.where(w > 0, lab, 0)] -= 1.0
        return ((g * p * (w / total)[:, None]).reshape(z.shape),)

    return logits.tape.record(np.asarray(loss), (logits,), vjp)


def mean_squared_error(pred: Var, target: np.ndarray, weights: np.ndarray | None = None) -> Var:
    diff = pred.value - target
    w = np.ones(diff.shape[:-1] or (1,)) if weights is None else np.asarray(weights, float)
    wb = np.broadcast_to(w.reshape(w.shape + (1,) * (diff.ndim - w.ndim)), diff.shape)
    denom = wb.sum()
    loss = (wb * diff**2).sum() / denom
    return pred.tape.record(np.asarray(loss), (pred,), lambda g: (g * 2 * wb * diff / denom,))


def mean_absolute_error(pred: Var, target: np.ndarray, weights: np.ndarray | None = None) -> Var:
    diff = pred.value - target
    w = np.ones(diff.shape[:-1] or (1,)) if weights is None else np.asarray(weights, float)
    wb = np.broadcast_to(w.reshape(w.shape + (1,) * (diff.ndim - w.ndim)), diff.shape)
    denom = wb.sum()
    loss = (wb * np.abs(diff)).sum() / denom
    return pred.tape.record(np.asarray(loss), (pred,), lambda g: (g * wb * np.sign(diff) / denom,))
