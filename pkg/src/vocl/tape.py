"""Minimal reverse-mode autodiff over numpy arrays.

Just enough machinery to differentiate the surrogate's loss pipeline:
elementwise arithmetic, a few transcendentals, matmul, indexing, and the
quaternion products the pose chain needs.  Values are eager numpy arrays;
each Var remembers how to push a cotangent back to its parents.  Constants
stay plain arrays — only Vars receive gradients.

Branch guards: callers pick series-vs-closed-form branches with boolean
masks computed from forward values and must route each branch's inputs
through `where` guards so the unused branch never produces non-finite
values (its gradient is masked, but masked NaN is still NaN).
"""

from __future__ import annotations

import numpy as np


class Var:
    """A node in the computation graph: value plus backward closure."""

    __slots__ = ("value", "grad", "parents", "vjp")

    # make ndarray <op> Var defer to our reflected operators
    __array_ufunc__ = None

    def __init__(self, value, parents=(), vjp=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.parents = parents
        self.vjp = vjp

    @property
    def shape(self):
        return self.value.shape

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

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __getitem__(self, idx):
        return getitem(self, idx)


def _value(x):
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=np.float64)


def _unbroadcast(grad, shape):
    """Sum grad down to `shape` after numpy broadcasting."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _binary(a, b, value, vjp_a, vjp_b):
    parents = []
    sides = []
    if isinstance(a, Var):
        parents.append(a)
        sides.append(("a", a.value.shape))
    if isinstance(b, Var):
        parents.append(b)
        sides.append(("b", b.value.shape))
    if not parents:
        return Var(value)

    def vjp(g):
        out = []
        for side, shape in sides:
            contrib = vjp_a(g) if side == "a" else vjp_b(g)
            out.append(_unbroadcast(contrib, shape))
        return out

    return Var(value, tuple(parents), vjp)


def add(a, b):
    av, bv = _value(a), _value(b)
    return _binary(a, b, av + bv, lambda g: g, lambda g: g)


def sub(a, b):
    av, bv = _value(a), _value(b)
    return _binary(a, b, av - bv, lambda g: g, lambda g: -g)


def mul(a, b):
    av, bv = _value(a), _value(b)
    return _binary(a, b, av * bv, lambda g: g * bv, lambda g: g * av)


def div(a, b):
    av, bv = _value(a), _value(b)
    return _binary(a, b, av / bv, lambda g: g / bv, lambda g: -g * av / (bv * bv))


def matmul(a, b):
    av, bv = _value(a), _value(b)
    return _binary(a, b, av @ bv, lambda g: g @ bv.T, lambda g: av.T @ g)


def _unary(a, value, vjp_fn):
    if not isinstance(a, Var):
        return Var(value)
    return Var(value, (a,), lambda g: [vjp_fn(g)])


def tanh(a):
    v = np.tanh(_value(a))
    return _unary(a, v, lambda g: g * (1.0 - v * v))


def sin(a):
    av = _value(a)
    return _unary(a, np.sin(av), lambda g: g * np.cos(av))


def cos(a):
    av = _value(a)
    return _unary(a, np.cos(av), lambda g: -g * np.sin(av))


def sqrt(a):
    v = np.sqrt(_value(a))
    return _unary(a, v, lambda g: g / (2.0 * v))


def absolute(a):
    av = _value(a)
    return _unary(a, np.abs(av), lambda g: g * np.sign(av))


def atan2(y, x):
    yv, xv = _value(y), _value(x)
    denom = xv * xv + yv * yv
    return _binary(y, x, np.arctan2(yv, xv), lambda g: g * xv / denom, lambda g: -g * yv / denom)


def asum(a, axis=None, keepdims=False):
    av = _value(a)
    value = av.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, av.shape).copy()

    return _unary(a, value, vjp)


def getitem(a, idx):
    av = _value(a)

    def vjp(g):
        out = np.zeros_like(av)
        np.add.at(out, idx, g)
        return out

    return _unary(a, av[idx], vjp)


def reshape(a, shape):
    av = _value(a)
    return _unary(a, av.reshape(shape), lambda g: g.reshape(av.shape))


def concat(parts, axis=-1):
    values = [_value(p) for p in parts]
    value = np.concatenate(values, axis=axis)
    var_parents = [p for p in parts if isinstance(p, Var)]
    if not var_parents:
        return Var(value)
    sizes = [v.shape[axis] for v in values]
    offsets = np.cumsum([0] + sizes)

    def vjp(g):
        out = []
        for p, start, stop in zip(parts, offsets[:-1], offsets[1:]):
            if isinstance(p, Var):
                sl = [slice(None)] * g.ndim
                sl[axis if axis >= 0 else g.ndim + axis] = slice(start, stop)
                out.append(g[tuple(sl)])
        return out

    return Var(value, tuple(var_parents), vjp)


def where(mask, a, b):
    """Select by a constant boolean mask; gradients flow to both branches."""
    mask = np.asarray(mask, dtype=bool)
    av, bv = _value(a), _value(b)
    return _binary(
        a, b, np.where(mask, av, bv), lambda g: g * mask, lambda g: g * ~mask
    )


def qmul(a, b):
    """Hamilton product on (..., 4) arrays; bilinear, so VJPs are products too."""
    av, bv = _value(a), _value(b)

    def product(x, y):
        xw, xx, xy, xz = x[..., 0], x[..., 1], x[..., 2], x[..., 3]
        yw, yx, yy, yz = y[..., 0], y[..., 1], y[..., 2], y[..., 3]
        return np.stack(
            [
                xw * yw - xx * yx - xy * yy - xz * yz,
                xw * yx + xx * yw + xy * yz - xz * yy,
                xw * yy - xx * yz + xy * yw + xz * yx,
                xw * yz + xx * yy - xy * yx + xz * yw,
            ],
            axis=-1,
        )

    flip = np.array([1.0, -1.0, -1.0, -1.0])
    return _binary(
        a,
        b,
        product(av, bv),
        lambda g: product(g, bv * flip),
        lambda g: product(av * flip, g),
    )


def qconj(a):
    flip = np.array([1.0, -1.0, -1.0, -1.0])
    return mul(a, flip)


def cross(a, b):
    av, bv = _value(a), _value(b)
    return _binary(
        a,
        b,
        np.cross(av, bv),
        lambda g: np.cross(bv, g),
        lambda g: np.cross(g, av),
    )


def l2norm_rows(a):
    """Row norms over the last axis with a zero gradient at zero rows."""
    av = _value(a)
    norms = np.sqrt((av * av).sum(axis=-1))

    def vjp(g):
        safe = np.where(norms > 0.0, norms, 1.0)
        return (g / safe)[..., None] * av * (norms > 0.0)[..., None]

    return _unary(a, norms, vjp)


def backward(out: Var):
    """Accumulate gradients of scalar `out` into every reachable Var."""
    order = []
    seen = set()
    stack = [(out, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))

    for node in order:
        node.grad = np.zeros_like(node.value)
    out.grad = np.ones_like(out.value)
    for node in reversed(order):
        if node.vjp is None or not node.parents:
            continue
        contribs = node.vjp(node.grad)
        for parent, contrib in zip(node.parents, contribs):
            parent.grad = parent.grad + contrib
