"""Array-valued reverse-mode automatic differentiation on a dynamic tape.

Each :class:`Var` wraps a numpy array and records the operation that produced
it together with a vector-Jacobian callback.  Calling :func:`backward` on a
scalar-valued Var walks the tape once in reverse topological order and
accumulates gradients on every node it can reach.

The op set is deliberately small: exactly what recurrent nets, affine coupling
flows and Gaussian likelihoods need.  Broadcasting is supported on the
elementwise ops; gradients of broadcast inputs are summed back to their shape.
"""

from __future__ import annotations

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape``, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Var:
    """A tape node: a float64 array plus the recipe for its gradient."""

    __slots__ = ("value", "grad", "parents", "vjp")

    def __init__(self, value, parents=(), vjp=None):
        self.value = np.asarray(value, dtype=float)
        self.grad = None
        self.parents = parents
        self.vjp = vjp

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Var(shape={self.value.shape}, leaf={self.vjp is None})"

    # -- elementwise arithmetic -------------------------------------------

    def __add__(self, other):
        other = as_var(other)
        out = Var(self.value + other.value, (self, other))
        out.vjp = lambda g: (_unbroadcast(g, self.shape), _unbroadcast(g, other.shape))
        return out

    __radd__ = __add__

    def __neg__(self):
        out = Var(-self.value, (self,))
        out.vjp = lambda g: (-g,)
        return out

    def __sub__(self, other):
        return self + (-as_var(other))

    def __rsub__(self, other):
        return as_var(other) + (-self)

    def __mul__(self, other):
        other = as_var(other)
        out = Var(self.value * other.value, (self, other))
        out.vjp = lambda g: (
            _unbroadcast(g * other.value, self.shape),
            _unbroadcast(g * self.value, other.shape),
        )
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_var(other)
        out = Var(self.value / other.value, (self, other))
        out.vjp = lambda g: (
            _unbroadcast(g / other.value, self.shape),
            _unbroadcast(-g * self.value / other.value**2, other.shape),
        )
        return out

    def __rtruediv__(self, other):
        return as_var(other) / self

    def __pow__(self, k):
        if not isinstance(k, (int, float)):
            raise TypeError("only constant exponents are supported")
        out = Var(self.value**k, (self,))
        out.vjp = lambda g: (g * k * self.value ** (k - 1),)
        return out

    # -- linear algebra ----------------------------------------------------

    def __matmul__(self, other):
        other = as_var(other)
        a, b = self.value, other.value
        if a.ndim != 2 or b.ndim != 2:
            raise ValueError(f"matmul expects 2-D operands, got {a.shape} @ {b.shape}")
        out = Var(a @ b, (self, other))
        out.vjp = lambda g: (g @ b.T, a.T @ g)
        return out

    # -- shape manipulation ------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.shape
        out = Var(self.value.reshape(shape), (self,))
        out.vjp = lambda g: (g.reshape(old),)
        return out

    def __getitem__(self, idx):
        out = Var(self.value[idx], (self,))

        def vjp(g):
            full = np.zeros_like(self.value)
            np.add.at(full, idx, g)
            return (full,)

        out.vjp = vjp
        return out

    def sum(self, axis=None, keepdims=False):
        out = Var(self.value.sum(axis=axis, keepdims=keepdims), (self,))

        def vjp(g):
            if axis is None:
                return (np.broadcast_to(g, self.shape).copy(),)
            gg = g if keepdims else np.expand_dims(g, axis)
            return (np.broadcast_to(gg, self.shape).copy(),)

        out.vjp = vjp
        return out

    def mean(self, axis=None, keepdims=False):
        n = self.value.size if axis is None else self.value.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) / n


def as_var(x) -> Var:
    return x if isinstance(x, Var) else Var(x)


# -- nonlinear primitives ---------------------------------------------------


def tanh(x: Var) -> Var:
    x = as_var(x)
    t = np.tanh(x.value)
    out = Var(t, (x,))
    out.vjp = lambda g: (g * (1.0 - t * t),)
    return out


def exp(x: Var) -> Var:
    x = as_var(x)
    e = np.exp(x.value)
    out = Var(e, (x,))
    out.vjp = lambda g: (g * e,)
    return out


def log(x: Var) -> Var:
    x = as_var(x)
    out = Var(np.log(x.value), (x,))
    out.vjp = lambda g: (g / x.value,)
    return out


def sqrt(x: Var) -> Var:
    x = as_var(x)
    s = np.sqrt(x.value)
    out = Var(s, (x,))
    out.vjp = lambda g: (g * 0.5 / s,)
    return out


def softplus(x: Var) -> Var:
    """log(1 + exp(x)) computed stably; derivative is the logistic function."""
    x = as_var(x)
    out = Var(np.logaddexp(0.0, x.value), (x,))
    out.vjp = lambda g: (g * _sigmoid(x.value),)
    return out


def _sigmoid(a: np.ndarray) -> np.ndarray:
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    ea = np.exp(a[~pos])
    out[~pos] = ea / (1.0 + ea)
    return out


def absolute(x: Var) -> Var:
    """|x| with the subgradient 0 at the kink."""
    x = as_var(x)
    out = Var(np.abs(x.value), (x,))
    out.vjp = lambda g: (g * np.sign(x.value),)
    return out


def concat(vars_, axis=0) -> Var:
    vars_ = [as_var(v) for v in vars_]
    sizes = [v.value.shape[axis] for v in vars_]
    out = Var(np.concatenate([v.value for v in vars_], axis=axis), tuple(vars_))
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    out.vjp = vjp
    return out


def stack(vars_, axis=0) -> Var:
    vars_ = [as_var(v) for v in vars_]
    out = Var(np.stack([v.value for v in vars_], axis=axis), tuple(vars_))

    def vjp(g):
        return tuple(np.moveaxis(g, axis, 0))

    out.vjp = vjp
    return out


# -- the backward pass ------------------------------------------------------


def topo_order(root: Var) -> list:
    """Iterative post-order DFS; deep graphs must not hit the recursion limit."""
    order, seen = [], set()
    stack_ = [(root, False)]
    while stack_:
        node, expanded = stack_.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack_.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack_.append((p, False))
    return order


def backward(root: Var, leaves=None) -> None:
    """Accumulate d(root)/d(node) into ``node.grad`` for the whole graph.

    ``root`` must be scalar-valued.  Previous ``grad`` contents on reachable
    nodes are discarded.  If ``leaves`` is given, any of them not reached by
    the graph get a zero gradient so callers can treat grads uniformly.
    """
    if root.value.size != 1:
        raise ValueError(f"backward needs a scalar root, got shape {root.value.shape}")
    order = topo_order(root)
    for node in order:
        node.grad = None
    if leaves is not None:
        for leaf in leaves:
            leaf.grad = None
    root.grad = np.ones_like(root.value)
    for node in reversed(order):
        if node.grad is None or node.vjp is None:
            continue
        for parent, g in zip(node.parents, node.vjp(node.grad)):
            g = np.asarray(g)
            if parent.grad is None:
                parent.grad = g.copy()
            else:
                parent.grad = parent.grad + g
    if leaves is not None:
        for leaf in leaves:
            if leaf.grad is None:
                leaf.grad = np.zeros_like(leaf.value)


def grad_check(fn, xs, h: float = 1e-4, rel: float = 1e-5) -> float:
    """Compare reverse-mode grads of ``fn(*vars)`` against central differences.

    Returns the worst relative error over all coordinates of all inputs and
    raises if it exceeds ``rel``.  ``fn`` must build a scalar Var from the
    Var-wrapped inputs.
    """
    vars_ = [Var(np.asarray(x, dtype=float)) for x in xs]
    out = fn(*vars_)
    backward(out, leaves=vars_)
    worst = 0.0
    for k, v in enumerate(vars_):
        flat = v.value.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = float(fn(*[Var(w.value) for w in vars_]).value)
            flat[i] = orig - h
            dn = float(fn(*[Var(w.value) for w in vars_]).value)
            flat[i] = orig
            fd = (up - dn) / (2.0 * h)
            ad = v.grad.ravel()[i]
            err = abs(ad - fd) / max(1.0, abs(fd))
            worst = max(worst, err)
            if err > rel:
                raise AssertionError(
                    f"gradient mismatch on input {k} coord {i}: ad={ad} fd={fd} err={err:.3g}"
                )
    return worst


__all__ = [
    "Var",
    "as_var",
    "tanh",
    "exp",
    "log",
    "sqrt",
    "softplus",
    "absolute",
    "concat",
    "stack",
    "backward",
    "topo_order",
    "grad_check",
]
