"""A small reverse-mode autodiff tape over numpy arrays.

Only the handful of ops the encoder, affinity head and student need are
provided, each with a hand-written backward rule. Values are float64.
"""

from __future__ import annotations

import numpy as np

GELU_C = np.sqrt(2.0 / np.pi)


class Var:
    __slots__ = ("value", "grad", "parents", "backward_fn", "name")

    def __init__(self, value, parents=(), backward_fn=None, name=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.parents = parents
        self.backward_fn = backward_fn
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_var(other)))

    def __rsub__(self, other):
        return add(as_var(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Var(shape={self.value.shape}, name={self.name})"


def as_var(x):
    return x if isinstance(x, Var) else Var(x)


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _accumulate(var, g):
    var.grad = g if var.grad is None else var.grad + g


def backward(root, seed=None):
    """Accumulate d(root)/d(node) into ``node.grad`` for every ancestor."""
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))
    root.grad = np.ones_like(root.value) if seed is None else np.asarray(seed, dtype=np.float64)
    for node in reversed(order):
        if node.backward_fn is not None and node.grad is not None:
            node.backward_fn(node.grad)


# --- elementwise -------------------------------------------------------------

def add(a, b):
    a, b = as_var(a), as_var(b)
    out = Var(a.value + b.value, (a, b))

    def bw(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))
    out.backward_fn = bw
    return out


def neg(a):
    out = Var(-a.value, (a,))
    out.backward_fn = lambda g: _accumulate(a, -g)
    return out


def mul(a, b):
    a, b = as_var(a), as_var(b)
    out = Var(a.value * b.value, (a, b))

    def bw(g):
        _accumulate(a, _unbroadcast(g * b.value, a.shape))
        _accumulate(b, _unbroadcast(g * a.value, b.shape))
    out.backward_fn = bw
    return out


def sigmoid(a):
    y = 0.5 * (1.0 + np.tanh(0.5 * a.value))  # overflow-free logistic
    out = Var(y, (a,))
    out.backward_fn = lambda g: _accumulate(a, g * y * (1.0 - y))
    return out


def gelu(a):
    """Tanh approximation of GELU."""
    x = a.value
    x2 = x * x
    t = np.tanh(GELU_C * x * (1.0 + 0.044715 * x2))
    out = Var(0.5 * x * (1.0 + t), (a,))

    def bw(g):
        dinner = GELU_C * (1.0 + 3 * 0.044715 * x2)
        _accumulate(a, g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner))
    out.backward_fn = bw
    return out


# --- linear algebra ----------------------------------------------------------

def matmul(a, b):
    """``a @ b`` where ``b`` is a 2-D weight (or both batched)."""
    a, b = as_var(a), as_var(b)
    out = Var(a.value @ b.value, (a, b))

    def bw(g):
        _accumulate(a, _unbroadcast(g @ np.swapaxes(b.value, -1, -2), a.shape))
        gb = np.swapaxes(a.value, -1, -2) @ g
        _accumulate(b, _unbroadcast(gb, b.shape))
    out.backward_fn = bw
    return out


def einsum(spec, a, b):
    """Two-operand einsum; every input index must appear in the output or the other operand."""
    a, b = as_var(a), as_var(b)
    ins, out_idx = spec.split("->")
    ia, ib = ins.split(",")
    out = Var(np.einsum(spec, a.value, b.value), (a, b))

    def bw(g):
        _accumulate(a, np.einsum(f"{out_idx},{ib}->{ia}", g, b.value))
        _accumulate(b, np.einsum(f"{out_idx},{ia}->{ib}", g, a.value))
    out.backward_fn = bw
    return out


# --- reductions / shape ------------------------------------------------------

def sum_(a, axis=None, keepdims=False):
    out = Var(a.value.sum(axis=axis, keepdims=keepdims), (a,))

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g, a.shape).copy())
    out.backward_fn = bw
    return out


def reshape(a, shape):
    out = Var(a.value.reshape(shape), (a,))
    out.backward_fn = lambda g: _accumulate(a, g.reshape(a.shape))
    return out


def concat(vars_, axis):
    vars_ = [as_var(v) for v in vars_]
    out = Var(np.concatenate([v.value for v in vars_], axis=axis), tuple(vars_))
    sizes = np.cumsum([v.shape[axis] for v in vars_])[:-1]

    def bw(g):
        for v, piece in zip(vars_, np.split(g, sizes, axis=axis)):
            _accumulate(v, piece)
    out.backward_fn = bw
    return out


def stack(vars_, axis):
    vars_ = [as_var(v) for v in vars_]
    out = Var(np.stack([v.value for v in vars_], axis=axis), tuple(vars_))

    def bw(g):
        for k, v in enumerate(vars_):
            _accumulate(v, np.take(g, k, axis=axis))
    out.backward_fn = bw
    return out


# --- normalization / attention ------------------------------------------------

def layer_norm(x, gamma, beta, eps=1e-5):
    """Normalize over the last axis, then scale and shift."""
    x, gamma, beta = as_var(x), as_var(gamma), as_var(beta)
    mu = x.value.mean(axis=-1, keepdims=True)
    xc = x.value - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv
    out = Var(xhat * gamma.value + beta.value, (x, gamma, beta))

    def bw(g):
        d = x.shape[-1]
        _accumulate(gamma, _unbroadcast(g * xhat, gamma.shape))
        _accumulate(beta, _unbroadcast(g, beta.shape))
        gx = g * gamma.value
        dx = inv * (gx - gx.mean(axis=-1, keepdims=True)
                    - xhat * (gx * xhat).sum(axis=-1, keepdims=True) / d)
        _accumulate(x, dx)
    out.backward_fn = bw
    return out


def masked_softmax(logits, mask, axis=-1):
    """Softmax over ``axis`` restricted to ``mask``; fully masked slices give zeros."""
    logits = as_var(logits)
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), logits.shape)
    x = np.where(mask, logits.value, -np.inf)
    m = np.max(x, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    e = np.where(mask, np.exp(x - m), 0.0)
    den = e.sum(axis=axis, keepdims=True)
    p = e / np.where(den > 0, den, 1.0)
    out = Var(p, (logits,))

    def bw(g):
        _accumulate(logits, p * (g - (g * p).sum(axis=axis, keepdims=True)))
    out.backward_fn = bw
    return out


def parameters_grads(params):
    """Collect ``{name: grad}`` (zeros where no gradient flowed)."""
    return {k: (v.grad if v.grad is not None else np.zeros_like(v.value))
            for k, v in params.items()}
