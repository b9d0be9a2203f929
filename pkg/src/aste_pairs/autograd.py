"""Minimal reverse-mode automatic differentiation over float64 numpy arrays.

Only the operations the encoder and the two classification heads need are
provided. Every op records a closure mapping the output gradient to the
gradients of its parents; ``Tensor.backward`` walks the graph in reverse
topological order.
"""
from __future__ import annotations

import math

import numpy as np

CLAMP_EPS = 1e-12


class MaskError(ValueError):
    """A masked softmax row had no visible entry."""


class GradCheckError(RuntimeError):
    pass


def _as_array(x):
    return np.asarray(x, dtype=np.float64)


def _unbroadcast(grad, shape):
    # sum out leading dims and dims that were broadcast from size 1
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    # make ndarray <op> Tensor fall through to the reflected methods below
    __array_ufunc__ = None

    def __init__(self, data, requires_grad=False, parents=(), backward=None):
        self.data = _as_array(data)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = tuple(parents) if self.requires_grad else ()
        self._backward = backward if self.requires_grad else None

    def __repr__(self):
        return f"Tensor(shape={self.shape})"

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a gradient needs a scalar")
            grad = np.ones_like(self.data)
        order = _topological_order(self)
        grads = {id(self): _as_array(grad)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

    # arithmetic
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(_lift(other)))

    def __rsub__(self, other):
        return add(_lift(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("division by a Tensor is not supported")
        return mul(self, 1.0 / other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 else shape)

    def transpose(self, *axes):
        return transpose(self, axes)


class Parameter(Tensor):
    """Trainable leaf tensor with a dotted path name."""

    def __init__(self, data, name=""):
        super().__init__(np.array(data, dtype=np.float64), requires_grad=True)
        self.name = name

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape})"


def _lift(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _topological_order(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


# elementwise and structural ops


def add(a, b):
    a, b = _lift(a), _lift(b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return Tensor(a.data + b.data, parents=(a, b), backward=backward)


def neg(a):
    return Tensor(-a.data, parents=(a,), backward=lambda g: (-g,))


def mul(a, b):
    a, b = _lift(a), _lift(b)

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return Tensor(a.data * b.data, parents=(a, b), backward=backward)


def matmul(a, b):
    a, b = _lift(a), _lift(b)

    def backward(g):
        if b.ndim == 2 and a.ndim > 2:
            ga = g @ b.data.T
            gb = a.data.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
            return ga, gb
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return Tensor(a.data @ b.data, parents=(a, b), backward=backward)


def tsum(a, axis=None, keepdims=False):
    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return Tensor(a.data.sum(axis=axis, keepdims=keepdims), parents=(a,), backward=backward)


def reshape(a, shape):
    return Tensor(a.data.reshape(shape), parents=(a,), backward=lambda g: (g.reshape(a.shape),))


def transpose(a, axes):
    axes = tuple(axes) if axes else tuple(reversed(range(a.ndim)))
    inverse = tuple(np.argsort(axes))
    return Tensor(a.data.transpose(axes), parents=(a,), backward=lambda g: (g.transpose(inverse),))


def getitem(a, index):
    def backward(g):
        out = np.zeros_like(a.data)
        np.add.at(out, index, g)
        return (out,)

    return Tensor(a.data[index], parents=(a,), backward=backward)


def embedding(weight, ids):
    """Row lookup ``weight[ids]`` with scatter-add backward."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= weight.shape[0]):
        raise IndexError(f"id out of range for table of {weight.shape[0]} rows")

    def backward(g):
        out = np.zeros_like(weight.data)
        np.add.at(out, ids.reshape(-1), g.reshape(-1, weight.shape[1]))
        return (out,)

    return Tensor(weight.data[ids], parents=(weight,), backward=backward)


def concat(tensors, axis=-1):
    tensors = [_lift(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    cuts = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, cuts, axis=axis))

    return Tensor(np.concatenate([t.data for t in tensors], axis=axis), parents=tensors, backward=backward)


def log(a, floor=CLAMP_EPS):
    """Natural log with the input clamped from below at ``floor``."""
    clipped = np.maximum(a.data, floor)

    def backward(g):
        return (np.where(a.data >= floor, g / clipped, 0.0),)

    return Tensor(np.log(clipped), parents=(a,), backward=backward)


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(a):
    x = a.data
    t = np.tanh(_GELU_C * (x + 0.044715 * x**3))

    def backward(g):
        dt = (1.0 - t * t) * _GELU_C * (1.0 + 3 * 0.044715 * x * x)
        return (g * (0.5 * (1.0 + t) + 0.5 * x * dt),)

    return Tensor(0.5 * x * (1.0 + t), parents=(a,), backward=backward)


def layer_norm(a, gain, bias, eps=1e-12):
    x = a.data
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    inv = 1.0 / np.sqrt((centered**2).mean(axis=-1, keepdims=True) + eps)
    xhat = centered * inv

    def backward(g):
        dxhat = g * gain.data
        dx = inv * (dxhat - dxhat.mean(axis=-1, keepdims=True) - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
        lead = tuple(range(g.ndim - 1))
        return dx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return Tensor(xhat * gain.data + bias.data, parents=(a, gain, bias), backward=backward)


def dropout(a, rate, rng):
    if rate <= 0.0 or rng is None:
        return a
    keep = (rng.random(a.shape) >= rate) / (1.0 - rate)
    return mul(a, keep)


def masked_softmax(scores, mask=None):
    """Softmax over the last axis where ``mask`` False entries are excluded.

    Excluded entries come out exactly 0. ``mask`` broadcasts against
    ``scores``; every row must keep at least one entry.
    """
    scores = _lift(scores)
    s = scores.data
    if mask is not None:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), s.shape)
        if not mask.any(axis=-1).all():
            raise MaskError("attention mask has a row with no visible entry")
        s = np.where(mask, s, -np.inf)
    e = np.exp(s - s.max(axis=-1, keepdims=True))
    p = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        return (p * (g - (g * p).sum(axis=-1, keepdims=True)),)

    return Tensor(p, parents=(scores,), backward=backward)


def softmax(scores):
    return masked_softmax(scores, None)


def cross_entropy(dist, gold):
    """Summed ``-gold * log(dist)`` with the log clamped at ``CLAMP_EPS``.

    ``gold`` is a one-hot array shaped like ``dist`` (rows of zeros are
    ignored), or an integer class index for a single distribution.
    """
    dist = _lift(dist)
    gold = np.asarray(gold)
    if gold.ndim == 0 and np.issubdtype(gold.dtype, np.integer):
        gold = np.eye(dist.shape[-1])[int(gold)]
    if gold.shape != dist.shape:
        raise ValueError(f"gold shape {gold.shape} does not match {dist.shape}")
    return tsum(mul(log(dist), -gold.astype(np.float64)))


# verification and optimisation


def grad_check(loss_fn, params, eps=1e-5, floor=1e-5):
    """Largest relative error between reverse-mode and central-difference gradients.

    ``loss_fn`` is a zero-argument callable building a scalar Tensor from
    ``params`` (an iterable of Parameters, or a name -> Parameter mapping).
    Relative error is ``|a - n| / max(|a|, |n|, floor)``.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ValueError("eps must lie in [1e-7, 1e-3]")
    if isinstance(params, dict):
        named = list(params.items())
    else:
        named = [(getattr(p, "name", "") or f"param{i}", p) for i, p in enumerate(params)]
    for _, p in named:
        p.zero_grad()
    loss = loss_fn()
    loss.backward()
    worst = 0.0
    for name, p in named:
        analytic = np.zeros_like(p.data) if p.grad is None else p.grad
        flat = p.data.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + eps
            up = loss_fn().item()
            flat[k] = orig - eps
            down = loss_fn().item()
            flat[k] = orig
            if not (math.isfinite(up) and math.isfinite(down)):
                raise GradCheckError(f"non-finite loss while probing {name}[{k}]")
            numeric = (up - down) / (2 * eps)
            a = analytic.reshape(-1)[k]
            err = abs(a - numeric) / max(abs(a), abs(numeric), floor)
            worst = max(worst, err)
    for _, p in named:
        p.zero_grad()
    return worst


class AdamState:
    def __init__(self, params):
        self.m = {id(p): np.zeros_like(p.data) for p in params}
        self.v = {id(p): np.zeros_like(p.data) for p in params}
        self.step = 0


class Adam:
    """Adam with bias correction. ``step`` clears gradients afterwards."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params.values()) if isinstance(params, dict) else list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.state = AdamState(self.params)

    def step(self):
        adam_step(self.params, self.state, self.lr, self.beta1, self.beta2, self.eps)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()


def adam_step(params, state, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    state.step += 1
    t = state.step
    for p in params:
        if p.grad is not None:
            g = p.grad
            m = state.m[id(p)]
            v = state.v[id(p)]
            m *= beta1
            m += (1 - beta1) * g
            v *= beta2
            v += (1 - beta2) * g * g
            m_hat = m / (1 - beta1**t)
            v_hat = v / (1 - beta2**t)
            p.data -= lr * m_hat / (np.sqrt(v_hat) + eps)
        p.zero_grad()
    return params, state
