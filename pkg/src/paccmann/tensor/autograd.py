"""Dense tensors with reverse-mode automatic differentiation on top of numpy.

Each differentiable primitive records its parents and a closure mapping the
output gradient to parent gradients. ``Tensor.backward`` walks the recorded
graph in reverse topological order and accumulates into leaf ``.grad``.
"""

from __future__ import annotations

import numpy as np

from ..errors import AllMasked, BatchTooSmall, IndexOutOfRange, ShapeMismatch


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if dtype is None and arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self):
        return self.data

    def item(self):
        return self.data.item()

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise ShapeMismatch("backward() without a gradient needs a scalar output")
            grad = np.ones_like(self.data)
        topo = _topological_order(self)
        grads = {id(self): np.asarray(grad, dtype=self.dtype)}
        for node in reversed(topo):
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

    # operator sugar
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

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)

    @property
    def T(self):
        return swapaxes(self, -1, -2)


def _topological_order(root):
    order, expanded = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in expanded:
            continue
        expanded.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in expanded:
                stack.append((p, False))
    return order


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def _result(data, parents, backward):
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _coerce(a, b):
    if not isinstance(a, Tensor):
        a = Tensor(np.asarray(a, dtype=b.dtype if isinstance(b, Tensor) else None))
    if not isinstance(b, Tensor):
        b = Tensor(np.asarray(b, dtype=a.dtype))
    return a, b


def _is_basic_index(key):
    key = key if isinstance(key, tuple) else (key,)
    return all(isinstance(k, (int, np.integer, slice)) or k is Ellipsis or k is None for k in key)


# elementwise arithmetic

def add(a, b):
    a, b = _coerce(a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _result(a.data + b.data, (a, b), backward)


def sub(a, b):
    a, b = _coerce(a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)

    return _result(a.data - b.data, (a, b), backward)


def mul(a, b):
    a, b = _coerce(a, b)

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _result(a.data * b.data, (a, b), backward)


def square(x):
    x = as_tensor(x)
    return _result(x.data * x.data, (x,), lambda g: (2.0 * x.data * g,))


def matmul(a, b):
    """Matrix product; ``a`` may carry leading batch axes when ``b`` is 2-D."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeMismatch(f"matmul {a.shape} @ {b.shape}")
    if b.ndim == 2:
        k, n = b.shape

        def backward(g):
            ga = g @ b.data.T
            gb = a.data.reshape(-1, k).T @ g.reshape(-1, n)
            return ga, gb
    else:
        if a.shape[:-2] != b.shape[:-2]:
            raise ShapeMismatch(f"batched matmul {a.shape} @ {b.shape}")

        def backward(g):
            return g @ np.swapaxes(b.data, -1, -2), np.swapaxes(a.data, -1, -2) @ g

    return _result(a.data @ b.data, (a, b), backward)


# activations

def tanh(x):
    x = as_tensor(x)
    y = np.tanh(x.data)
    return _result(y, (x,), lambda g: (g * (1.0 - y * y),))


def sigmoid(x):
    x = as_tensor(x)
    # split by sign so exp never overflows
    d = x.data
    e = np.exp(-np.abs(d))
    y = np.where(d >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(d.dtype, copy=False)
    return _result(y, (x,), lambda g: (g * y * (1.0 - y),))


def relu(x):
    x = as_tensor(x)
    pos = x.data > 0
    return _result(x.data * pos, (x,), lambda g: (g * pos,))


def activation(kind: str, x):
    try:
        fn = {"tanh": tanh, "sigmoid": sigmoid, "relu": relu}[kind]
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}") from None
    return fn(x)


# reductions and shape manipulation

def sum(x, axis=None, keepdims=False):  # noqa: A001 - mirrors numpy
    x = as_tensor(x)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _result(np.sum(x.data, axis=axis, keepdims=keepdims), (x,), backward)


def mean(x, axis=None, keepdims=False):
    x = as_tensor(x)
    count = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return mul(sum(x, axis=axis, keepdims=keepdims), 1.0 / count)


def reshape(x, shape):
    x = as_tensor(x)
    return _result(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def swapaxes(x, a1, a2):
    x = as_tensor(x)
    return _result(np.swapaxes(x.data, a1, a2), (x,), lambda g: (np.swapaxes(g, a1, a2),))


def getitem(x, key):
    x = as_tensor(x)

    basic = _is_basic_index(key)

    def backward(g):
        out = np.zeros_like(x.data)
        if basic:
            out[key] = g
        else:
            np.add.at(out, key, g)
        return (out,)

    return _result(x.data[key], (x,), backward)


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return _result(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), backward)


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]

    def backward(g):
        return tuple(np.moveaxis(g, axis, 0))

    return _result(np.stack([t.data for t in tensors], axis=axis), tuple(tensors), backward)


def max_pool(x, axis=1):
    """Global max over ``axis``; the gradient goes to the first maximal entry."""
    x = as_tensor(x)
    arg = np.expand_dims(np.argmax(x.data, axis=axis), axis)

    def backward(g):
        out = np.zeros_like(x.data)
        np.put_along_axis(out, arg, np.expand_dims(g, axis), axis=axis)
        return (out,)

    return _result(np.take_along_axis(x.data, arg, axis=axis).squeeze(axis), (x,), backward)


# attention and lookup

def softmax_masked(logits, mask=None, axis=-1):
    """Softmax over ``axis`` with masked-out positions set to exactly zero."""
    logits = as_tensor(logits)
    u = logits.data
    mask = np.ones(u.shape, dtype=bool) if mask is None else np.broadcast_to(np.asarray(mask, dtype=bool), u.shape)
    if not np.all(mask.any(axis=axis)):
        raise AllMasked("softmax over a fully masked row")
    top = np.max(np.where(mask, u, -np.inf), axis=axis, keepdims=True)
    e = np.where(mask, np.exp(np.where(mask, u - top, 0.0)), 0.0).astype(u.dtype, copy=False)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (y * (g - np.sum(g * y, axis=axis, keepdims=True)),)

    return _result(y, (logits,), backward)


def embedding(table, indices, pad_index=0):
    """Row lookup ``table[indices]``; the ``pad_index`` row never receives gradient."""
    table = as_tensor(table)
    indices = np.asarray(indices)
    if indices.size and (indices.min() < 0 or indices.max() >= table.shape[0]):
        raise IndexOutOfRange(f"token index outside [0, {table.shape[0]})")

    def backward(g):
        out = np.zeros_like(table.data)
        np.add.at(out, indices, g)
        if pad_index is not None:
            out[pad_index] = 0
        return (out,)

    return _result(table.data[indices], (table,), backward)


# convolution

def conv1d(x, weight, bias=None):
    """'Same'-padded stride-1 cross-correlation.

    ``x``: (B, T, C_in); ``weight``: (F, k, C_in); ``bias``: (F,). Returns (B, T, F).
    Even kernels put the extra zero on the right.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    B, T, C = x.shape
    F, k, Cw = weight.shape
    if Cw != C:
        raise ShapeMismatch(f"kernel channels {Cw} != input channels {C}")
    left = (k - 1) // 2
    xp = np.pad(x.data, ((0, 0), (left, k - 1 - left), (0, 0)))
    # (B, T, C, k) -> (B, T, k, C) -> (B*T, k*C)
    cols = np.lib.stride_tricks.sliding_window_view(xp, k, axis=1)
    cols = np.ascontiguousarray(np.swapaxes(cols, 2, 3)).reshape(B * T, k * C)
    w2 = weight.data.reshape(F, k * C)
    out = (cols @ w2.T).reshape(B, T, F)
    parents = (x, weight)
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data
        parents = parents + (bias,)

    def backward(g):
        g2 = g.reshape(B * T, F)
        gw = (g2.T @ cols).reshape(F, k, C)
        gcols = (g2 @ w2).reshape(B, T, k, C)
        gxp = np.zeros_like(xp)
        for j in range(k):
            gxp[:, j:j + T, :] += gcols[:, :, j, :]
        grads = (gxp[:, left:left + T, :], gw)
        if bias is not None:
            grads = grads + (g2.sum(axis=0),)
        return grads

    return _result(out, parents, backward)


def conv2d(x, weight, bias=None):
    """Convolution whose kernel spans the full embedding height.

    ``x``: (B, T, H) seen as a one-channel H×T image; ``weight``: (F, H, k).
    The height axis collapses, leaving (B, T, F) feature maps.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if weight.ndim != 3 or weight.shape[1] != x.shape[-1]:
        raise ShapeMismatch(f"2-D kernel {weight.shape} must span input height {x.shape[-1]}")
    return conv1d(x, swapaxes(weight, 1, 2), bias)


def conv(x, weight, bias=None, stride=1, dims=1):
    if stride != 1:
        raise ShapeMismatch("only stride 1 is supported")
    return (conv1d if dims == 1 else conv2d)(x, weight, bias)


# regularization

def dropout(x, p=0.5, training=True, rng=None):
    """Inverted dropout: survivors are scaled by ``1 / (1 - p)``."""
    x = as_tensor(x)
    if not 0.0 <= p < 1.0:
        raise ValueError("dropout rate must be in [0, 1)")
    if not training or p == 0.0:
        return x
    rng = rng if rng is not None else np.random.default_rng()
    keep = (rng.random(x.shape) >= p).astype(x.dtype) / x.dtype.type(1.0 - p)
    return _result(x.data * keep, (x,), lambda g: (g * keep,))


def batch_norm(x, gamma, beta, state, training=True):
    """Per-feature normalization of a (B, F) batch.

    ``state`` carries ``running_mean``, ``running_var``, ``momentum`` and ``eps``;
    running statistics are updated in training mode only.
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if x.ndim != 2 or x.shape[1] != gamma.shape[0]:
        raise ShapeMismatch(f"batch_norm input {x.shape} vs {gamma.shape[0]} features")
    dt = x.dtype.type
    if not training:
        inv = 1.0 / np.sqrt(state.running_var + dt(state.eps))
        xhat = (x.data - state.running_mean) * inv

        def backward(g):
            return g * gamma.data * inv, (g * xhat).sum(0), g.sum(0)

        return _result(xhat * gamma.data + beta.data, (x, gamma, beta), backward)
    B = x.shape[0]
    if B < 2:
        raise BatchTooSmall("batch normalization needs at least 2 samples in training")
    mu = x.data.mean(axis=0)
    var = x.data.var(axis=0)
    inv = 1.0 / np.sqrt(var + dt(state.eps))
    xhat = (x.data - mu) * inv
    m = dt(state.momentum)
    state.running_mean = (m * state.running_mean + (dt(1) - m) * mu).astype(x.dtype)
    state.running_var = (m * state.running_var + (dt(1) - m) * var).astype(x.dtype)

    def backward(g):
        dxhat = g * gamma.data
        dx = (inv / B) * (B * dxhat - dxhat.sum(0) - xhat * (dxhat * xhat).sum(0))
        return dx, (g * xhat).sum(0), g.sum(0)

    return _result(xhat * gamma.data + beta.data, (x, gamma, beta), backward)


def mse_loss(pred, target):
    pred = as_tensor(pred)
    diff = sub(pred, Tensor(np.asarray(target, dtype=pred.dtype)))
    return mean(square(diff))
