"""Minimal reverse-mode autodiff over numpy arrays.

Training here needs gradients through a transformer encoder-decoder and a
temporal convolutional separator at desk scale, so the engine implements
exactly the operations those models use, each with a hand-written vector-
Jacobian product. Outputs only track parents that require gradients: a
frozen subgraph (e.g. the lower encoder of a frozen foundation model)
therefore builds no tape at all.

Gradient correctness is enforced by central finite-difference checks in
the test suite, which is also how the separator's acceptance numerics are
verified.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .errors import ShapeError


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape` (reverses numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """A numpy array plus the tape edges needed for backprop."""

    __slots__ = ("data", "grad", "requires_grad", "_parents")

    def __init__(self, data, requires_grad: bool = False, _parents=()):
        self.data = np.asarray(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        # sequence of (parent Tensor, vjp: grad_out -> grad_parent)
        self._parents = tuple(_parents)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def __float__(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- graph -----------------------------------------------------------

    def backward(self, grad: np.ndarray | None = None) -> None:
        """Backpropagate from this tensor, accumulating into leaf .grad."""
        if grad is None:
            grad = np.ones_like(self.data)
        grads: dict[int, np.ndarray] = {id(self): np.asarray(grad, dtype=self.data.dtype)}
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent, _ in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if not node._parents:
                if node.requires_grad:
                    node.grad = np.array(g) if node.grad is None else node.grad + g
                continue
            for parent, vjp in node._parents:
                pg = vjp(g)
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + pg
                else:
                    grads[id(parent)] = pg

    # -- operators ---------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __neg__(self):
        return mul(self, -1.0)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 or isinstance(shape[0], int) else shape[0])

    def transpose(self, *axes):
        return transpose(self, axes)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)


def astensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    arr = np.asarray(x)
    if dtype is not None and arr.dtype != dtype:
        arr = arr.astype(dtype)
    return Tensor(arr)


def _make(data: np.ndarray, parents) -> Tensor:
    """Build an op output; drop tape edges for parents without grad."""
    tracked = tuple((p, fn) for p, fn in parents if p.requires_grad or p._parents)
    return Tensor(data, requires_grad=bool(tracked), _parents=tracked)


# -- arithmetic --------------------------------------------------------------


def add(a, b) -> Tensor:
    a = astensor(a)
    b = astensor(b, dtype=a.dtype)
    out = a.data + b.data
    return _make(out, [
        (a, lambda g: _unbroadcast(g, a.data.shape)),
        (b, lambda g: _unbroadcast(g, b.data.shape)),
    ])


def mul(a, b) -> Tensor:
    a = astensor(a)
    b = astensor(b, dtype=a.dtype)
    out = a.data * b.data
    return _make(out, [
        (a, lambda g: _unbroadcast(g * b.data, a.data.shape)),
        (b, lambda g: _unbroadcast(g * a.data, b.data.shape)),
    ])


def matmul(a, b) -> Tensor:
    a = astensor(a)
    b = astensor(b)
    out = a.data @ b.data

    def grad_a(g):
        if b.data.ndim == 1:
            ga = np.multiply.outer(g, b.data)
        else:
            ga = g @ np.swapaxes(b.data, -1, -2)
        return _unbroadcast(ga, a.data.shape)

    def grad_b(g):
        if a.data.ndim == 1:
            gb = np.multiply.outer(a.data, g)
        else:
            gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(gb, b.data.shape)

    return _make(out, [(a, grad_a), (b, grad_b)])


def sum_(x, axis=None, keepdims=False) -> Tensor:
    x = astensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def grad(g):
        if axis is None:
            return np.full_like(x.data, g)
        gg = g if keepdims else np.expand_dims(g, axis)
        return np.broadcast_to(gg, x.data.shape)

    return _make(out, [(x, grad)])


def mean(x, axis=None, keepdims=False) -> Tensor:
    x = astensor(x)
    if axis is None:
        n = x.data.size
    elif isinstance(axis, tuple):
        n = int(np.prod([x.data.shape[a] for a in axis]))
    else:
        n = x.data.shape[axis]
    return mul(sum_(x, axis=axis, keepdims=keepdims), 1.0 / n)


# -- shape manipulation ------------------------------------------------------


def reshape(x, shape) -> Tensor:
    x = astensor(x)
    out = x.data.reshape(shape)
    return _make(out, [(x, lambda g: g.reshape(x.data.shape))])


def transpose(x, axes=None) -> Tensor:
    x = astensor(x)
    if axes is None or len(axes) == 0:
        axes = tuple(reversed(range(x.ndim)))
    out = np.transpose(x.data, axes)
    inv = np.argsort(axes)
    return _make(out, [(x, lambda g: np.transpose(g, inv))])


def getitem(x, key) -> Tensor:
    x = astensor(x)
    out = x.data[key]

    def grad(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, key, g)
        return gx

    return _make(out, [(x, grad)])


def concat(tensors, axis=0) -> Tensor:
    tensors = [astensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def make_grad(i):
        sl = [slice(None)] * out.ndim
        sl[axis] = slice(int(offsets[i]), int(offsets[i + 1]))
        sl = tuple(sl)
        return lambda g: g[sl]

    return _make(out, [(t, make_grad(i)) for i, t in enumerate(tensors)])


def take0(x, indices) -> Tensor:
    """Gather along the leading axis with an integer index array."""
    x = astensor(x)
    idx = np.asarray(indices)
    out = x.data[idx]

    def grad(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, idx, g)
        return gx

    return _make(out, [(x, grad)])


def take_along_last(x, indices) -> Tensor:
    """out[..., i] = x[..., i, indices[..., i]] for the trailing axis."""
    x = astensor(x)
    idx = np.asarray(indices)
    out = np.take_along_axis(x.data, idx[..., None], axis=-1)[..., 0]

    def grad(g):
        gx = np.zeros_like(x.data)
        np.put_along_axis(gx, idx[..., None], g[..., None], axis=-1)
        return gx

    return _make(out, [(x, grad)])


# -- nonlinearities ----------------------------------------------------------


def relu(x) -> Tensor:
    x = astensor(x)
    out = np.maximum(x.data, 0)
    return _make(out, [(x, lambda g: g * (x.data > 0))])


def gelu(x) -> Tensor:
    """tanh-approximation GELU via the kernel backend."""
    x = astensor(x)
    out, t = kernels.gelu(x.data)
    return _make(out, [(x, lambda g: kernels.gelu_grad(x.data, t, g))])


def sigmoid(x) -> Tensor:
    x = astensor(x)
    out = kernels.sigmoid(x.data)
    return _make(out, [(x, lambda g: kernels.sigmoid_grad(out, g))])


def prelu(x, alpha) -> Tensor:
    """PReLU with a single learnable slope (alpha shape (1,))."""
    x = astensor(x)
    alpha = astensor(alpha)
    neg = np.minimum(x.data, 0)
    out = np.maximum(x.data, 0) + alpha.data * neg
    return _make(out, [
        (x, lambda g: g * np.where(x.data > 0, 1.0, alpha.data)),
        (alpha, lambda g: np.asarray([(g * neg).sum()], dtype=alpha.data.dtype)),
    ])


def exp(x) -> Tensor:
    x = astensor(x)
    out = np.exp(x.data)
    return _make(out, [(x, lambda g: g * out)])


def log(x) -> Tensor:
    x = astensor(x)
    out = np.log(x.data)
    return _make(out, [(x, lambda g: g / x.data)])


def softmax(x, axis=-1) -> Tensor:
    x = astensor(x)
    if axis in (-1, x.ndim - 1):
        out = kernels.softmax_last(x.data)
        return _make(out, [(x, lambda g: kernels.softmax_last_grad(out, g))])
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def grad(g):
        gs = (g * out).sum(axis=axis, keepdims=True)
        return out * (g - gs)

    return _make(out, [(x, grad)])


def log_softmax(x, axis=-1) -> Tensor:
    x = astensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    out = z - lse
    sm = np.exp(out)

    def grad(g):
        return g - sm * g.sum(axis=axis, keepdims=True)

    return _make(out, [(x, grad)])


# -- normalization -----------------------------------------------------------


def normalize(x, axes, eps: float = 1e-5) -> Tensor:
    """(x - mean) / sqrt(var + eps) over `axes` (affine applied outside)."""
    x = astensor(x)
    axes = tuple(axes)
    m = x.data.mean(axis=axes, keepdims=True)
    v = x.data.var(axis=axes, keepdims=True)
    inv = 1.0 / np.sqrt(v + eps)
    xhat = (x.data - m) * inv

    def grad(g):
        gm = g.mean(axis=axes, keepdims=True)
        gx = (g * xhat).mean(axis=axes, keepdims=True)
        return inv * (g - gm - xhat * gx)

    return _make(xhat, [(x, grad)])


# -- embeddings and convolutions ---------------------------------------------


def embedding(weight, ids) -> Tensor:
    """Row lookup out[...] = weight[ids]; gradient scatter-adds into weight."""
    weight = astensor(weight)
    idx = np.asarray(ids)
    out = weight.data[idx]

    def grad(g):
        gw = np.zeros_like(weight.data)
        np.add.at(gw, idx, g)
        return gw

    return _make(out, [(weight, grad)])


def conv1d(x, w, b=None, stride: int = 1, padding: int = 0) -> Tensor:
    """Dense 1-D convolution. x: (N, Cin, T), w: (Cout, Cin, K), b: (Cout,).

    Output (N, Cout, T_out) with T_out = (T + 2*padding - K)//stride + 1.
    Implemented as im2col + GEMM; the backward pass reverses the gather.
    """
    x = astensor(x)
    w = astensor(w)
    n, cin, t = x.data.shape
    cout, cin_w, k = w.data.shape
    if cin != cin_w:
        raise ShapeError(f"conv1d channel mismatch: input {cin}, weight {cin_w}")
    t_out = (t + 2 * padding - k) // stride + 1
    xp = np.zeros((n, cin, t + 2 * padding), dtype=x.data.dtype)
    xp[:, :, padding:padding + t] = x.data
    # cols: (N, T_out, Cin, K)
    s0, s1, s2 = xp.strides
    cols = np.lib.stride_tricks.as_strided(
        xp, shape=(n, t_out, cin, k), strides=(s0, s2 * stride, s1, s2)
    )
    cols2 = np.ascontiguousarray(cols).reshape(n, t_out, cin * k)
    wmat = w.data.reshape(cout, cin * k)
    y = cols2 @ wmat.T  # (N, T_out, Cout)
    y = np.swapaxes(y, 1, 2)
    if b is not None:
        b = astensor(b)
        y = y + b.data[None, :, None]

    def grad_x(g):
        gy = np.swapaxes(g, 1, 2)  # (N, T_out, Cout)
        gcols = (gy @ wmat).reshape(n, t_out, cin, k)
        gxp = np.zeros_like(xp)
        span = (t_out - 1) * stride + 1
        for j in range(k):
            gxp[:, :, j:j + span:stride] += np.swapaxes(gcols[:, :, :, j], 1, 2)
        return gxp[:, :, padding:padding + t]

    def grad_w(g):
        gy = np.swapaxes(g, 1, 2).reshape(n * t_out, cout)
        gw = gy.T @ cols2.reshape(n * t_out, cin * k)
        return gw.reshape(cout, cin, k)

    parents = [(x, grad_x), (w, grad_w)]
    if b is not None:
        parents.append((b, lambda g: g.sum(axis=(0, 2))))
    return _make(y, parents)


def depthwise_conv1d(x, w, dilation: int = 1) -> Tensor:
    """Depthwise dilated conv via the kernel backend. x: (N,C,T), w: (C,K)."""
    x = astensor(x)
    w = astensor(w)
    y = kernels.depthwise_conv1d(x.data, w.data, dilation)

    def grad_x(g):
        gx, _ = kernels.depthwise_conv1d_grad(x.data, w.data, dilation, np.ascontiguousarray(g))
        return gx

    def grad_w(g):
        _, gw = kernels.depthwise_conv1d_grad(x.data, w.data, dilation, np.ascontiguousarray(g))
        return gw

    return _make(y, [(x, grad_x), (w, grad_w)])


# -- loss helpers ------------------------------------------------------------


def masked_sequence_nll(logits, labels, mask) -> Tensor:
    """Per-sequence mean negative log-likelihood over masked positions.

    logits: (N, L, V); labels: (N, L) int ids; mask: (N, L) {0,1} floats.
    Positions with mask 0 contribute exactly zero regardless of label value.
    Returns (N,) tensor of per-sequence means over the masked positions.
    """
    logits = astensor(logits)
    msk = np.asarray(mask, dtype=logits.dtype)
    lp = log_softmax(logits, axis=-1)
    picked = take_along_last(lp, np.asarray(labels))
    per_pos = mul(picked, -msk)
    counts = msk.sum(axis=-1)
    return mul(sum_(per_pos, axis=-1), 1.0 / np.maximum(counts, 1.0))
