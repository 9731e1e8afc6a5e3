"""Minimal reverse-mode differentiation over numpy arrays.

Operations record themselves on the active :class:`Tape` (if any) and the tape
replays them in reverse to accumulate gradients. Only the layer set needed by
the LeNet-style networks is provided: dense, 2-D convolution, max/avg pooling,
relu, tanh, reshape and softmax cross-entropy, plus a few elementwise helpers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "Tensor",
    "Tape",
    "TapeError",
    "add",
    "mul",
    "square",
    "sum_all",
    "dense",
    "conv2d",
    "max_pool2d",
    "avg_pool2d",
    "relu",
    "tanh",
    "reshape",
    "flatten",
    "softmax_cross_entropy",
    "softmax",
]


class TapeError(RuntimeError):
    pass


class Tensor:
    """An array with an optional gradient buffer of the same shape."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate(self, g: np.ndarray) -> None:
        if g.shape != self.data.shape:
            raise ValueError(f"gradient shape {g.shape} does not match tensor shape {self.data.shape}")
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"


@dataclass
class _Node:
    name: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]


_ACTIVE: list["Tape"] = []


class Tape:
    """Ordered record of executed primitives.

    Use as a context manager; primitives called inside the block whose inputs
    require gradients are appended in execution order, which is a valid
    topological order by construction.
    """

    def __init__(self) -> None:
        self.nodes: list[_Node] = []

    def __enter__(self) -> "Tape":
        _ACTIVE.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE.remove(self)

    def __len__(self) -> int:
        return len(self.nodes)

    def backward(self, loss: Tensor) -> None:
        if not self.nodes:
            raise TapeError("backward called on an empty tape")
        if self.nodes[-1].output is not loss:
            raise TapeError("loss is not the final recorded node of the tape")
        if loss.size != 1:
            raise TapeError(f"loss must be a scalar, got shape {loss.shape}")
        loss.grad = np.ones_like(loss.data)
        for node in reversed(self.nodes):
            g = node.output.grad
            if g is None:
                continue
            grads = node.backward(g)
            for inp, gi in zip(node.inputs, grads):
                if gi is not None and inp.requires_grad:
                    inp.accumulate(gi)


def _record(name: str, inputs: tuple[Tensor, ...], out_data: np.ndarray, backward) -> Tensor:
    needs = any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=needs)
    if needs and _ACTIVE:
        _ACTIVE[-1].nodes.append(_Node(name, inputs, out, backward))
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# -- elementwise ------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _record("add", (a, b), a.data + b.data, backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _record("mul", (a, b), a.data * b.data, backward)


def square(a: Tensor) -> Tensor:
    return _record("square", (a,), a.data * a.data, lambda g: (2.0 * a.data * g,))


def sum_all(a: Tensor) -> Tensor:
    return _record("sum", (a,), np.asarray(a.data.sum()), lambda g: (np.broadcast_to(g, a.shape),))


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return _record("relu", (x,), np.where(mask, x.data, 0).astype(x.data.dtype, copy=False), lambda g: (g * mask,))


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return _record("tanh", (x,), y, lambda g: (g * (1.0 - y * y),))


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    return _record("reshape", (x,), x.data.reshape(shape), lambda g: (g.reshape(x.shape),))


def flatten(x: Tensor) -> Tensor:
    """Collapse all but the batch axis, channel-major (C, H, W order)."""
    return reshape(x, (x.shape[0], -1))


# -- layers -----------------------------------------------------------------


def dense(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """``x @ w + b`` with ``x`` of shape (N, in) and ``w`` of shape (in, out)."""
    if x.data.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ValueError(f"dense expects (N, {w.shape[0]}) input, got {x.shape}")

    def backward(g):
        gx = g @ w.data.T if x.requires_grad else None
        gw = x.data.T @ g if w.requires_grad else None
        gb = g.sum(axis=0) if b.requires_grad else None
        return gx, gw, gb

    return _record("dense", (x, w, b), x.data @ w.data + b.data, backward)


def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    n, c, h, w = x.shape
    ho, wo = h - k + 1, w - k + 1
    patches = sliding_window_view(x, (k, k), axis=(2, 3))  # n c ho wo k k
    return patches.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * k * k)


def conv2d(x: Tensor, w: Tensor, b: Tensor, padding: int = 0) -> Tensor:
    """Stride-1 cross-correlation. ``x``: (N, C, H, W), ``w``: (O, C, K, K), ``b``: (O,)."""
    if x.data.ndim != 4 or x.shape[1] != w.shape[1]:
        raise ValueError(f"conv2d expects (N, {w.shape[1]}, H, W) input, got {x.shape}")
    o, c, k, k2 = w.shape
    if k != k2:
        raise ValueError("only square kernels are supported")
    xp = x.data
    if padding:
        xp = np.pad(xp, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    n, _, hp, wp = xp.shape
    ho, wo = hp - k + 1, wp - k + 1
    if ho < 1 or wo < 1:
        raise ValueError(f"kernel {k} larger than padded input {hp}x{wp}")
    cols = _im2col(xp, k)
    wmat = w.data.reshape(o, -1)
    out = (cols @ wmat.T + b.data).reshape(n, ho, wo, o).transpose(0, 3, 1, 2)

    def backward(g):
        g2 = g.transpose(0, 2, 3, 1).reshape(-1, o)
        gw = (g2.T @ cols).reshape(w.shape) if w.requires_grad else None
        gb = g2.sum(axis=0) if b.requires_grad else None
        gx = None
        if x.requires_grad:
            gxp = np.zeros(xp.shape, dtype=g.dtype)
            if c == 1:
                # one input channel: per-tap products skip the large transposed copy
                gflat = g.reshape(n, o, ho * wo)
                for i in range(k):
                    for j in range(k):
                        gxp[:, :, i : i + ho, j : j + wo] += np.matmul(w.data[:, :, i, j].T, gflat).reshape(n, c, ho, wo)
            else:
                dcols = (g2 @ wmat).reshape(n, ho, wo, c, k, k).transpose(0, 3, 4, 5, 1, 2)
                for i in range(k):
                    for j in range(k):
                        gxp[:, :, i : i + ho, j : j + wo] += dcols[:, :, i, j]
            gx = gxp[:, :, padding : hp - padding, padding : wp - padding] if padding else gxp
        return gx, gw, gb

    return _record("conv2d", (x, w, b), np.ascontiguousarray(out), backward)


def max_pool2d(x: Tensor, size: int = 2) -> Tensor:
    """Non-overlapping max pooling; H and W must be divisible by ``size``.

    The gradient is routed to the first maximal element of each window.
    """
    n, c, h, w = x.shape
    if h % size or w % size:
        raise ValueError(f"max_pool2d({size}) needs H, W divisible by {size}, got {h}x{w}")
    ho, wo = h // size, w // size
    win = x.data.reshape(n, c, ho, size, wo, size).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho, wo, size * size)
    arg = win.argmax(axis=-1)
    out = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]

    def backward(g):
        gwin = np.zeros(win.shape, dtype=g.dtype)
        np.put_along_axis(gwin, arg[..., None], g[..., None], axis=-1)
        return (gwin.reshape(n, c, ho, wo, size, size).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h, w),)

    return _record("max_pool2d", (x,), out, backward)


def avg_pool2d(x: Tensor, size: int) -> Tensor:
    n, c, h, w = x.shape
    if h % size or w % size:
        raise ValueError(f"avg_pool2d({size}) needs H, W divisible by {size}, got {h}x{w}")
    ho, wo = h // size, w // size
    out = x.data.reshape(n, c, ho, size, wo, size).mean(axis=(3, 5))

    def backward(g):
        gx = np.broadcast_to(g[:, :, :, None, :, None] / (size * size), (n, c, ho, size, wo, size))
        return (gx.reshape(n, c, h, w),)

    return _record("avg_pool2d", (x,), out, backward)


# -- loss -------------------------------------------------------------------


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean over the batch of ``-log softmax(logits)[label]``."""
    labels = np.asarray(labels)
    if logits.data.ndim != 2:
        raise ValueError(f"logits must be (N, M), got {logits.shape}")
    n, m = logits.shape
    if labels.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= m):
        raise ValueError(f"labels must lie in [0, {m}), got range [{labels.min()}, {labels.max()}]")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(n)
    loss = np.mean(lse - z[rows, labels])

    def backward(g):
        p = np.exp(z - lse[:, None])
        p[rows, labels] -= 1.0
        return (p * (g / n),)

    return _record("softmax_cross_entropy", (logits,), np.asarray(loss, dtype=logits.data.dtype), backward)
