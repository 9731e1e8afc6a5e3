"""Central finite-difference audit of every layer primitive."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor


@dataclass(frozen=True)
class CheckResult:
    primitive: str
    config: str
    rel_error: float

    def passed(self, tol: float = 1e-4) -> bool:
        return self.rel_error < tol


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """``|a - b| / max(|a|, |b|)`` in the Euclidean norm (0 when both vanish)."""
    denom = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if denom == 0 else float(np.linalg.norm(a - b) / denom)


def numerical_gradient(f: Callable[[], float], x: np.ndarray, eps: float = 1e-3) -> np.ndarray:
    """Central differences of the scalar ``f()`` w.r.t. ``x``, perturbing ``x`` in place."""
    g = np.zeros_like(x)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        fp = f()
        flat[i] = old - eps
        fm = f()
        flat[i] = old
        gflat[i] = (fp - fm) / (2 * eps)
    return g


def check(build: Callable[..., Tensor], inputs: list[np.ndarray], eps: float = 1e-3) -> float:
    """Worst relative error over all inputs of the scalar graph ``build(*tensors)``."""
    tensors = [Tensor(a, requires_grad=True) for a in inputs]
    with Tape() as tape:
        out = build(*tensors)
    tape.backward(out)

    def f():
        return float(build(*[Tensor(t.data) for t in tensors]).data)

    worst = 0.0
    for t in tensors:
        num = numerical_gradient(f, t.data, eps)
        ana = t.grad if t.grad is not None else np.zeros_like(t.data)
        worst = max(worst, relative_error(ana, num))
    return worst


def _projected(fn, weights: np.ndarray):
    """Reduce a layer output to a scalar with fixed random weights."""

    def build(*ts):
        return ad.sum_all(ad.mul(fn(*ts), Tensor(weights)))

    return build


def _away_from_zero(rng, shape, margin=0.05):
    return rng.choice([-1.0, 1.0], size=shape) * rng.uniform(margin, 1.0, size=shape)


def _distinct(rng, shape, gap=0.02):
    n = int(np.prod(shape))
    return (rng.permutation(n) * gap - n * gap / 2).reshape(shape) + rng.uniform(0, gap / 10, size=shape)


def _case(kind: str, rng: np.random.Generator):
    n = int(rng.integers(1, 4))
    if kind == "dense":
        i, o = (int(v) for v in rng.integers(1, 7, size=2))
        x, w, b = rng.standard_normal((n, i)), rng.standard_normal((i, o)), rng.standard_normal(o)
        r = rng.standard_normal((n, o))
        return f"n={n} in={i} out={o}", _projected(ad.dense, r), [x, w, b]
    if kind == "conv2d":
        c, o = (int(v) for v in rng.integers(1, 4, size=2))
        k = int(rng.integers(1, 4))
        pad = int(rng.integers(0, k))
        h = int(rng.integers(k, k + 4))
        x, w, b = rng.standard_normal((n, c, h, h)), rng.standard_normal((o, c, k, k)), rng.standard_normal(o)
        ho = h + 2 * pad - k + 1
        r = rng.standard_normal((n, o, ho, ho))
        return f"n={n} c={c} o={o} k={k} pad={pad} h={h}", _projected(lambda a, w_, b_: ad.conv2d(a, w_, b_, pad), r), [x, w, b]
    if kind in ("max_pool2d", "avg_pool2d"):
        c, s = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        h = s * int(rng.integers(1, 4))
        x = _distinct(rng, (n, c, h, h)) if kind == "max_pool2d" else rng.standard_normal((n, c, h, h))
        fn = ad.max_pool2d if kind == "max_pool2d" else ad.avg_pool2d
        r = rng.standard_normal((n, c, h // s, h // s))
        return f"n={n} c={c} size={s} h={h}", _projected(lambda a: fn(a, s), r), [x]
    if kind in ("relu", "tanh"):
        shape = tuple(int(v) for v in rng.integers(1, 5, size=3))
        x = _away_from_zero(rng, shape) if kind == "relu" else rng.standard_normal(shape)
        return f"shape={shape}", _projected(getattr(ad, kind), rng.standard_normal(shape)), [x]
    if kind == "softmax_cross_entropy":
        m = int(rng.integers(2, 8))
        labels = rng.integers(0, m, size=n)
        x = 3 * rng.standard_normal((n, m))
        return f"n={n} m={m}", lambda t: ad.softmax_cross_entropy(t, labels), [x]
    if kind == "network":
        # conv -> tanh -> maxpool -> dense -> softmax cross-entropy
        labels = rng.integers(0, 4, size=n)
        x = rng.uniform(0, 1, size=(n, 1, 8, 8))
        w1, b1 = 0.5 * rng.standard_normal((3, 1, 3, 3)), 0.1 * rng.standard_normal(3)
        w2, b2 = 0.3 * rng.standard_normal((27, 4)), 0.1 * rng.standard_normal(4)

        def net(x_, w1_, b1_, w2_, b2_):
            h = ad.max_pool2d(ad.tanh(ad.conv2d(x_, w1_, b1_)), 2)
            return ad.softmax_cross_entropy(ad.dense(ad.flatten(h), w2_, b2_), labels)

        return f"n={n} conv3x3(3)+pool2+dense(27x4)", net, [x, w1, b1, w2, b2]
    raise KeyError(kind)


PRIMITIVES = ("dense", "conv2d", "max_pool2d", "avg_pool2d", "relu", "tanh", "softmax_cross_entropy", "network")


def audit(configs: int = 50, seed: int = 0, eps: float = 1e-3) -> list[CheckResult]:
    """Finite-difference check of ``configs`` random cases cycling through all primitives (float64)."""
    rng = np.random.default_rng(seed)
    results = []
    for i in range(configs):
        kind = PRIMITIVES[i % len(PRIMITIVES)]
        desc, build, inputs = _case(kind, rng)
        results.append(CheckResult(kind, desc, check(build, [np.asarray(a, dtype=np.float64) for a in inputs], eps)))
    return results
