"""L-infinity projected gradient descent attack."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .models import Network


class AttackError(RuntimeError):
    pass


@dataclass(frozen=True)
class AttackConfig:
    epsilon: float
    alpha: float
    steps: int
    random_start: bool = False
    clip_min: float = 0.0
    clip_max: float = 1.0

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be non-negative, got {self.epsilon}")
        # epsilon == 0 is the degenerate ball used to compare against normal training
        if self.epsilon > 0 and not 0 < self.alpha <= self.epsilon:
            raise ValueError(f"need 0 < alpha <= epsilon, got alpha={self.alpha}, epsilon={self.epsilon}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if not self.clip_min < self.clip_max:
            raise ValueError(f"clip_min must be < clip_max, got [{self.clip_min}, {self.clip_max}]")

    def replace(self, **kw) -> "AttackConfig":
        from dataclasses import replace

        return replace(self, **kw)


def frozen(net: Network) -> Network:
    """A view of ``net`` whose parameters share storage but take no gradient."""
    return Network(net.spec, {k: Tensor(v.data) for k, v in net.params.items()})


def loss_and_input_grad(net: Network, x: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    xt = Tensor(x, requires_grad=True)
    with Tape() as tape:
        logits, _ = net.forward(xt, probe=False)
        loss = ad.softmax_cross_entropy(logits, labels)
    if len(tape):
        tape.backward(loss)
    grad = xt.grad if xt.grad is not None else np.zeros_like(x)
    return loss.item(), grad


def project(x_adv: np.ndarray, x: np.ndarray, cfg: AttackConfig) -> np.ndarray:
    """Clamp to ``[x - eps, x + eps]`` and then to the valid pixel range."""
    eps = np.asarray(cfg.epsilon, dtype=x.dtype)
    out = np.clip(x_adv, x - eps, x + eps)
    np.clip(out, cfg.clip_min, cfg.clip_max, out=out)
    # x + eps can round one ulp past the radius; step those entries back toward x
    over = np.abs(out - x) > eps
    while over.any():
        out[over] = np.nextafter(out[over], x[over])
        over = np.abs(out - x) > eps
    return out


def pgd_attack(
    net: Network,
    batch: np.ndarray,
    labels: np.ndarray,
    cfg: AttackConfig,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Iterate ``x <- Proj(x + alpha * sign(grad_x loss))`` for ``cfg.steps`` steps.

    Parameters of ``net`` are never touched; gradients are taken on a frozen
    view. Raises :class:`AttackError` when the input gradient is not finite.
    """
    x = np.asarray(batch)
    if x.size and (x.min() < cfg.clip_min or x.max() > cfg.clip_max):
        raise ValueError(f"batch values must lie in [{cfg.clip_min}, {cfg.clip_max}]")
    view = frozen(net)
    x_adv = x.copy()
    if cfg.random_start:
        if rng is None:
            raise ValueError("random_start requires an rng")
        x_adv = project(x_adv + rng.uniform(-cfg.epsilon, cfg.epsilon, size=x.shape).astype(x.dtype), x, cfg)
    step = np.asarray(cfg.alpha, dtype=x.dtype)
    for k in range(cfg.steps):
        _, grad = loss_and_input_grad(view, x_adv, labels)
        if not np.all(np.isfinite(grad)):
            raise AttackError(f"non-finite input gradient at PGD step {k + 1}/{cfg.steps}")
        x_adv = project(x_adv + step * np.sign(grad), x, cfg)
    return x_adv
