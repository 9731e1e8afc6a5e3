"""SGD with momentum and the step-decay learning-rate schedule."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .autodiff import Tensor


def milestone_lr(epoch: int, base_lr: float, milestones: Sequence[int], gamma: float) -> float:
    """``base_lr * gamma ** (number of milestones <= epoch)``."""
    if any(b <= a for a, b in zip(milestones, milestones[1:])):
        raise ValueError(f"milestones must be strictly increasing, got {list(milestones)}")
    passed = sum(1 for m in milestones if m <= epoch)
    return base_lr * gamma**passed


def sgd_momentum_step(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    velocities: Sequence[np.ndarray],
    lr: float,
    momentum: float,
) -> None:
    """In-place update ``v <- momentum * v + g; p <- p - lr * v``."""
    if lr < 0:
        raise ValueError(f"learning rate must be non-negative, got {lr}")
    if not 0 <= momentum < 1:
        raise ValueError(f"momentum must lie in [0, 1), got {momentum}")
    for p, g, v in zip(params, grads, velocities, strict=True):
        if p.shape != g.shape or p.shape != v.shape:
            raise ValueError(f"shape mismatch: param {p.shape}, grad {g.shape}, velocity {v.shape}")
        v *= momentum
        v += g
        p -= lr * v


class SGD:
    """Stateful wrapper holding one zero-initialised velocity buffer per parameter."""

    def __init__(self, params: Sequence[Tensor], momentum: float = 0.9):
        self.params = list(params)
        self.momentum = momentum
        self.velocities = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self, lr: float) -> None:
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in self.params]
        sgd_momentum_step([p.data for p in self.params], grads, self.velocities, lr, self.momentum)
