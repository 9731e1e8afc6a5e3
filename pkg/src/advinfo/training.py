"""Normal and PGD adversarial training loops, and evaluation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from . import autodiff as ad
from .attacks import AttackConfig, frozen, pgd_attack
from .autodiff import Tape, Tensor
from .data import Dataset
from .models import Network
from .optim import SGD, milestone_lr


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 128
    base_lr: float = 0.1
    momentum: float = 0.9
    milestones: tuple[int, ...] = (20, 60)
    gamma: float = 0.5
    mode: Literal["normal", "adversarial"] = "normal"
    # linear ramps over the first optimizer steps; 0 disables
    warmup_steps: int = 200
    attack_ramp_steps: int = 400

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if self.mode not in ("normal", "adversarial"):
            raise ValueError(f"mode must be 'normal' or 'adversarial', got {self.mode!r}")
        if self.warmup_steps < 0 or self.attack_ramp_steps < 0:
            raise ValueError("ramp lengths must be >= 0")

    def lr(self, epoch: int, step: int | None = None) -> float:
        """Milestone rate for ``epoch``, scaled by ``step / warmup_steps`` during warm-up (steps count from 1)."""
        lr = milestone_lr(epoch, self.base_lr, self.milestones, self.gamma)
        if step is not None and step < self.warmup_steps:
            lr *= step / self.warmup_steps
        return lr

    def attack_scale(self, step: int) -> float:
        """Fraction of the full attack radius used at optimizer step ``step``."""
        if step >= self.attack_ramp_steps:
            return 1.0
        return step / self.attack_ramp_steps

    def steps_per_epoch(self, n: int) -> int:
        return -(-n // self.batch_size)


@dataclass
class EpochStats:
    loss: float
    accuracy: float
    examples: int = field(default=0)


def train_epoch(
    net: Network,
    optimizer: SGD,
    dataset: Dataset,
    cfg: TrainConfig,
    epoch: int,
    rng: np.random.Generator,
    attack: AttackConfig | None = None,
    attack_rng: np.random.Generator | None = None,
) -> EpochStats:
    """One pass over ``dataset`` in shuffled mini-batches.

    In adversarial mode each batch is replaced by PGD examples crafted against
    the current parameters before the update. Optimizer steps are counted
    globally from ``epoch`` so the warm-up and attack ramps need no state. Loss and accuracy are averaged
    over the examples actually used for the updates.
    """
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    if cfg.mode == "adversarial" and attack is None:
        raise ValueError("adversarial mode requires an AttackConfig")
    order = rng.permutation(len(dataset))
    step = (epoch - 1) * cfg.steps_per_epoch(len(dataset))
    total_loss = 0.0
    correct = 0
    for start in range(0, len(order), cfg.batch_size):
        step += 1
        idx = order[start : start + cfg.batch_size]
        x, y = dataset.images[idx], dataset.labels[idx]
        if cfg.mode == "adversarial":
            f = cfg.attack_scale(step)
            atk = attack if f == 1.0 else attack.replace(epsilon=f * attack.epsilon, alpha=f * attack.alpha)
            x = pgd_attack(net, x, y, atk, attack_rng)
        optimizer.zero_grad()
        with Tape() as tape:
            logits, _ = net.forward(Tensor(x), probe=False)
            loss = ad.softmax_cross_entropy(logits, y)
        tape.backward(loss)
        optimizer.step(cfg.lr(epoch, step))
        total_loss += loss.item() * len(idx)
        correct += int((logits.data.argmax(axis=1) == y).sum())
    return EpochStats(total_loss / len(dataset), correct / len(dataset), len(dataset))


def predict_stats(net: Network, x: np.ndarray, y: np.ndarray, batch_size: int = 1000) -> tuple[float, float]:
    """(accuracy, mean cross-entropy) of ``net`` on fixed inputs."""
    view = frozen(net)
    total_loss = 0.0
    correct = 0
    for start in range(0, len(y), batch_size):
        xb, yb = x[start : start + batch_size], y[start : start + batch_size]
        logits, _ = view.forward(xb, probe=False)
        total_loss += float(ad.softmax_cross_entropy(logits, yb).data) * len(yb)
        correct += int((logits.data.argmax(axis=1) == yb).sum())
    n = max(len(y), 1)
    return correct / n, total_loss / n


def evaluate(
    net: Network,
    dataset: Dataset,
    attack: AttackConfig | None = None,
    rng: np.random.Generator | None = None,
    batch_size: int = 500,
) -> tuple[float, float]:
    """Accuracy and mean loss, on PGD examples against ``net`` when ``attack`` is given."""
    if attack is None:
        return predict_stats(net, dataset.images, dataset.labels, batch_size)
    total_loss = 0.0
    correct = 0
    for start in range(0, len(dataset), batch_size):
        x = dataset.images[start : start + batch_size]
        y = dataset.labels[start : start + batch_size]
        x_adv = pgd_attack(net, x, y, attack, rng)
        acc, loss = predict_stats(net, x_adv, y, batch_size)
        total_loss += loss * len(y)
        correct += round(acc * len(y))
    n = max(len(dataset), 1)
    return correct / n, total_loss / n
