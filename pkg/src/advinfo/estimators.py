"""Non-parametric mutual information estimators for layer activations.

Two families are provided:

* pairwise-distance kernel bounds on the entropy of a Gaussian mixture
  centred on the activations (noise of variance ``sigma2`` is treated as a
  kernel parameter only; it is never added to the activations). ``gamma=1``
  gives the upper bound, ``gamma=4`` the lower bound. Results are in nats.
* the binning estimator: coordinates are floored to ``lambda``-wide bins and
  each binned vector is one discrete symbol. Results are in bits.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Hashable, Iterable, Literal

import numpy as np

LN2 = math.log(2.0)
GAMMA = {"upper": 1.0, "lower": 4.0}

# above this many difference terms, use the Gram identity instead of explicit differences
_DIRECT_LIMIT = 8_000_000
_ROW_BLOCK = 1024


@dataclass(frozen=True)
class KdeConfig:
    sigma2: float
    bound: Literal["lower", "upper"] = "lower"

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        if self.bound not in GAMMA:
            raise ValueError(f"bound must be 'lower' or 'upper', got {self.bound!r}")

    @property
    def gamma(self) -> float:
        return GAMMA[self.bound]


@dataclass(frozen=True)
class BinConfig:
    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"bin size must be positive, got {self.lam}")


@dataclass(frozen=True)
class MIRecord:
    epoch: int
    layer: str
    kind: str  # "clean" | "adversarial"
    estimator: str  # "kde_lower" | "kde_upper" | "binning"
    i_tx: float
    i_ty: float
    units: Literal["nats", "bits"]

    def in_bits(self) -> "MIRecord":
        if self.units == "bits":
            return self
        return MIRecord(self.epoch, self.layer, self.kind, self.estimator, self.i_tx / LN2, self.i_ty / LN2, "bits")


def _as_matrix(acts) -> np.ndarray:
    if isinstance(acts, np.ndarray):
        x = acts
    else:
        rows = list(acts)
        if len({len(r) for r in rows}) > 1:
            raise ValueError("activation vectors have differing lengths")
        x = np.asarray(rows)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        x = x.reshape(len(x), -1)
    if len(x) < 1:
        raise ValueError("need at least one activation vector")
    return x


def pairwise_sq_dists(acts) -> np.ndarray:
    """Symmetric (N, N) matrix of squared Euclidean distances, zero diagonal.

    Small problems use explicit coordinate differences; large ones use
    ``|a|^2 + |b|^2 - 2 a.b`` computed in fixed row blocks, clamped at zero.
    """
    x = _as_matrix(acts)
    n, d = x.shape
    out = np.empty((n, n))
    if n * n * d <= _DIRECT_LIMIT:
        for s in range(0, n, _ROW_BLOCK):
            diff = x[s : s + _ROW_BLOCK, None, :] - x[None, :, :]
            out[s : s + _ROW_BLOCK] = np.einsum("ijk,ijk->ij", diff, diff)
    else:
        sq = np.einsum("ij,ij->i", x, x)
        for s in range(0, n, _ROW_BLOCK):
            blk = x[s : s + _ROW_BLOCK]
            out[s : s + _ROW_BLOCK] = sq[s : s + _ROW_BLOCK, None] + sq[None, :] - 2.0 * (blk @ x.T)
        np.maximum(out, 0.0, out=out)
    # symmetrise from the upper triangle, block by block
    for s in range(0, n, _ROW_BLOCK):
        out[s : s + _ROW_BLOCK, :s] = out[:s, s : s + _ROW_BLOCK].T
        blk = out[s : s + _ROW_BLOCK, s : s + _ROW_BLOCK]
        blk[...] = np.triu(blk) + np.triu(blk, 1).T
    np.fill_diagonal(out, 0.0)
    return out


def _mean_log_kernel_mass(dists: np.ndarray, scale: float) -> float:
    """``(1/N) sum_j log sum_k exp(-D_jk / scale)``.

    Each row holds its own zero self-distance, so the largest exponent is 0 and
    every row sum lies in [1, N]: no max-shift is needed.
    """
    n = len(dists)
    if np.any(np.diagonal(dists) != 0):
        raise ValueError("distance matrix must have a zero diagonal")
    acc = 0.0
    for s in range(0, n, _ROW_BLOCK):
        k = np.exp(dists[s : s + _ROW_BLOCK] * (-1.0 / scale))
        acc += float(np.log(k.sum(axis=1)).sum())
    return acc / n


def _kde_entropy_term(dists: np.ndarray, sigma2: float, gamma: float) -> float:
    n = len(dists)
    return math.log(n) - _mean_log_kernel_mass(dists, 2.0 * gamma * sigma2)


def kde_mi_input(acts, cfg: KdeConfig, dists: np.ndarray | None = None) -> float:
    """Kernel bound on I(T;X) in nats.

    ``-log(1/N) - (1/N) sum_j log sum_k exp(-|t_j - t_k|^2 / (2 gamma sigma2))``
    """
    if dists is None:
        dists = pairwise_sq_dists(acts)
    if len(dists) < 2:
        raise ValueError("the kernel estimator needs at least 2 samples")
    return _kde_entropy_term(dists, cfg.sigma2, cfg.gamma)


def kde_mi_label(acts, labels, cfg: KdeConfig, dists: np.ndarray | None = None) -> float:
    """Kernel bound on I(T;Y) in nats: marginal term minus class-weighted conditional terms."""
    labels = np.asarray(labels)
    if dists is None:
        dists = pairwise_sq_dists(acts)
    n = len(dists)
    if n < 2:
        raise ValueError("the kernel estimator needs at least 2 samples")
    if labels.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {labels.shape}")
    h = _kde_entropy_term(dists, cfg.sigma2, cfg.gamma)
    h_cond = 0.0
    for m in np.unique(labels):
        idx = np.flatnonzero(labels == m)
        if len(idx) > 1:
            h_cond += len(idx) / n * _kde_entropy_term(dists[np.ix_(idx, idx)], cfg.sigma2, cfg.gamma)
    return h - h_cond


def gaussian_entropy(dim: int, sigma2: float) -> float:
    """Differential entropy of N(0, sigma2 I_dim) in nats."""
    if dim < 1 or not sigma2 > 0:
        raise ValueError("need dim >= 1 and sigma2 > 0")
    return 0.5 * dim * math.log(2.0 * math.pi * math.e * sigma2)


def discretize(value, lam: float):
    """Bin index ``floor(value / lam)``; works elementwise on arrays."""
    if not lam > 0:
        raise ValueError(f"bin size must be positive, got {lam}")
    if np.ndim(value) == 0:
        return math.floor(value / lam)
    return np.floor(np.asarray(value, dtype=np.float64) / lam).astype(np.int64)


def _entropy_from_counts(counts: np.ndarray) -> float:
    # sorted so the float sum does not depend on symbol order
    counts = np.sort(np.asarray(counts, dtype=np.float64))
    p = counts / counts.sum()
    return float(-(p * np.log2(p)).sum())


def discrete_entropy(items: Iterable[Hashable] | np.ndarray) -> float:
    """Plug-in entropy (bits) of the empirical distribution of ``items``.

    A 2-D array is treated as a list of row symbols.
    """
    if isinstance(items, np.ndarray) and items.ndim == 2:
        if len(items) == 0:
            raise ValueError("entropy of an empty list is undefined")
        _, counts = np.unique(items, axis=0, return_counts=True)
        return _entropy_from_counts(counts)
    counts = np.fromiter(Counter(items).values(), dtype=np.float64)
    if counts.size == 0:
        raise ValueError("entropy of an empty list is undefined")
    return _entropy_from_counts(counts)


def bin_symbols(acts, lam: float) -> np.ndarray:
    """Coordinatewise bin indices, one row per sample."""
    return discretize(_as_matrix(acts), lam)


def binning_mi(acts, labels, cfg: BinConfig) -> tuple[float, float]:
    """Binned estimates ``(I(T;X), I(T;Y))`` in bits.

    ``I(T;X)`` is the entropy of the binned symbols (the binned layer is a
    deterministic function of the input); ``I(T;Y)`` subtracts the
    class-weighted conditional entropies.
    """
    symbols = bin_symbols(acts, cfg.lam)
    labels = np.asarray(labels)
    n = len(symbols)
    if labels.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {labels.shape}")
    h_t = discrete_entropy(symbols)
    h_t_given_y = 0.0
    for m in np.unique(labels):
        members = symbols[labels == m]
        h_t_given_y += len(members) / n * discrete_entropy(members)
    return h_t, h_t - h_t_given_y


def default_sigma2(acts, factor: float = 0.1) -> float:
    """``factor`` times the mean per-coordinate variance of the batch (1.0 if degenerate)."""
    v = float(_as_matrix(acts).var(axis=0).mean())
    return factor * v if v > 0 else 1.0


def default_bin_size(acts, bins: int = 30) -> float:
    """Batch value range split into ``bins`` equal intervals (1.0 if constant)."""
    x = _as_matrix(acts)
    span = float(x.max() - x.min())
    return span / bins if span > 0 else 1.0


def estimate_layer(
    acts,
    labels,
    kde_sigma2: float | None = None,
    bin_size: float | None = None,
    *,
    epoch: int = 0,
    layer: str = "",
    kind: str = "clean",
    estimators: tuple[str, ...] = ("kde_lower", "kde_upper", "binning"),
) -> list[MIRecord]:
    """Run the requested estimators on raw activations from one probed layer.

    ``None`` for ``kde_sigma2`` / ``bin_size`` selects the batch-relative defaults.
    """
    x = _as_matrix(acts)
    labels = np.asarray(labels)
    records = []
    kde_names = [e for e in estimators if e.startswith("kde_")]
    if kde_names:
        sigma2 = default_sigma2(x) if kde_sigma2 is None else kde_sigma2
        dists = pairwise_sq_dists(x)
        for name in kde_names:
            cfg = KdeConfig(sigma2, name.removeprefix("kde_"))
            records.append(
                MIRecord(epoch, layer, kind, name, kde_mi_input(x, cfg, dists), kde_mi_label(x, labels, cfg, dists), "nats")
            )
    if "binning" in estimators:
        lam = default_bin_size(x) if bin_size is None else bin_size
        i_tx, i_ty = binning_mi(x, labels, BinConfig(lam))
        records.append(MIRecord(epoch, layer, kind, "binning", i_tx, i_ty, "bits"))
    return records
