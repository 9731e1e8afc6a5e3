"""Texture (saturation) and shape (patch shuffling) distortions of images in [0, 1]."""

from __future__ import annotations

import numpy as np

SATURATION_LEVELS = (2, 8, 16, 64, 1024)
PATCH_GRIDS = (0, 2, 4, 8)


def saturate(image: np.ndarray, p: float) -> np.ndarray:
    """``sign(2v - 1) * |2v - 1| ** (2 / p) * 0.5 + 0.5`` pixelwise; ``p = 2`` is the identity."""
    if p < 2:
        raise ValueError(f"saturation level must be >= 2, got {p}")
    v = np.asarray(image)
    if v.size and (v.min() < 0 or v.max() > 1):
        raise ValueError("pixels must lie in [0, 1]; normalise first")
    if p == 2:
        # exponent 1: return the input untouched so the result is bit-exact
        return v.copy()
    u = 2.0 * v - 1.0
    out = np.sign(u) * np.abs(u) ** (2.0 / p) * 0.5 + 0.5
    return np.clip(out, 0.0, 1.0).astype(v.dtype, copy=False)


def _check_grid(h: int, w: int, k: int) -> None:
    if k < 0 or k == 1:
        raise ValueError(f"patch grid must be 0 or >= 2, got {k}")
    if k and (h % k or w % k):
        raise ValueError(f"a {k}x{k} patch grid needs H and W divisible by {k}, got {h}x{w}")


def grid_fits(shape: tuple[int, ...], k: int) -> bool:
    h, w = shape[-2:]
    return k == 0 or (k >= 2 and h % k == 0 and w % k == 0)


def shuffle_patches(image: np.ndarray, k: int, perm) -> np.ndarray:
    """Rearrange the k*k patches of ``image`` (..., H, W): output slot ``i`` gets input patch ``perm[i]``.

    Patches are numbered row-major; all leading axes (channels, batch) move together.
    """
    image = np.asarray(image)
    h, w = image.shape[-2:]
    _check_grid(h, w, k)
    if k == 0:
        return image.copy()
    perm = np.asarray(perm)
    if sorted(perm.tolist()) != list(range(k * k)):
        raise ValueError(f"perm must be a permutation of 0..{k * k - 1}")
    lead = image.shape[:-2]
    ph, pw = h // k, w // k
    patches = image.reshape(*lead, k, ph, k, pw)
    patches = np.moveaxis(patches, (-4, -2), (-4, -3)).reshape(*lead, k * k, ph, pw)
    out = patches[..., perm, :, :].reshape(*lead, k, k, ph, pw)
    return np.moveaxis(out, -3, -2).reshape(*lead, h, w)


def inverse_permutation(perm) -> np.ndarray:
    perm = np.asarray(perm)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm))
    return inv


def patch_shuffle(image: np.ndarray, k: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray | None]:
    """Shuffle one image's k*k patches with a permutation drawn from ``rng``.

    Returns the shuffled image and the permutation used (``None`` for ``k = 0``).
    """
    h, w = np.shape(image)[-2:]
    _check_grid(h, w, k)
    if k == 0:
        return np.array(image, copy=True), None
    perm = rng.permutation(k * k)
    return shuffle_patches(image, k, perm), perm


def patch_shuffle_batch(images: np.ndarray, k: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray | None]:
    """Independent permutation per image of an (N, C, H, W) batch; returns (images, perms (N, k*k))."""
    _check_grid(*images.shape[-2:], k)
    if k == 0:
        return images.copy(), None
    perms = np.stack([rng.permutation(k * k) for _ in range(len(images))])
    out = np.empty_like(images)
    for i, perm in enumerate(perms):
        out[i] = shuffle_patches(images[i], k, perm)
    return out, perms
