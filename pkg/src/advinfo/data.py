"""Datasets: MNIST IDX files and synthetic Gaussian blobs."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IMAGES_MAGIC = 2051
LABELS_MAGIC = 2049


class IdxFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    images: np.ndarray  # (N, C, H, W), values in [0, 1]
    labels: np.ndarray  # (N,), int64
    num_classes: int

    def __post_init__(self):
        if self.images.ndim != 4:
            raise ValueError(f"images must be (N, C, H, W), got {self.images.shape}")
        if len(self.images) != len(self.labels):
            raise ValueError(f"{len(self.images)} images but {len(self.labels)} labels")
        if self.images.size and (self.images.min() < 0 or self.images.max() > 1):
            raise ValueError("pixel values must lie in [0, 1]")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError(f"labels must lie in [0, {self.num_classes})")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def sample_shape(self) -> tuple[int, int, int]:
        return tuple(self.images.shape[1:])

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices)
        return Dataset(self.images[idx], self.labels[idx], self.num_classes)

    def astype(self, dtype) -> "Dataset":
        return Dataset(self.images.astype(dtype, copy=False), self.labels, self.num_classes)


def _read_bytes(path: Path) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def _parse_idx(raw: bytes, magic: int, ndim: int, path) -> tuple[tuple[int, ...], np.ndarray]:
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise IdxFormatError(f"{path}: truncated header at byte offset {len(raw)} (need {header} bytes)")
    (found,) = struct.unpack(">i", raw[:4])
    if found != magic:
        raise IdxFormatError(f"{path}: bad magic {found} at byte offset 0, expected {magic}")
    dims = struct.unpack(f">{ndim}i", raw[4:header])
    need = header + int(np.prod(dims))
    if len(raw) < need:
        raise IdxFormatError(f"{path}: truncated payload at byte offset {len(raw)}, expected {need} bytes")
    if len(raw) > need:
        raise IdxFormatError(f"{path}: {len(raw) - need} trailing bytes after offset {need}")
    return dims, np.frombuffer(raw, dtype=np.uint8, offset=header)


def load_idx(images_path, labels_path, num_classes: int = 10, dtype=np.float32) -> Dataset:
    """Load an IDX image/label pair (optionally gzip-compressed); pixels scaled by 1/255."""
    dims, pix = _parse_idx(_read_bytes(images_path), IMAGES_MAGIC, 3, images_path)
    (n_labels,), lab = _parse_idx(_read_bytes(labels_path), LABELS_MAGIC, 1, labels_path)
    if dims[0] != n_labels:
        raise IdxFormatError(f"count mismatch: {dims[0]} images in {images_path} but {n_labels} labels in {labels_path} (byte offset 4)")
    n, h, w = dims
    images = (pix.reshape(n, 1, h, w).astype(np.float64) / 255.0).astype(dtype)
    return Dataset(images, lab.astype(np.int64), num_classes)


def write_idx(dataset: Dataset, images_path, labels_path) -> None:
    """Write a single-channel dataset back to IDX (pixels rounded to bytes)."""
    n, c, h, w = dataset.images.shape
    if c != 1:
        raise ValueError("IDX image files hold single-channel images")
    pix = np.rint(dataset.images.astype(np.float64) * 255.0).astype(np.uint8)
    Path(images_path).write_bytes(struct.pack(">4i", IMAGES_MAGIC, n, h, w) + pix.tobytes())
    Path(labels_path).write_bytes(struct.pack(">2i", LABELS_MAGIC, n) + dataset.labels.astype(np.uint8).tobytes())


MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def _find(directory: Path, stem: str) -> Path:
    for suffix in ("", ".gz"):
        p = directory / f"{stem}{suffix}"
        if p.exists():
            return p
    raise FileNotFoundError(f"{stem}[.gz] not found in {directory}")


def load_mnist(directory, split: str = "train", dtype=np.float32) -> Dataset:
    directory = Path(directory)
    img, lab = MNIST_FILES[split]
    return load_idx(_find(directory, img), _find(directory, lab), 10, dtype)


def synth_blobs(
    n_per_class: int, classes: int, dim: int, separation: float, seed: int, dtype=np.float64, test_per_class: int = 0
) -> Dataset | tuple[Dataset, Dataset]:
    """Unit-variance Gaussian blobs with class centres ``separation`` apart.

    Centres are the vertices of a scaled regular simplex when ``dim >= classes``
    (otherwise random directions rescaled to the requested minimum spacing).
    Samples are then mapped affinely into [0, 1] so that they satisfy the
    pixel-range contract; images have shape (N, dim, 1, 1).

    With ``test_per_class > 0`` a ``(train, test)`` pair drawn from the same
    mixture (and the same affine map) is returned instead.
    """
    if n_per_class < 1 or classes < 1 or dim < 1 or separation < 0:
        raise ValueError("counts and dim must be positive, separation non-negative")
    rng = np.random.default_rng(seed)
    if dim >= classes:
        q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        centres = q[:classes] * (separation / np.sqrt(2.0))
    else:
        centres = rng.standard_normal((classes, dim))
        if classes > 1:
            d = np.sqrt(((centres[:, None] - centres[None]) ** 2).sum(-1))
            centres *= separation / d[~np.eye(classes, dtype=bool)].min()
        else:
            centres *= 0
    parts = []
    for n in (n_per_class, test_per_class):
        x = np.concatenate([c + rng.standard_normal((n, dim)) for c in centres])
        y = np.repeat(np.arange(classes), n)
        order = rng.permutation(len(y))
        parts.append((x[order], y[order]))
    all_x = np.concatenate([x for x, _ in parts])
    lo, hi = all_x.min(), all_x.max()
    out = []
    for x, y in parts:
        x = (x - lo) / (hi - lo) if hi > lo else np.zeros_like(x)
        out.append(Dataset(x.reshape(len(y), dim, 1, 1).astype(dtype), y.astype(np.int64), max(classes, 2)))
    return (out[0], out[1]) if test_per_class else out[0]
