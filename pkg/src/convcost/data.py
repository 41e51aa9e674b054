"""Dataset ingestion: CIFAR-10 binary batches and deterministic synthetic data.

The CIFAR-10 binary format is the public distribution's ``data_batch_*.bin``
layout: 3073-byte records, one label byte (0..9) followed by 3072 pixel bytes
(red plane, then green, then blue; each a row-major 32x32 grid). Pixels are
scaled to [0, 1] on load; no other preprocessing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RECORD_BYTES = 3073
IMAGE_SHAPE = (3, 32, 32)


class DataError(ValueError):
    pass


@dataclass
class Dataset:
    images: np.ndarray  # (N, 3, 32, 32) float32 in [0, 1]
    labels: np.ndarray  # (N,) int64 in [0, 9]

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise DataError(f"image/label count mismatch: {self.images.shape[0]} "
                            f"vs {self.labels.shape[0]}")

    def __len__(self) -> int:
        return int(self.images.shape[0])


def load_cifar10_binary(path, limit: int | None = None) -> Dataset:
    """Decode the first ``limit`` records (all, when None) of a binary batch."""
    with open(path, "rb") as fh:
        raw = fh.read()
    n_full, leftover = divmod(len(raw), RECORD_BYTES)
    if leftover:
        raise DataError(f"{path}: truncated record at byte offset "
                        f"{n_full * RECORD_BYTES} ({leftover} stray bytes)")
    n = n_full if limit is None else min(limit, n_full)
    records = np.frombuffer(raw, dtype=np.uint8,
                            count=n * RECORD_BYTES).reshape(n, RECORD_BYTES)
    labels = records[:, 0].astype(np.int64)
    bad = np.nonzero(labels > 9)[0]
    if bad.size:
        i = int(bad[0])
        raise DataError(f"{path}: record {i} has label byte {labels[i]} > 9")
    images = records[:, 1:].reshape((n,) + IMAGE_SHAPE).astype(np.float32) / 255.0
    return Dataset(images=images, labels=labels)


def encode_cifar10_binary(dataset: Dataset) -> bytes:
    """Inverse of load_cifar10_binary for [0, 1]-scaled images."""
    n = len(dataset)
    out = np.empty((n, RECORD_BYTES), dtype=np.uint8)
    out[:, 0] = dataset.labels
    pixels = np.rint(dataset.images * 255.0).clip(0, 255).astype(np.uint8)
    out[:, 1:] = pixels.reshape(n, -1)
    return out.tobytes()


# Ten well-separated RGB anchor colors for the synthetic classes.
_PALETTE = np.array([
    (0.15, 0.15, 0.15), (0.15, 0.15, 0.85), (0.15, 0.85, 0.15),
    (0.85, 0.15, 0.15), (0.15, 0.85, 0.85), (0.85, 0.15, 0.85),
    (0.85, 0.85, 0.15), (0.85, 0.85, 0.85), (0.50, 0.15, 0.50),
    (0.15, 0.50, 0.50),
], dtype=np.float32)


def synthetic_batch(seed: int, n: int, classes: int = 10) -> Dataset:
    """Class-conditional Gaussian blobs rendered as 3x32x32 images.

    Each class is an anchor color plus a class-positioned spatial bump, with
    i.i.d. Gaussian pixel noise; labels cycle round-robin so counts stay
    balanced whenever ``classes`` divides ``n``. Deterministic per seed.
    """
    if classes < 1 or classes > len(_PALETTE):
        raise DataError(f"classes must be in [1, {len(_PALETTE)}], got {classes}")
    if n < classes:
        raise DataError(f"need n >= classes, got n={n}, classes={classes}")
    rng = np.random.default_rng(seed)
    labels = (np.arange(n) % classes).astype(np.int64)
    images = _PALETTE[labels][:, :, None, None] * np.ones(
        (n, 3, 32, 32), dtype=np.float32)

    yy, xx = np.mgrid[0:32, 0:32].astype(np.float32)
    for k in range(classes):
        cy, cx = 8 + 10 * (k % 3), 8 + 10 * ((k // 3) % 3)
        bump = 0.25 * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * 5.0 ** 2))
        images[labels == k, k % 3] += bump
    images += rng.normal(0.0, 0.06, size=images.shape).astype(np.float32)
    np.clip(images, 0.0, 1.0, out=images)
    return Dataset(images=images, labels=labels)
