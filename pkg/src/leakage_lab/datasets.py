"""Labelled datasets: synthetic Gaussian mixtures, MNIST IDX files, minibatching."""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, IdxCountMismatchError, IdxMagicError, IdxTruncatedError
from .gauss_core import BinaryGaussianMixture, sample_pairs

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray  # (N, d)
    labels: np.ndarray  # (N,)
    n_classes: int
    split: str = "train"

    def __post_init__(self):
        x = np.asarray(self.features, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        y = np.asarray(self.labels, dtype=np.int64)
        if x.shape[0] != y.shape[0]:
            raise DomainError("features and labels disagree on N")
        if y.size and (y.min() < 0 or y.max() >= self.n_classes):
            raise DomainError("labels must lie in [0, n_classes)")
        if self.split not in ("train", "validation"):
            raise DomainError(f"unknown split {self.split!r}")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    def __len__(self):
        return self.labels.shape[0]

    def label_frequencies(self):
        return np.bincount(self.labels, minlength=self.n_classes) / max(len(self), 1)

    def to_csv(self, path) -> None:
        """Write ``x`` (one column per feature) and ``c`` columns."""
        d = self.features.shape[1]
        head = ["x"] if d == 1 else [f"x{j}" for j in range(d)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(head + ["c"])
            for row, c in zip(self.features, self.labels):
                w.writerow([repr(float(v)) for v in row] + [int(c)])


def gen_synthetic(model: BinaryGaussianMixture, n_train=10000, n_val=5000, seed=0):
    """Draw ``n_train + n_val`` pairs and split them in that order."""
    if n_train < 0 or n_val < 0:
        raise DomainError("sample counts must be nonnegative")
    x, c = sample_pairs(model, n_train + n_val, seed)
    return (
        Dataset(x[:n_train], c[:n_train], 2, "train"),
        Dataset(x[n_train:], c[n_train:], 2, "validation"),
    )


def _read_idx(path, magic, ndim):
    blob = Path(path).read_bytes()
    if len(blob) < 4 + 4 * ndim:
        raise IdxTruncatedError(f"{path}: header is truncated")
    (found,) = struct.unpack(">l", blob[:4])
    if found != magic:
        raise IdxMagicError(f"{path}: magic {found:#010x}, expected {magic:#010x}")
    dims = struct.unpack(">" + "l" * ndim, blob[4 : 4 + 4 * ndim])
    payload = blob[4 + 4 * ndim :]
    need = int(np.prod(dims))
    if len(payload) < need:
        raise IdxTruncatedError(f"{path}: expected {need} data bytes, found {len(payload)}")
    return np.frombuffer(payload, dtype=np.uint8, count=need).reshape(dims)


def load_mnist_idx(images_path, labels_path, split="train") -> Dataset:
    """Parse an IDX image/label pair; pixels are scaled to ``[0, 1]`` and flattened."""
    images = _read_idx(images_path, IMAGE_MAGIC, 3)
    labels = _read_idx(labels_path, LABEL_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise IdxCountMismatchError(
            f"{images.shape[0]} images but {labels.shape[0]} labels"
        )
    if labels.size and labels.max() > 9:
        raise DomainError("MNIST labels must lie in 0..9")
    x = images.reshape(images.shape[0], -1).astype(float) / 255.0
    return Dataset(x, labels.astype(np.int64), 10, split)


def minibatches(n_or_dataset, batch_size: int, epoch_seed):
    """Yield index blocks of a seeded permutation; the last block may be short."""
    if batch_size < 1:
        raise DomainError("batch size must be at least 1")
    n = n_or_dataset if isinstance(n_or_dataset, (int, np.integer)) else len(n_or_dataset)
    perm = np.random.default_rng(epoch_seed).permutation(n)
    for start in range(0, n, batch_size):
        yield perm[start : start + batch_size]
