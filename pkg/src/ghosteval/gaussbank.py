"""Per-class, per-dimension Gaussian model of embedding space.

Fitting uses only correctly classified training samples (their label's
logit attains the row maximum), which keeps mislabeled rows out of the
statistics. Means use a plain average; variances use the unbiased N-1
denominator and are floored so later divisions stay finite.

Bank file layout (little-endian)::

    magic   4 bytes "GHBK"
    version u32     1
    K       u32
    D       u32
    means   K*D float64
    stds    K*D float64
    counts  K   uint32
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ._util import atomic_write_bytes
from .errors import FitError, PackFormatError, PackValidationError
from .featurepack import FeaturePack, correct_mask

MAGIC = b"GHBK"
VERSION = 1
SIGMA_FLOOR = 1e-6

_HEADER = struct.Struct("<4sIII")


@dataclass(frozen=True)
class GaussianBank:
    means: np.ndarray          # (K, D) float64
    stds: np.ndarray           # (K, D) float64, every entry >= SIGMA_FLOOR
    fitted_counts: np.ndarray  # (K,) correct samples used per class

    def __post_init__(self):
        means = np.ascontiguousarray(self.means, dtype=np.float64)
        stds = np.ascontiguousarray(self.stds, dtype=np.float64)
        counts = np.ascontiguousarray(self.fitted_counts, dtype=np.int64)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stds", stds)
        object.__setattr__(self, "fitted_counts", counts)
        if means.shape != stds.shape or means.ndim != 2:
            raise PackValidationError(
                f"means/stds shape mismatch: {means.shape} vs {stds.shape}"
            )
        if counts.shape != (means.shape[0],):
            raise PackValidationError("fitted_counts length must equal class count")
        if not np.isfinite(means).all() or not np.isfinite(stds).all():
            raise PackValidationError("bank contains non-finite parameters")
        if (stds < SIGMA_FLOOR).any():
            k, d = np.argwhere(stds < SIGMA_FLOOR)[0]
            raise PackValidationError(
                f"std below floor at class {k}, dim {d}: {stds[k, d]!r}"
            )
        if (counts < 2).any():
            raise PackValidationError("every fitted class needs >= 2 samples")
        for arr in (means, stds, counts):
            arr.flags.writeable = False

    @property
    def n_classes(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]


def _ordered_sum(values: np.ndarray) -> np.ndarray:
    # Column-wise sum over value-sorted columns: the addition order is a
    # function of the multiset alone, so row permutations cannot change
    # the result even in the last ulp.
    return np.sort(values, axis=0).sum(axis=0)


def fit(train: FeaturePack) -> GaussianBank:
    """Estimate per-class mean and std from correctly classified rows.

    Two passes (mean, then squared deviations) in float64; raises FitError
    naming the first class with fewer than 2 usable samples.
    """
    if not train.known_mask.all():
        row = int(np.argmax(~train.known_mask))
        raise PackValidationError(
            f"training pack contains unknown label at row {row}"
        )
    k, d = train.n_classes, train.dim
    correct = correct_mask(train)
    means = np.empty((k, d), dtype=np.float64)
    stds = np.empty((k, d), dtype=np.float64)
    counts = np.empty(k, dtype=np.int64)
    for c in range(k):
        rows = correct & (train.labels == c)
        n_c = int(rows.sum())
        if n_c < 2:
            raise FitError(
                f"class {c} has {n_c} correctly classified sample(s); need >= 2"
            )
        x = train.embeddings[rows].astype(np.float64)
        mu = _ordered_sum(x) / n_c
        var = _ordered_sum((x - mu) ** 2) / (n_c - 1)
        means[c] = mu
        stds[c] = np.maximum(np.sqrt(var), SIGMA_FLOOR)
        counts[c] = n_c
    return GaussianBank(means=means, stds=stds, fitted_counts=counts)


def zscore(bank: GaussianBank, embedding, class_index: int) -> float:
    """Summed per-dimension deviation |phi - mu| / sigma for one class."""
    if not 0 <= class_index < bank.n_classes:
        raise IndexError(
            f"class {class_index} out of range for bank with {bank.n_classes} classes"
        )
    phi = np.asarray(embedding, dtype=np.float64).reshape(-1)
    if phi.shape[0] != bank.dim:
        raise ValueError(
            f"dimension mismatch: embedding has {phi.shape[0]}, bank has {bank.dim}"
        )
    dev = np.abs(phi - bank.means[class_index]) / bank.stds[class_index]
    return float(dev.sum())


def zscores(bank: GaussianBank, embeddings, class_indices) -> np.ndarray:
    """Vectorized zscore: one deviation sum per (row, chosen class)."""
    phi = np.asarray(embeddings, dtype=np.float64)
    idx = np.asarray(class_indices)
    if phi.ndim != 2 or phi.shape[1] != bank.dim:
        raise ValueError(
            f"dimension mismatch: embeddings {phi.shape}, bank dim {bank.dim}"
        )
    return (np.abs(phi - bank.means[idx]) / bank.stds[idx]).sum(axis=1)


def save_bank(bank: GaussianBank, path) -> None:
    payload = b"".join(
        (
            _HEADER.pack(MAGIC, VERSION, bank.n_classes, bank.dim),
            np.ascontiguousarray(bank.means, dtype="<f8").tobytes(),
            np.ascontiguousarray(bank.stds, dtype="<f8").tobytes(),
            np.ascontiguousarray(bank.fitted_counts, dtype="<u4").tobytes(),
        )
    )
    atomic_write_bytes(path, payload)


def load_bank(path) -> GaussianBank:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise PackFormatError(
            f"truncated header: file is {len(data)} bytes, need {_HEADER.size}"
        )
    magic, version, k, d = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise PackFormatError(f"bad magic {magic!r} at byte offset 0")
    if version != VERSION:
        raise PackFormatError(f"unsupported version {version} at byte offset 4")
    expected = _HEADER.size + 8 * k * d * 2 + 4 * k
    if len(data) != expected:
        raise PackFormatError(
            f"truncated payload: expected {expected} bytes, got {len(data)}"
        )
    off = _HEADER.size
    means = np.frombuffer(data, dtype="<f8", count=k * d, offset=off).reshape(k, d)
    off += 8 * k * d
    stds = np.frombuffer(data, dtype="<f8", count=k * d, offset=off).reshape(k, d)
    off += 8 * k * d
    counts = np.frombuffer(data, dtype="<u4", count=k, offset=off)
    return GaussianBank(means=means, stds=stds, fitted_counts=counts)
