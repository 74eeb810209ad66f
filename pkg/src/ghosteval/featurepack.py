"""On-disk and in-memory container for extracted features, logits, and labels.

Binary layout (little-endian, row-major)::

    magic   4 bytes  "GHPK"
    version u32      1
    n       u32      sample count
    K       u32      class count
    D       u32      embedding dimension
    embeddings  n*D float32
    logits      n*K float32
    labels      n   int32   (class index in [0, K) or -1 for unknown)

Embeddings and logits are stored as float32 (matching how networks emit
them); every computation downstream accumulates in float64.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass

import numpy as np

from ._util import atomic_write_bytes
from .errors import PackFormatError, PackValidationError

MAGIC = b"GHPK"
VERSION = 1
UNKNOWN_LABEL = -1

_HEADER = struct.Struct("<4sIIII")


@dataclass(frozen=True)
class FeaturePack:
    """Immutable set of (embedding, logit vector, label) rows.

    Arrays are coerced to the storage dtypes (float32/int32) and marked
    read-only, so a loaded pack can be shared across threads.
    """

    embeddings: np.ndarray
    logits: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        emb = np.ascontiguousarray(self.embeddings, dtype=np.float32)
        log = np.ascontiguousarray(self.logits, dtype=np.float32)
        lab = np.ascontiguousarray(self.labels, dtype=np.int32)
        object.__setattr__(self, "embeddings", emb)
        object.__setattr__(self, "logits", log)
        object.__setattr__(self, "labels", lab)
        _validate(emb, log, lab)
        for arr in (emb, log, lab):
            arr.flags.writeable = False

    @property
    def n_samples(self) -> int:
        return self.embeddings.shape[0]

    @property
    def n_classes(self) -> int:
        return self.logits.shape[1]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    @property
    def known_mask(self) -> np.ndarray:
        return self.labels >= 0

    def __eq__(self, other):
        if not isinstance(other, FeaturePack):
            return NotImplemented
        return (
            self.embeddings.shape == other.embeddings.shape
            and self.logits.shape == other.logits.shape
            and np.array_equal(self.embeddings, other.embeddings)
            and np.array_equal(self.logits, other.logits)
            and np.array_equal(self.labels, other.labels)
        )


@dataclass(frozen=True)
class PackDiagnostics:
    """Per-class sample bookkeeping for a known-labels pack."""

    class_counts: np.ndarray    # labeled samples per class
    correct_counts: np.ndarray  # correctly classified samples per class
    low_support: np.ndarray     # bool, fewer than 2 correct samples


def _validate(embeddings, logits, labels):
    if embeddings.ndim != 2 or logits.ndim != 2 or labels.ndim != 1:
        raise PackValidationError(
            "expected 2-d embeddings, 2-d logits, 1-d labels; got shapes "
            f"{embeddings.shape}, {logits.shape}, {labels.shape}"
        )
    n = embeddings.shape[0]
    if logits.shape[0] != n or labels.shape[0] != n:
        raise PackValidationError(
            f"row count mismatch: {n} embeddings, {logits.shape[0]} logit rows, "
            f"{labels.shape[0]} labels"
        )
    if logits.shape[1] < 1:
        raise PackValidationError("pack must have at least one class")
    bad = ~np.isfinite(embeddings)
    if bad.any():
        row = int(np.argwhere(bad)[0][0])
        raise PackValidationError(f"non-finite value in embeddings at row {row}")
    bad = ~np.isfinite(logits)
    if bad.any():
        row = int(np.argwhere(bad)[0][0])
        raise PackValidationError(f"non-finite value in logits at row {row}")
    k = logits.shape[1]
    out = (labels >= k) | ((labels < 0) & (labels != UNKNOWN_LABEL))
    if out.any():
        row = int(np.argmax(out))
        raise PackValidationError(
            f"label out of range at row {row}: {int(labels[row])} "
            f"(valid: -1 or 0..{k - 1})"
        )


def write_pack(pack: FeaturePack, path) -> None:
    """Serialize; read_pack(write_pack(p)) reproduces p bit-exactly."""
    header = _HEADER.pack(
        MAGIC, VERSION, pack.n_samples, pack.n_classes, pack.dim
    )
    payload = b"".join(
        (
            header,
            np.ascontiguousarray(pack.embeddings, dtype="<f4").tobytes(),
            np.ascontiguousarray(pack.logits, dtype="<f4").tobytes(),
            np.ascontiguousarray(pack.labels, dtype="<i4").tobytes(),
        )
    )
    atomic_write_bytes(path, payload)


def read_pack(path) -> FeaturePack:
    """Parse and fully validate a pack file.

    Structural problems raise PackFormatError with the byte offset;
    content problems raise PackValidationError with the row index.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise PackFormatError(
            f"truncated header: file is {len(data)} bytes, need {_HEADER.size}"
        )
    magic, version, n, k, d = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise PackFormatError(f"bad magic {magic!r} at byte offset 0")
    if version != VERSION:
        raise PackFormatError(f"unsupported version {version} at byte offset 4")
    expected = _HEADER.size + 4 * (n * d + n * k + n)
    if len(data) != expected:
        raise PackFormatError(
            f"truncated payload: expected {expected} bytes, got {len(data)} "
            f"(difference starts at byte offset {min(len(data), expected)})"
        )
    off = _HEADER.size
    emb = np.frombuffer(data, dtype="<f4", count=n * d, offset=off).reshape(n, d)
    off += 4 * n * d
    log = np.frombuffer(data, dtype="<f4", count=n * k, offset=off).reshape(n, k)
    off += 4 * n * k
    lab = np.frombuffer(data, dtype="<i4", count=n, offset=off)
    return FeaturePack(embeddings=emb, logits=log, labels=lab)


def correct_mask(pack: FeaturePack) -> np.ndarray:
    """Correct-classification indicator used for fitting and audits.

    A known row counts as correct when its label's logit attains the row
    maximum, so exact ties credit the label. Unknown rows are False.
    """
    known = pack.known_mask
    mask = np.zeros(pack.n_samples, dtype=bool)
    if known.any():
        logits = pack.logits[known].astype(np.float64)
        labels = pack.labels[known]
        label_logit = logits[np.arange(logits.shape[0]), labels]
        mask[known] = label_logit == logits.max(axis=1)
    return mask


def diagnose(pack: FeaturePack) -> PackDiagnostics:
    """Count per-class samples and correct classifications.

    Requires a known-labels pack; classes with fewer than 2 correct
    samples are flagged because they cannot support a variance estimate.
    """
    if not pack.known_mask.all():
        row = int(np.argmax(~pack.known_mask))
        raise PackValidationError(
            f"pack contains unknown label at row {row}; diagnostics need known labels"
        )
    k = pack.n_classes
    counts = np.bincount(pack.labels, minlength=k).astype(np.int64)
    correct = correct_mask(pack)
    correct_counts = np.bincount(
        pack.labels[correct], minlength=k
    ).astype(np.int64)
    return PackDiagnostics(
        class_counts=counts,
        correct_counts=correct_counts,
        low_support=correct_counts < 2,
    )


def read_csv_pack(path) -> FeaturePack:
    """Import the hand-fixture CSV format: label,e0..e{D-1},z0..z{K-1}."""
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PackFormatError("empty CSV") from None
        header = [h.strip() for h in header]
        if not header or header[0] != "label":
            raise PackFormatError("CSV header must start with 'label'")
        d = sum(1 for h in header if h.startswith("e"))
        k = sum(1 for h in header if h.startswith("z"))
        expected = ["label"] + [f"e{i}" for i in range(d)] + [f"z{i}" for i in range(k)]
        if header != expected:
            raise PackFormatError(
                f"CSV header mismatch: expected label,e0..e{d - 1},z0..z{k - 1}"
            )
        labels, emb, log = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 1 + d + k:
                raise PackFormatError(
                    f"CSV line {lineno}: expected {1 + d + k} fields, got {len(row)}"
                )
            labels.append(int(row[0]))
            emb.append([float(v) for v in row[1 : 1 + d]])
            log.append([float(v) for v in row[1 + d :]])
    n = len(labels)
    return FeaturePack(
        embeddings=np.asarray(emb, dtype=np.float32).reshape(n, d),
        logits=np.asarray(log, dtype=np.float32).reshape(n, k),
        labels=np.asarray(labels, dtype=np.int32),
    )
