"""Per-sample open-set scores: GHOST plus the standard baselines.

Every scorer returns "higher = more likely known". The predicted class is
always the lowest-index argmax of the logits, independent of the score.
All arithmetic runs in float64 even though packs store float32.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ._util import atomic_write_text
from .errors import DegenerateStatisticsError, PackFormatError, PackValidationError
from .featurepack import FeaturePack
from .gaussbank import GaussianBank, zscores

S_FLOOR = 1e-12

METHODS = ("ghost", "msp", "maxlogit", "energy", "nnguide")

NNGUIDE_FRACTION = 0.01
NNGUIDE_K = 10


@dataclass(frozen=True)
class ScoredSet:
    """One (predicted class, score) pair per pack row, in pack order."""

    method: str
    predicted: np.ndarray
    scores: np.ndarray
    pack_id: str = ""

    def __post_init__(self):
        pred = np.ascontiguousarray(self.predicted, dtype=np.int64)
        sc = np.ascontiguousarray(self.scores, dtype=np.float64)
        object.__setattr__(self, "predicted", pred)
        object.__setattr__(self, "scores", sc)
        if pred.shape != sc.shape or pred.ndim != 1:
            raise PackValidationError(
                f"predicted/scores shape mismatch: {pred.shape} vs {sc.shape}"
            )
        if not np.isfinite(sc).all():
            row = int(np.argmax(~np.isfinite(sc)))
            raise PackValidationError(f"non-finite score at row {row}")
        pred.flags.writeable = False
        sc.flags.writeable = False

    def __len__(self):
        return self.scores.shape[0]


@dataclass(frozen=True)
class ReferenceBank:
    """Unit-norm training embeddings and their base scores, for NNGuide."""

    embeddings: np.ndarray   # (m, D) float64, rows unit-norm
    base_scores: np.ndarray  # (m,) float64
    k_nn: int
    fraction: float

    def __post_init__(self):
        emb = np.ascontiguousarray(self.embeddings, dtype=np.float64)
        base = np.ascontiguousarray(self.base_scores, dtype=np.float64)
        object.__setattr__(self, "embeddings", emb)
        object.__setattr__(self, "base_scores", base)
        norms = np.linalg.norm(emb, axis=1)
        if emb.shape[0] and np.abs(norms - 1.0).max() > 1e-6:
            raise PackValidationError("reference rows must be unit-norm within 1e-6")

    def __len__(self):
        return self.embeddings.shape[0]


def _as_logits(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64).reshape(-1)
    if z.shape[0] < 1:
        raise ValueError("logit vector must have at least one entry")
    return z


def ghost_score(bank: GaussianBank, embedding, logits) -> tuple[int, float]:
    """Predicted-class logit divided by the summed z-score deviation.

    The deviation floor keeps an exact-mean query finite; a larger
    deviation always lowers the score when the top logit is positive.
    """
    z = _as_logits(logits)
    if z.shape[0] != bank.n_classes:
        raise ValueError(
            f"dimension mismatch: {z.shape[0]} logits, bank has {bank.n_classes} classes"
        )
    k_hat = int(np.argmax(z))
    phi = np.asarray(embedding, dtype=np.float64).reshape(1, -1)
    if phi.shape[1] != bank.dim:
        raise ValueError(
            f"dimension mismatch: embedding has {phi.shape[1]}, bank has {bank.dim}"
        )
    s = float(zscores(bank, phi, [k_hat])[0])
    return k_hat, float(z[k_hat] / max(s, S_FLOOR))


def msp_score(logits) -> tuple[int, float]:
    """Maximum softmax probability, computed with max subtraction."""
    z = _as_logits(logits)
    k_hat = int(np.argmax(z))
    e = np.exp(z - z[k_hat])
    return k_hat, float(1.0 / e.sum())


def maxlogit_score(logits) -> tuple[int, float]:
    z = _as_logits(logits)
    k_hat = int(np.argmax(z))
    return k_hat, float(z[k_hat])


def energy_score(logits) -> float:
    """log-sum-exp of the logits (negative free energy at temperature 1)."""
    z = _as_logits(logits)
    m = z.max()
    return float(m + np.log(np.exp(z - m).sum()))


def build_reference(
    train: FeaturePack,
    fraction: float = NNGUIDE_FRACTION,
    k_nn: int = NNGUIDE_K,
    *,
    seed: int,
) -> ReferenceBank:
    """Subsample the training pack into an NNGuide reference bank.

    The subsample is drawn without replacement from a generator seeded by
    `seed`, so a fixed seed reproduces the bank exactly.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    if k_nn < 1:
        raise ValueError(f"k_nn must be >= 1, got {k_nn}")
    n = train.n_samples
    m = int(round(fraction * n))
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(n, size=m, replace=False))
    emb = train.embeddings[idx].astype(np.float64)
    norms = np.linalg.norm(emb, axis=1)
    if (norms == 0).any():
        row = int(idx[np.argmax(norms == 0)])
        raise DegenerateStatisticsError(f"zero-norm embedding at pack row {row}")
    emb /= norms[:, None]
    base = _energy_rows(train.logits[idx].astype(np.float64))
    return ReferenceBank(embeddings=emb, base_scores=base, k_nn=k_nn, fraction=fraction)


def _energy_rows(logits: np.ndarray) -> np.ndarray:
    if logits.shape[0] == 0:
        return np.zeros(0, dtype=np.float64)
    m = logits.max(axis=1, keepdims=True)
    return (m[:, 0] + np.log(np.exp(logits - m).sum(axis=1)))


def _nnguide_rows(ref: ReferenceBank, embeddings: np.ndarray, logits: np.ndarray):
    if len(ref) < ref.k_nn:
        raise ValueError(
            f"reference bank has {len(ref)} rows, fewer than k_nn={ref.k_nn}"
        )
    phi = np.asarray(embeddings, dtype=np.float64)
    norms = np.linalg.norm(phi, axis=1)
    unit = np.divide(phi, norms[:, None], out=np.zeros_like(phi), where=norms[:, None] > 0)
    weighted = (unit @ ref.embeddings.T) * ref.base_scores[None, :]
    if ref.k_nn == len(ref):
        guide = weighted.mean(axis=1)
    else:
        top = np.partition(weighted, len(ref) - ref.k_nn, axis=1)[:, len(ref) - ref.k_nn:]
        guide = top.mean(axis=1)
    return _energy_rows(np.asarray(logits, dtype=np.float64)) * guide


def nnguide_score(ref: ReferenceBank, embedding, logits) -> float:
    """Energy score scaled by the mean of the k_nn largest cosine*base values."""
    z = _as_logits(logits)
    phi = np.asarray(embedding, dtype=np.float64).reshape(1, -1)
    if len(ref) and phi.shape[1] != ref.embeddings.shape[1]:
        raise ValueError(
            f"dimension mismatch: embedding has {phi.shape[1]}, "
            f"reference has {ref.embeddings.shape[1]}"
        )
    return float(_nnguide_rows(ref, phi, z.reshape(1, -1))[0])


def score_pack(
    method: str,
    pack: FeaturePack,
    bank: GaussianBank | None = None,
    ref: ReferenceBank | None = None,
    pack_id: str = "",
) -> ScoredSet:
    """Vectorized scoring; elementwise equal to the per-sample ops."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    logits = pack.logits.astype(np.float64)
    predicted = np.argmax(logits, axis=1) if pack.n_samples else np.zeros(0, dtype=np.int64)
    if method == "ghost":
        if bank is None:
            raise ValueError("ghost scoring needs a GaussianBank")
        if bank.dim != pack.dim or bank.n_classes != pack.n_classes:
            raise ValueError(
                f"bank ({bank.n_classes}x{bank.dim}) does not match "
                f"pack ({pack.n_classes}x{pack.dim})"
            )
        s = zscores(bank, pack.embeddings.astype(np.float64), predicted)
        top = logits[np.arange(pack.n_samples), predicted]
        scores = top / np.maximum(s, S_FLOOR)
    elif method == "msp":
        shifted = logits - logits.max(axis=1, keepdims=True)
        scores = 1.0 / np.exp(shifted).sum(axis=1)
    elif method == "maxlogit":
        scores = logits.max(axis=1) if pack.n_samples else np.zeros(0)
    elif method == "energy":
        scores = _energy_rows(logits)
    else:  # nnguide
        if ref is None:
            raise ValueError("nnguide scoring needs a ReferenceBank")
        scores = _nnguide_rows(ref, pack.embeddings.astype(np.float64), logits)
    return ScoredSet(method=method, predicted=predicted, scores=scores, pack_id=pack_id)


def write_scores_csv(scored: ScoredSet, path) -> None:
    """Export as row,predicted,score with 17 significant digits."""
    lines = ["row,predicted,score"]
    for i in range(len(scored)):
        lines.append(f"{i},{int(scored.predicted[i])},{scored.scores[i]:.17g}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_scores_csv(path, method: str = "", pack_id: str = "") -> ScoredSet:
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["row", "predicted", "score"]:
            raise PackFormatError("score CSV must have header row,predicted,score")
        predicted, scores = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise PackFormatError(f"score CSV line {lineno}: expected 3 fields")
            if int(row[0]) != len(predicted):
                raise PackFormatError(f"score CSV line {lineno}: rows out of order")
            predicted.append(int(row[1]))
            scores.append(float(row[2]))
    return ScoredSet(
        method=method,
        predicted=np.asarray(predicted, dtype=np.int64),
        scores=np.asarray(scores, dtype=np.float64),
        pack_id=pack_id,
    )
