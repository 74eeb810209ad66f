"""Seeded synthetic feature packs for desk-scale evaluation.

Known classes are per-class diagonal Gaussians in embedding space. The
synthetic "network" turns any embedding into logits by measuring its mean
absolute distance to each class mean against one global reference scale:

    z_j = bias - mean_d |x_d - mu_{j,d}| / s_ref + noise

The reference scale is deliberately global, not per class, so classes
generated with inflated sigmas really do receive lower and noisier
logits; that is the per-class difficulty differential the fairness
metrics are meant to expose.

Unknown modes:

* shifted-mean: every unknown draws from a parent class whose mean is
  displaced by `unknown_shift` sigmas in each dimension (random signs).
* heavy-tail: Student-t (2 dof) noise around the grand center.
* uniform: uniform over a box padded around the class means.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .featurepack import FeaturePack
from .gaussbank import SIGMA_FLOOR

UNKNOWN_MODES = ("shifted-mean", "heavy-tail", "uniform")


@dataclass(frozen=True)
class SynthSpec:
    n_classes: int
    dim: int
    train_per_class: int
    test_per_class: int
    n_unknown: int
    seed: int
    mean_spread: float = 3.0
    sigma_range: tuple[float, float] = (0.5, 1.5)
    unknown_mode: str = "shifted-mean"
    unknown_shift: float = 2.0
    noisy_classes: int = 0
    noisy_sigma_scale: float = 3.0
    logit_bias: float = 4.0
    logit_noise: float = 0.3

    def __post_init__(self):
        lo, hi = self.sigma_range
        if not (SIGMA_FLOOR < lo <= hi):
            raise ValueError(
                f"sigma range must satisfy {SIGMA_FLOOR} < lo <= hi, got ({lo}, {hi})"
            )
        if self.unknown_mode not in UNKNOWN_MODES:
            raise ValueError(
                f"unknown mode {self.unknown_mode!r}; expected one of {UNKNOWN_MODES}"
            )
        if min(self.n_classes, self.dim, self.train_per_class) < 1:
            raise ValueError("n_classes, dim, train_per_class must be positive")
        if self.test_per_class < 0 or self.n_unknown < 0:
            raise ValueError("test_per_class and n_unknown cannot be negative")
        if not 0 <= self.noisy_classes <= self.n_classes:
            raise ValueError("noisy_classes must lie in [0, n_classes]")
        if self.noisy_sigma_scale <= 0 or self.logit_noise < 0:
            raise ValueError("noisy_sigma_scale must be > 0 and logit_noise >= 0")


def _logits(rng, embeddings, means, bias, noise, s_ref):
    n = embeddings.shape[0]
    k, d = means.shape
    dist = np.empty((n, k), dtype=np.float64)
    for j in range(k):  # class-wise to keep the (n, K, D) tensor off the heap
        dist[:, j] = np.abs(embeddings - means[j]).mean(axis=1)
    return bias - dist / s_ref + rng.normal(0.0, noise, size=(n, k))


def _known_split(rng, spec, means, sigmas, per_class):
    k = spec.n_classes
    labels = np.repeat(np.arange(k, dtype=np.int32), per_class)
    eps = rng.normal(0.0, 1.0, size=(labels.size, spec.dim))
    emb = means[labels] + sigmas[labels] * eps
    return emb, labels


def _unknown_embeddings(rng, spec, means, sigmas):
    n, d = spec.n_unknown, spec.dim
    if spec.unknown_mode == "shifted-mean":
        parents = np.arange(n) % spec.n_classes
        signs = rng.choice(np.array([-1.0, 1.0]), size=(n, d))
        shifted = means[parents] + spec.unknown_shift * sigmas[parents] * signs
        return shifted + sigmas[parents] * rng.normal(0.0, 1.0, size=(n, d))
    if spec.unknown_mode == "heavy-tail":
        return spec.mean_spread * rng.standard_t(2, size=(n, d))
    lo = means.min(axis=0) - 3.0 * sigmas.max()
    hi = means.max(axis=0) + 3.0 * sigmas.max()
    return rng.uniform(lo, hi, size=(n, d))


def generate(spec: SynthSpec) -> tuple[FeaturePack, FeaturePack, FeaturePack]:
    """Return (train, test_known, test_unknown) packs, fully seeded."""
    rng = np.random.default_rng(spec.seed)
    k, d = spec.n_classes, spec.dim
    means = rng.normal(0.0, spec.mean_spread, size=(k, d))
    sigmas = rng.uniform(spec.sigma_range[0], spec.sigma_range[1], size=(k, d))
    if spec.noisy_classes:
        sigmas[: spec.noisy_classes] *= spec.noisy_sigma_scale
    s_ref = 0.5 * (spec.sigma_range[0] + spec.sigma_range[1])

    def pack_for(embeddings, labels):
        logits = _logits(
            rng, embeddings, means, spec.logit_bias, spec.logit_noise, s_ref
        )
        return FeaturePack(embeddings=embeddings, logits=logits, labels=labels)

    train_emb, train_labels = _known_split(rng, spec, means, sigmas, spec.train_per_class)
    train = pack_for(train_emb, train_labels)
    test_emb, test_labels = _known_split(rng, spec, means, sigmas, spec.test_per_class)
    test_known = pack_for(test_emb, test_labels)
    unk_emb = _unknown_embeddings(rng, spec, means, sigmas)
    test_unknown = pack_for(
        unk_emb, np.full(spec.n_unknown, -1, dtype=np.int32)
    )
    return train, test_known, test_unknown
