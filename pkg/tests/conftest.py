import numpy as np
import pytest

from ghosteval import FeaturePack, ScoredSet


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_pack(embeddings, logits, labels) -> FeaturePack:
    return FeaturePack(
        embeddings=np.asarray(embeddings, dtype=np.float32),
        logits=np.asarray(logits, dtype=np.float32),
        labels=np.asarray(labels, dtype=np.int32),
    )


def make_scored(scores, predicted=None, method="test") -> ScoredSet:
    scores = np.asarray(scores, dtype=np.float64)
    if predicted is None:
        predicted = np.zeros(scores.shape[0], dtype=np.int64)
    return ScoredSet(
        method=method,
        predicted=np.asarray(predicted, dtype=np.int64),
        scores=scores,
    )


def random_pack(rng, n, k, d, unknown=False) -> FeaturePack:
    labels = (
        np.full(n, -1, dtype=np.int32)
        if unknown
        else rng.integers(0, k, n).astype(np.int32)
    )
    return make_pack(
        rng.normal(size=(n, d)), rng.normal(size=(n, k)), labels
    )
