import numpy as np
import pytest

from ghosteval import (
    SynthSpec,
    closed_set_accuracy,
    diagnose,
    fit,
    generate,
    read_pack,
    score_pack,
    write_pack,
    zscores,
)


def small_spec(**overrides):
    base = dict(
        n_classes=6, dim=12, train_per_class=60, test_per_class=25,
        n_unknown=150, seed=11,
    )
    base.update(overrides)
    return SynthSpec(**base)


def test_generated_packs_validate_and_round_trip(tmp_path):
    train, known, unknown = generate(small_spec())
    assert train.n_samples == 360
    assert known.n_samples == 150
    assert unknown.n_samples == 150
    assert (unknown.labels == -1).all()
    for name, pack in (("t", train), ("k", known), ("u", unknown)):
        path = tmp_path / f"{name}.ghpk"
        write_pack(pack, path)
        assert read_pack(path) == pack


def test_default_noise_keeps_accuracy_high():
    for seed in (0, 1, 2):
        train, known, _ = generate(small_spec(seed=seed))
        scored = score_pack("maxlogit", known)
        assert closed_set_accuracy(scored, known.labels) >= 0.90
        assert (~diagnose(train).low_support).all()


def test_shifted_unknowns_have_larger_mean_zscore():
    train, known, unknown = generate(small_spec())
    bank = fit(train)
    def mean_z(pack):
        logits = pack.logits.astype(np.float64)
        pred = np.argmax(logits, axis=1)
        return zscores(bank, pack.embeddings.astype(np.float64), pred).mean()
    assert mean_z(unknown) > mean_z(known)


def test_generation_is_deterministic():
    a = generate(small_spec())
    b = generate(small_spec())
    for pa, pb in zip(a, b):
        assert pa == pb


def test_seed_changes_output():
    a, _, _ = generate(small_spec(seed=1))
    b, _, _ = generate(small_spec(seed=2))
    assert not np.array_equal(a.embeddings, b.embeddings)


@pytest.mark.parametrize("mode", ["shifted-mean", "heavy-tail", "uniform"])
def test_all_unknown_modes_produce_valid_packs(mode):
    _, _, unknown = generate(small_spec(unknown_mode=mode))
    assert unknown.n_samples == 150
    assert np.isfinite(unknown.embeddings).all()


def test_noisy_classes_get_wider_sigmas():
    train, _, _ = generate(small_spec(noisy_classes=2, noisy_sigma_scale=4.0))
    bank = fit(train)
    noisy = bank.stds[:2].mean()
    clean = bank.stds[2:].mean()
    assert noisy > 2.0 * clean


def test_sigma_range_validation():
    with pytest.raises(ValueError, match="sigma range"):
        small_spec(sigma_range=(0.0, 1.0))
    with pytest.raises(ValueError, match="sigma range"):
        small_spec(sigma_range=(2.0, 1.0))


def test_unknown_mode_validation():
    with pytest.raises(ValueError, match="unknown mode"):
        small_spec(unknown_mode="adversarial")
