"""Acceptance suite: one test per criterion, one PASS/FAIL line each.

Run with `pytest tests/test_acceptance.py -s` to see the lines as they
print; without -s pytest still shows them for failing tests.
"""

import functools
import json
import time

import numpy as np
import pytest

import ghosteval as g
from ghosteval.cli import main

from conftest import make_pack, make_scored
from test_stats import SHAPIRO_FIXTURES, TTEST_FIXTURES


def criterion(name):
    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                result = fn(*args, **kwargs)
            except BaseException:
                print(f"FAIL: {name}")
                raise
            print(f"PASS: {name}")
            return result
        return wrapper
    return decorate


def tied_scores(rng, n, loc=0.0):
    return np.round(rng.normal(loc, 1.0, n), 1)


@criterion("AUROC oracle equivalence (200 fixtures, 1e-12, <10s)")
def test_auroc_oracle_equivalence():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    for _ in range(200):
        n_known = int(rng.integers(10, 1001))
        n_unknown = int(rng.integers(10, 1001))
        ks = tied_scores(rng, n_known, loc=rng.uniform(0, 1.5))
        us = tied_scores(rng, n_unknown)
        auc = g.area_under(g.roc_curve(make_scored(ks), make_scored(us)))
        wins = (us[:, None] < ks[None, :]).sum() + 0.5 * (us[:, None] == ks[None, :]).sum()
        oracle = wins / (n_known * n_unknown)
        assert abs(auc - oracle) <= 1e-12
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0, f"took {elapsed:.2f}s"


@criterion("OSCR brute-force equivalence (n<=200 fixtures, exact, <5s)")
def test_oscr_brute_force_equivalence():
    rng = np.random.default_rng(202)
    start = time.perf_counter()
    for _ in range(40):
        n_known = int(rng.integers(5, 120))
        n_unknown = int(rng.integers(5, 200 - n_known + 1))
        k = int(rng.integers(2, 5))
        labels = rng.integers(0, k, n_known)
        predicted = np.where(rng.uniform(size=n_known) < 0.75, labels, (labels + 1) % k)
        ks = tied_scores(rng, n_known, loc=0.7)
        us = tied_scores(rng, n_unknown)
        known = make_scored(ks, predicted=predicted)
        curve = g.oscr_curve(known, labels, make_scored(us))

        thresholds = np.concatenate(
            [[-np.inf], np.unique(np.concatenate([ks, us])), [np.inf]]
        )
        correct = predicted == labels
        for j, theta in enumerate(thresholds):
            ccr = (correct & (ks >= theta)).sum() / n_known
            fpr = (us >= theta).sum() / n_unknown
            assert curve.thresholds[j] == theta
            assert curve.rate[j] == ccr
            assert curve.fpr[j] == fpr
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0, f"took {elapsed:.2f}s"


@criterion("Monotone-invariance suite (50 fixtures, x^3+x and exp, 1e-12)")
def test_monotone_invariance_suite():
    rng = np.random.default_rng(303)
    for _ in range(50):
        n_known = int(rng.integers(20, 200))
        n_unknown = int(rng.integers(20, 200))
        k = int(rng.integers(2, 6))
        labels = rng.integers(0, k, n_known)
        predicted = np.where(rng.uniform(size=n_known) < 0.8, labels, (labels + 1) % k)
        ks = tied_scores(rng, n_known, loc=0.8)
        us = tied_scores(rng, n_unknown)

        def metrics_for(ks_t, us_t):
            known = make_scored(ks_t, predicted=predicted)
            unknown = make_scored(us_t)
            oscr = g.oscr_curve(known, labels, unknown)
            roc = g.roc_curve(known, unknown)
            return (
                g.area_under(oscr),
                g.area_under(roc),
                g.fpr_at_tpr(roc, 0.95),
                g.f_at_c95(oscr),
            )

        base = metrics_for(ks, us)
        for transform in (lambda x: x**3 + x, np.exp):
            got = metrics_for(transform(ks), transform(us))
            for b, t in zip(base, got):
                assert abs(b - t) <= 1e-12


@criterion(
    "GHOST separation on synthetic data "
    "(10 seeds, mean AUROC >= 0.95, beats MaxLogit, compare p < 0.01, <60s)"
)
def test_ghost_separation(tmp_path):
    start = time.perf_counter()
    ghost_aucs, maxlogit_aucs = [], []
    for seed in range(10):
        work = tmp_path / f"seed{seed}"
        assert main([
            "synth", "--out-dir", str(work), "--classes", "50", "--dim", "64",
            "--train-per-class", "200", "--test-per-class", "50",
            "--unknowns", "2500", "--unknown-mode", "shifted-mean",
            "--seed", str(seed),
        ]) == 0
        bank_path = work / "bank.ghbk"
        assert main(["fit", "--train", str(work / "train.ghpk"),
                     "--out", str(bank_path)]) == 0

        known = g.read_pack(work / "test-known.ghpk")
        unknown = g.read_pack(work / "test-unknown.ghpk")
        bank = g.load_bank(bank_path)
        gk = g.score_pack("ghost", known, bank=bank)
        gu = g.score_pack("ghost", unknown, bank=bank)
        mk = g.score_pack("maxlogit", known)
        mu = g.score_pack("maxlogit", unknown)
        ghost_aucs.append(g.area_under(g.roc_curve(gk, gu)))
        maxlogit_aucs.append(g.area_under(g.roc_curve(mk, mu)))

        report_path = work / "report.json"
        assert main([
            "compare", "--method-a", "ghost", "--method-b", "maxlogit",
            "--known-pack", str(work / "test-known.ghpk"),
            "--unknown-pack", str(work / "test-unknown.ghpk"),
            "--bank", str(bank_path), "--out", str(report_path),
            "--seed", str(seed),
        ]) == 0
        report = json.loads(report_path.read_text())
        assert not report["indistinguishable"]
        assert report["method_a"]["mean"] > report["method_b"]["mean"]
        assert report["p_corrected"] < 0.01
    assert np.mean(ghost_aucs) >= 0.95
    assert np.mean(ghost_aucs) > np.mean(maxlogit_aucs)
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0, f"took {elapsed:.2f}s"


@criterion("Fairness: GHOST V_CCR at FPR=0.1 below MaxLogit in >= 8/10 seeds")
def test_fairness_behavior():
    wins = 0
    for seed in range(10):
        spec = g.SynthSpec(
            n_classes=50, dim=64, train_per_class=200, test_per_class=50,
            n_unknown=2500, seed=seed, noisy_classes=10,
        )
        train, known, unknown = g.generate(spec)
        bank = g.fit(train)
        cov = {}
        for method, kwargs in (("ghost", {"bank": bank}), ("maxlogit", {})):
            sk = g.score_pack(method, known, **kwargs)
            su = g.score_pack(method, unknown, **kwargs)
            theta = g.invert_fpr(su.scores, [0.1])
            table = g.per_class_ccr(sk, known.labels, 50, theta)
            profile = g.fairness_profile(table, [0.1])
            assert profile.defined[0]
            cov[method] = float(profile.cov[0])
        wins += cov["ghost"] < cov["maxlogit"]
    assert wins >= 8, f"GHOST fairer in only {wins}/10 seeds"


@criterion(
    "Normality-audit calibration (20 seeds: fraction <= 0.5%, "
    "exponential dim rejected >= 19/20)"
)
def test_normality_audit_calibration():
    fractions = []
    exponential_hits = 0
    for seed in range(20):
        spec = g.SynthSpec(
            n_classes=20, dim=50, train_per_class=200, test_per_class=1,
            n_unknown=0, seed=seed,
        )
        train, _, _ = g.generate(spec)
        audit = g.normality_audit(train, alpha=0.05)
        assert audit.n_tested == 20 * 50
        fractions.append(audit.rejection_fraction)

        emb = train.embeddings.copy()
        rows = train.labels == 0
        emb[rows, 0] = np.random.default_rng(10_000 + seed).exponential(1.0, rows.sum())
        injected = g.FeaturePack(
            embeddings=emb, logits=train.logits, labels=train.labels
        )
        redone = g.normality_audit(injected, alpha=0.05)
        cell = (redone.class_index == 0) & (redone.dim_index == 0)
        exponential_hits += bool(redone.rejected[cell][0])
    assert max(fractions) <= 0.005, f"max rejection fraction {max(fractions)}"
    assert exponential_hits >= 19, f"exponential rejected in {exponential_hits}/20"


@criterion(
    "Statistics oracles (shapiro 1e-4, paired t 1e-6 on recorded fixtures; "
    "holm hand cases)"
)
def test_statistics_oracles():
    assert len(SHAPIRO_FIXTURES) >= 10
    for sample, w_ref, p_ref in SHAPIRO_FIXTURES:
        w, p = g.shapiro_wilk(sample)
        assert abs(w - w_ref) <= 1e-4
        assert abs(p - p_ref) <= 1e-4
    assert len(TTEST_FIXTURES) >= 10
    for a, b, t_ref, p_ref in TTEST_FIXTURES:
        t, p = g.paired_t_test(a, b)
        assert abs(t - t_ref) <= 1e-6
        assert abs(p - p_ref) <= 1e-6
    assert g.holm_stepdown([0.04], 0.05).tolist() == [True]
    assert g.holm_stepdown([0.01, 0.04], 0.05).tolist() == [True, True]
    assert g.holm_stepdown([0.03, 0.04], 0.05).tolist() == [False, False]


@criterion("Fit order-invariance and misclassified-exclusion (100 packs, exact)")
def test_fit_invariances():
    rng = np.random.default_rng(404)
    for _ in range(100):
        k = int(rng.integers(2, 5))
        d = int(rng.integers(1, 6))
        per = int(rng.integers(5, 20))
        labels = np.repeat(np.arange(k), per)
        emb = rng.normal(size=(labels.size, d)) + 4.0 * rng.normal(size=(k, d))[labels]
        logits = np.full((labels.size, k), -9.0, dtype=np.float32)
        logits[np.arange(labels.size), labels] = 9.0
        pack = make_pack(emb, logits, labels)
        bank = g.fit(pack)

        perm = rng.permutation(labels.size)
        shuffled = make_pack(pack.embeddings[perm], pack.logits[perm], pack.labels[perm])
        bank_perm = g.fit(shuffled)
        assert np.array_equal(bank.means, bank_perm.means)
        assert np.array_equal(bank.stds, bank_perm.stds)

        wrong_logits = np.full((1, k), -9.0, dtype=np.float32)
        wrong_logits[0, 1 % k] = 9.0
        extended = make_pack(
            np.vstack([pack.embeddings, rng.normal(size=(1, d)).astype(np.float32)]),
            np.vstack([pack.logits, wrong_logits]),
            np.concatenate([pack.labels, [0]]),
        )
        bank_ext = g.fit(extended)
        assert np.array_equal(bank.means, bank_ext.means)
        assert np.array_equal(bank.stds, bank_ext.stds)
        assert np.array_equal(bank.fitted_counts, bank_ext.fitted_counts)


@criterion("CCR at the FPR=1 threshold equals closed-set accuracy (balanced)")
def test_ccr_at_fpr_one_is_accuracy():
    rng = np.random.default_rng(505)
    for _ in range(50):
        k = int(rng.integers(2, 8))
        per = int(rng.integers(3, 30))
        labels = np.repeat(np.arange(k), per)
        n = labels.size
        predicted = np.where(rng.uniform(size=n) < 0.7, labels, rng.integers(0, k, n))
        known = make_scored(tied_scores(rng, n, loc=0.5), predicted=predicted)
        unknown = make_scored(tied_scores(rng, int(rng.integers(5, 100))))
        accuracy = g.closed_set_accuracy(known, labels)

        curve = g.oscr_curve(known, labels, unknown)
        at_fpr_one = curve.thresholds == -np.inf
        assert curve.fpr[at_fpr_one] == 1.0
        assert curve.rate[at_fpr_one] == accuracy

        theta_one = g.invert_fpr(unknown.scores, [1.0])
        assert theta_one[0] == -np.inf
        table = g.per_class_ccr(known, labels, k, theta_one)
        profile = g.fairness_profile(table, [1.0])
        assert profile.balanced
        assert profile.mu[0] == pytest.approx(accuracy, abs=1e-12)
