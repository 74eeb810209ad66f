"""Threshold-sweep evaluation: OSCR, ROC, areas, FPR95, F@C95, fairness.

Conventions, pinned once and used everywhere:

* Thresholds are the distinct observed scores of the known/unknown union
  plus -inf/+inf sentinels; acceptance is score >= theta on both sides.
  The curves are exact staircases, so areas do not depend on any grid
  resolution.
* Area under a curve is the trapezoid over points sorted by FPR. With
  the staircase convention this equals the pairwise-comparison count
  with ties credited one half.
* FPR inversion picks the smallest threshold whose FPR is <= the target,
  searching {-inf} + distinct unknown scores + {+inf}. A target of 1
  therefore yields -inf and "accept everything", which makes per-class
  CCR at FPR=1 the closed-set per-class accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._util import atomic_write_text
from .scoring import ScoredSet

DEFAULT_FPR_ANCHORS = (1.0, 0.5, 0.2, 0.1, 0.01, 0.001)


@dataclass(frozen=True)
class EvalCurve:
    """Staircase of (threshold, FPR, CCR-or-TPR) points, thresholds ascending."""

    kind: str  # "oscr" or "roc"
    thresholds: np.ndarray
    fpr: np.ndarray
    rate: np.ndarray  # CCR for oscr, TPR for roc

    def __post_init__(self):
        if self.kind not in ("oscr", "roc"):
            raise ValueError(f"unknown curve kind {self.kind!r}")

    @property
    def rate_name(self) -> str:
        return "ccr" if self.kind == "oscr" else "tpr"


@dataclass(frozen=True)
class CcrTable:
    """Per-class CCR at a shared list of thresholds."""

    thresholds: np.ndarray   # (T,)
    values: np.ndarray       # (K, T), rows of absent classes are 0
    class_counts: np.ndarray  # (K,) test samples per class
    tested: np.ndarray       # (K,) bool, class has at least one sample


@dataclass(frozen=True)
class FairnessProfile:
    """Mean/variance/coefficient-of-variation of per-class CCR per FPR."""

    fpr_grid: np.ndarray
    thresholds: np.ndarray
    mu: np.ndarray
    var: np.ndarray
    cov: np.ndarray       # nan where undefined; see `defined`
    defined: np.ndarray   # bool, mu > 0
    per_class: np.ndarray  # (K, T)
    tested: np.ndarray    # (K,)
    balanced: bool        # equal sample counts across tested classes


def _count_ge(sorted_values: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    return sorted_values.size - np.searchsorted(sorted_values, thresholds, side="left")


def _sweep(known: ScoredSet, unknown: ScoredSet, accepted_scores: np.ndarray, kind: str) -> EvalCurve:
    if len(known) == 0:
        raise ValueError("known set is empty")
    if len(unknown) == 0:
        raise ValueError("unknown set is empty")
    union = np.unique(np.concatenate([known.scores, unknown.scores]))
    thresholds = np.concatenate(([-np.inf], union, [np.inf]))
    numer = np.sort(accepted_scores)
    rate = _count_ge(numer, thresholds) / len(known)
    fpr = _count_ge(np.sort(unknown.scores), thresholds) / len(unknown)
    return EvalCurve(kind=kind, thresholds=thresholds, fpr=fpr, rate=rate)


def oscr_curve(known: ScoredSet, labels, unknown: ScoredSet) -> EvalCurve:
    """CCR (correct and accepted) versus FPR over all observed thresholds."""
    labels = np.asarray(labels)
    if labels.shape[0] != len(known):
        raise ValueError(
            f"labels length {labels.shape[0]} does not match known set {len(known)}"
        )
    correct = known.scores[known.predicted == labels]
    return _sweep(known, unknown, correct, "oscr")


def roc_curve(known: ScoredSet, unknown: ScoredSet) -> EvalCurve:
    """Binary known-vs-unknown staircase; correctness is ignored."""
    return _sweep(known, unknown, known.scores, "roc")


def area_under(curve: EvalCurve) -> float:
    """Trapezoidal area over FPR in [0, 1].

    Points are traversed along descending threshold, which orders FPR
    ascending and, at repeated FPR values, keeps the rate reached at the
    segment boundary as the trapezoid anchor. With the >= acceptance rule
    this reproduces the pairwise-comparison count with half tie credit.
    """
    order = np.argsort(curve.thresholds, kind="stable")[::-1]
    return float(np.trapezoid(curve.rate[order], curve.fpr[order]))


def fpr_at_tpr(roc: EvalCurve, level: float = 0.95) -> float:
    """Smallest FPR among staircase points whose TPR reaches `level`."""
    if roc.kind != "roc":
        raise ValueError("fpr_at_tpr expects a roc curve")
    ok = roc.rate >= level
    if not ok.any():
        return 1.0
    return float(roc.fpr[ok].min())


def f_at_c95(oscr: EvalCurve, ratio: float = 0.95) -> float:
    """Smallest FPR where CCR holds `ratio` of the closed-set accuracy.

    The accuracy is the CCR at the -inf sentinel (everything accepted),
    which always meets the target, so the result is at most 1.
    """
    if oscr.kind != "oscr":
        raise ValueError("f_at_c95 expects an oscr curve")
    accuracy = oscr.rate[0]
    ok = oscr.rate >= ratio * accuracy
    return float(oscr.fpr[ok].min())


def closed_set_accuracy(known: ScoredSet, labels) -> float:
    labels = np.asarray(labels)
    if len(known) == 0:
        raise ValueError("known set is empty")
    return float(np.mean(known.predicted == labels))


def invert_fpr(unknown_scores, taus) -> np.ndarray:
    """Per target FPR, the smallest threshold with FPR(theta) <= target."""
    scores = np.sort(np.asarray(unknown_scores, dtype=np.float64))
    if scores.size == 0:
        raise ValueError("unknown set is empty")
    taus = np.atleast_1d(np.asarray(taus, dtype=np.float64))
    if (taus < 0).any() or (taus > 1).any():
        raise ValueError("FPR targets must lie in [0, 1]")
    distinct = np.unique(scores)
    fprs = _count_ge(scores, distinct) / scores.size  # decreasing over distinct
    out = np.empty(taus.shape, dtype=np.float64)
    for i, tau in enumerate(taus):
        if tau >= 1.0:
            out[i] = -np.inf
            continue
        ok = fprs <= tau
        out[i] = distinct[np.argmax(ok)] if ok.any() else np.inf
    return out


def per_class_ccr(known: ScoredSet, labels, n_classes: int, thresholds) -> CcrTable:
    """CCR restricted to each class, at one shared threshold list."""
    labels = np.asarray(labels)
    if labels.shape[0] != len(known):
        raise ValueError("labels length does not match the scored set")
    thresholds = np.asarray(thresholds, dtype=np.float64)
    values = np.zeros((n_classes, thresholds.size), dtype=np.float64)
    counts = np.bincount(labels, minlength=n_classes).astype(np.int64)
    for c in range(n_classes):
        if counts[c] == 0:
            continue
        accepted = np.sort(
            known.scores[(labels == c) & (known.predicted == c)]
        )
        values[c] = _count_ge(accepted, thresholds) / counts[c]
    return CcrTable(
        thresholds=thresholds,
        values=values,
        class_counts=counts,
        tested=counts > 0,
    )


def fairness_profile(table: CcrTable, fpr_grid) -> FairnessProfile:
    """Aggregate a per-class CCR table into mean, variance, and sigma/mu.

    Classes without test samples are excluded. Points with zero mean CCR
    get cov=nan and defined=False rather than a silent zero. `balanced`
    records whether the tested classes have equal sample counts, which is
    the condition under which the FPR=1 mean equals closed-set accuracy.
    """
    fpr_grid = np.asarray(fpr_grid, dtype=np.float64)
    if fpr_grid.shape != table.thresholds.shape:
        raise ValueError("fpr grid and table thresholds must align")
    rows = table.values[table.tested]
    if rows.shape[0] == 0:
        raise ValueError("no tested classes in table")
    mu = rows.mean(axis=0)
    if rows.shape[0] > 1:
        var = rows.var(axis=0, ddof=1)
        # identical per-class rates are exactly fair, not fair up to rounding
        var[rows.max(axis=0) == rows.min(axis=0)] = 0.0
    else:
        var = np.zeros_like(mu)
    defined = mu > 0
    cov = np.full_like(mu, np.nan)
    np.divide(np.sqrt(var), mu, out=cov, where=defined)
    counts = table.class_counts[table.tested]
    return FairnessProfile(
        fpr_grid=fpr_grid,
        thresholds=table.thresholds,
        mu=mu,
        var=var,
        cov=cov,
        defined=defined,
        per_class=table.values,
        tested=table.tested,
        balanced=bool(counts.min() == counts.max()),
    )


def top_bottom_split(known: ScoredSet, labels, n_classes: int, fraction: float = 0.10):
    """Best and worst classes by closed-set per-class accuracy.

    Classes are ordered by (accuracy, class index) ascending; the bottom
    list is the first ceil(fraction*K) entries and the top list the last,
    so ties fall to the lowest indices on the bottom side and the highest
    on the top side.
    """
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    labels = np.asarray(labels)
    counts = np.bincount(labels, minlength=n_classes)
    present = np.flatnonzero(counts > 0)
    acc = np.zeros(n_classes, dtype=np.float64)
    for c in present:
        mask = labels == c
        acc[c] = np.mean(known.predicted[mask] == c)
    m = min(math.ceil(fraction * n_classes), present.size)
    order = sorted(present, key=lambda c: (acc[c], c))
    bottom = [int(c) for c in order[:m]]
    top = [int(c) for c in order[-m:][::-1]]
    return top, bottom


def default_fpr_grid(n_log_points: int = 25) -> np.ndarray:
    """Named anchors plus a log-spaced fill from 1e-3 to 1, descending."""
    fill = np.logspace(-3.0, 0.0, n_log_points)
    grid = np.unique(np.concatenate([np.asarray(DEFAULT_FPR_ANCHORS), fill]))
    return grid[::-1].copy()


def summarize(known: ScoredSet, labels, unknown: ScoredSet) -> dict:
    """The headline numbers: auoscr, auroc, fpr95, f_at_c95, accuracy."""
    oscr = oscr_curve(known, labels, unknown)
    roc = roc_curve(known, unknown)
    return {
        "auoscr": area_under(oscr),
        "auroc": area_under(roc),
        "fpr95": fpr_at_tpr(roc, 0.95),
        "f_at_c95": f_at_c95(oscr),
        "accuracy": closed_set_accuracy(known, labels),
    }


def write_curve_csv(curve: EvalCurve, path) -> None:
    lines = [f"threshold,fpr,{curve.rate_name}"]
    for t, f, r in zip(curve.thresholds, curve.fpr, curve.rate):
        lines.append(f"{float(t)!r},{f:.17g},{r:.17g}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_fairness_csv(profile: FairnessProfile, path) -> None:
    lines = ["fpr,mu,var,cov"]
    for f, m, v, c in zip(profile.fpr_grid, profile.mu, profile.var, profile.cov):
        lines.append(f"{f:.17g},{m:.17g},{v:.17g},{c:.17g}")
    atomic_write_text(path, "\n".join(lines) + "\n")
