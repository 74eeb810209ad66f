"""Normality auditing and method-comparison significance testing.

Shapiro-Wilk uses the published large-sample (n <= 5000) coefficient
approximation with the log-normal p-value transforms; the Student-t CDF
comes from the regularized incomplete beta function evaluated by a
continued fraction. Both are self-contained so tests can pin recorded
reference values against them independently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from statistics import NormalDist

import numpy as np

from ._util import atomic_write_text
from .errors import DegenerateStatisticsError, PackValidationError
from .featurepack import FeaturePack, correct_mask
from .metrics import area_under, oscr_curve, roc_curve
from .scoring import ScoredSet

_SMALL_P = 1e-19

# Ascending-power polynomial coefficients of the n<=5000 approximation:
# the two largest order-statistic weights as corrections in 1/sqrt(n),
# then mean/log-sd of the transformed statistic for the two n regimes.
_C1 = (0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_C3 = (0.5440, -0.39978, 0.025054, -6.714e-4)
_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_C6 = (-0.4803, -0.082676, 0.0030302)


def _poly(coeffs, x: float) -> float:
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def _norm_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


@lru_cache(maxsize=256)
def _sw_weights(n: int) -> np.ndarray:
    """Order-statistic weights a_1..a_n (antisymmetric, roughly unit norm)."""
    if n == 3:
        root_half = math.sqrt(0.5)
        return np.array([-root_half, 0.0, root_half])
    nd = NormalDist()
    m = np.array([nd.inv_cdf((i - 0.375) / (n + 0.25)) for i in range(1, n + 1)])
    ssq = float(m @ m)
    u = 1.0 / math.sqrt(n)
    a = np.empty(n, dtype=np.float64)
    a_n = m[-1] / math.sqrt(ssq) + _poly(_C1, u)
    if n > 5:
        a_n1 = m[-2] / math.sqrt(ssq) + _poly(_C2, u)
        phi = (ssq - 2.0 * m[-1] ** 2 - 2.0 * m[-2] ** 2) / (
            1.0 - 2.0 * a_n**2 - 2.0 * a_n1**2
        )
        a[2 : n - 2] = m[2 : n - 2] / math.sqrt(phi)
        a[-2], a[1] = a_n1, -a_n1
    else:
        phi = (ssq - 2.0 * m[-1] ** 2) / (1.0 - 2.0 * a_n**2)
        a[1 : n - 1] = m[1 : n - 1] / math.sqrt(phi)
    a[-1], a[0] = a_n, -a_n
    a.flags.writeable = False
    return a


def shapiro_wilk(sample) -> tuple[float, float]:
    """W statistic and p-value for the normality null, 3 <= n <= 5000."""
    x = np.sort(np.asarray(sample, dtype=np.float64))
    n = x.size
    if n < 3 or n > 5000:
        raise ValueError(f"sample size {n} outside the supported range [3, 5000]")
    if not np.isfinite(x).all():
        raise ValueError("sample contains non-finite values")
    if x[0] == x[-1]:
        raise DegenerateStatisticsError("zero sample variance")
    a = _sw_weights(n)
    xm = x - x.mean()
    am = a - a.mean()
    w = float((am @ xm) ** 2 / ((am @ am) * (xm @ xm)))
    w = min(max(w, 1e-300), 1.0)
    if n == 3:
        p = (6.0 / math.pi) * (math.asin(math.sqrt(w)) - math.asin(math.sqrt(0.75)))
    else:
        y = math.log(max(1.0 - w, 1e-300))
        if n <= 11:
            gamma = -2.273 + 0.459 * n
            if y >= gamma:
                p = _SMALL_P
            else:
                z = (-math.log(gamma - y) - _poly(_C3, n)) / math.exp(_poly(_C4, n))
                p = _norm_sf(z)
        else:
            ln_n = math.log(n)
            z = (y - _poly(_C5, ln_n)) / math.exp(_poly(_C6, ln_n))
            p = _norm_sf(z)
    p = min(max(p, _SMALL_P), 1.0 - 1e-16)
    return w, p


def holm_stepdown(pvals, alpha: float = 0.05) -> np.ndarray:
    """Step-down family-wise rejection flags, in the input order.

    Walk the sorted p-values; reject while p_(i) <= alpha/(m-i+1) and stop
    at the first failure, so the rejection set is downward-closed.
    """
    p = np.asarray(pvals, dtype=np.float64)
    if p.ndim != 1:
        raise ValueError("p-values must be a 1-d sequence")
    if p.size and (np.isnan(p).any() or (p < 0).any() or (p > 1).any()):
        raise ValueError("p-values must lie in [0, 1]")
    m = p.size
    reject = np.zeros(m, dtype=bool)
    for i, idx in enumerate(np.argsort(p, kind="stable")):
        if p[idx] <= alpha / (m - i):
            reject[idx] = True
        else:
            break
    return reject


@dataclass(frozen=True)
class NormalityAudit:
    """Shapiro-Wilk over every (class, dimension) cell plus Holm control."""

    n_classes: int
    dim: int
    alpha: float
    class_index: np.ndarray  # (K*D,), class-major order
    dim_index: np.ndarray
    w: np.ndarray            # nan where degenerate
    p: np.ndarray            # nan where degenerate
    rejected: np.ndarray
    degenerate: np.ndarray

    @property
    def n_cells(self) -> int:
        return self.n_classes * self.dim

    @property
    def n_tested(self) -> int:
        return int((~self.degenerate).sum())

    @property
    def n_rejected(self) -> int:
        return int(self.rejected.sum())

    @property
    def rejection_fraction(self) -> float:
        tested = self.n_tested
        return self.n_rejected / tested if tested else 0.0


def normality_audit(train: FeaturePack, alpha: float = 0.05) -> NormalityAudit:
    """Test each class's correctly classified values per dimension.

    Cells of classes with fewer than 3 correct samples, and constant
    dimensions, are flagged degenerate and left out of the Holm family.
    """
    if not train.known_mask.all():
        row = int(np.argmax(~train.known_mask))
        raise PackValidationError(f"audit pack contains unknown label at row {row}")
    k, d = train.n_classes, train.dim
    total = k * d
    class_index = np.repeat(np.arange(k), d)
    dim_index = np.tile(np.arange(d), k)
    w = np.full(total, np.nan)
    p = np.full(total, np.nan)
    degenerate = np.zeros(total, dtype=bool)
    correct = correct_mask(train)
    for c in range(k):
        base = c * d
        rows = correct & (train.labels == c)
        if int(rows.sum()) < 3:
            degenerate[base : base + d] = True
            continue
        x = train.embeddings[rows].astype(np.float64)
        for j in range(d):
            col = x[:, j]
            if col.min() == col.max():
                degenerate[base + j] = True
                continue
            w[base + j], p[base + j] = shapiro_wilk(col)
    rejected = np.zeros(total, dtype=bool)
    tested = ~degenerate
    if tested.any():
        rejected[tested] = holm_stepdown(p[tested], alpha)
    return NormalityAudit(
        n_classes=k,
        dim=d,
        alpha=alpha,
        class_index=class_index,
        dim_index=dim_index,
        w=w,
        p=p,
        rejected=rejected,
        degenerate=degenerate,
    )


def write_audit_csv(audit: NormalityAudit, path) -> None:
    lines = ["class,dim,W,p,rejected,degenerate"]
    for i in range(audit.n_cells):
        lines.append(
            f"{audit.class_index[i]},{audit.dim_index[i]},"
            f"{audit.w[i]:.17g},{audit.p[i]:.17g},"
            f"{int(audit.rejected[i])},{int(audit.degenerate[i])}"
        )
    atomic_write_text(path, "\n".join(lines) + "\n")


def _betacf(a: float, b: float, x: float) -> float:
    # Modified Lentz evaluation of the incomplete-beta continued fraction.
    fpmin = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < fpmin:
        d = fpmin
    d = 1.0 / d
    h = d
    for m in range(1, 400):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            return h
    raise RuntimeError("incomplete beta continued fraction did not converge")


def _betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_two_sided(t: float, df: int) -> float:
    """P(|T| >= |t|) for Student's t with df degrees of freedom."""
    if df < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {df}")
    return _betainc_reg(df / 2.0, 0.5, df / (df + t * t))


def paired_t_test(a, b) -> tuple[float, float]:
    """Two-sided paired t-test on the elementwise differences."""
    av = np.asarray(a, dtype=np.float64).reshape(-1)
    bv = np.asarray(b, dtype=np.float64).reshape(-1)
    if av.shape != bv.shape:
        raise ValueError(f"length mismatch: {av.shape[0]} vs {bv.shape[0]}")
    n = av.size
    if n < 2:
        raise ValueError(f"need at least 2 pairs, got {n}")
    d = av - bv
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        raise DegenerateStatisticsError("zero-variance differences")
    t = float(d.mean() / (sd / math.sqrt(n)))
    return t, student_t_two_sided(t, n - 1)


@dataclass(frozen=True)
class SignificanceReport:
    """Resampled metric comparison between two methods."""

    method_a: str
    method_b: str
    metric: str
    resamples: int
    n_known: int
    n_unknown: int
    seed: int
    bonferroni_m: int
    values_a: np.ndarray
    values_b: np.ndarray
    t: float | None
    p: float | None
    p_corrected: float | None
    indistinguishable: bool

    def to_dict(self) -> dict:
        def row(name, values):
            return {
                "name": name,
                "mean": float(values.mean()),
                "std": float(values.std(ddof=1)) if values.size > 1 else 0.0,
                "values": [float(v) for v in values],
            }

        return {
            "metric": self.metric,
            "resamples": self.resamples,
            "n_known": self.n_known,
            "n_unknown": self.n_unknown,
            "seed": self.seed,
            "bonferroni_m": self.bonferroni_m,
            "method_a": row(self.method_a, self.values_a),
            "method_b": row(self.method_b, self.values_b),
            "t": self.t,
            "p": self.p,
            "p_corrected": self.p_corrected,
            "indistinguishable": self.indistinguishable,
        }


def _subset(scored: ScoredSet, idx: np.ndarray) -> ScoredSet:
    return ScoredSet(
        method=scored.method,
        predicted=scored.predicted[idx],
        scores=scored.scores[idx],
        pack_id=scored.pack_id,
    )


def _metric_value(metric, known, labels, unknown) -> float:
    if metric == "auroc":
        return area_under(roc_curve(known, unknown))
    if metric == "auoscr":
        return area_under(oscr_curve(known, labels, unknown))
    raise ValueError(f"unknown metric {metric!r}; expected auroc or auoscr")


def bootstrap_compare(
    a_known: ScoredSet,
    a_unknown: ScoredSet,
    b_known: ScoredSet,
    b_unknown: ScoredSet,
    labels,
    *,
    metric: str = "auroc",
    resamples: int = 10,
    n_known: int = 1000,
    n_unknown: int = 1000,
    seed: int,
    bonferroni_m: int = 1,
) -> SignificanceReport:
    """Paired resampled comparison of one metric between two methods.

    Each resample draws known/unknown indices without replacement and
    applies the same indices to both methods, then a two-sided paired
    t-test runs over the per-resample metric pairs. When every difference
    is exactly zero the methods are reported indistinguishable instead.
    The std reported per method is the sample (n-1) standard deviation.
    """
    labels = np.asarray(labels)
    if len(a_known) != len(b_known) or len(a_unknown) != len(b_unknown):
        raise ValueError("method A and B must score the same packs")
    if labels.shape[0] != len(a_known):
        raise ValueError("labels length does not match the known scored sets")
    if n_known > len(a_known):
        raise ValueError(
            f"known pack has {len(a_known)} rows, fewer than n_known={n_known}"
        )
    if n_unknown > len(a_unknown):
        raise ValueError(
            f"unknown pack has {len(a_unknown)} rows, fewer than n_unknown={n_unknown}"
        )
    if resamples < 2:
        raise ValueError("need at least 2 resamples for a paired test")
    values_a = np.empty(resamples)
    values_b = np.empty(resamples)
    for r, child in enumerate(np.random.SeedSequence(seed).spawn(resamples)):
        rng = np.random.default_rng(child)
        idx_k = rng.choice(len(a_known), size=n_known, replace=False)
        idx_u = rng.choice(len(a_unknown), size=n_unknown, replace=False)
        sub_labels = labels[idx_k]
        values_a[r] = _metric_value(
            metric, _subset(a_known, idx_k), sub_labels, _subset(a_unknown, idx_u)
        )
        values_b[r] = _metric_value(
            metric, _subset(b_known, idx_k), sub_labels, _subset(b_unknown, idx_u)
        )
    if np.array_equal(values_a, values_b):
        t = p = p_corrected = None
        indistinguishable = True
    else:
        t, p = paired_t_test(values_a, values_b)
        p_corrected = min(1.0, bonferroni_m * p)
        indistinguishable = False
    return SignificanceReport(
        method_a=a_known.method,
        method_b=b_known.method,
        metric=metric,
        resamples=resamples,
        n_known=n_known,
        n_unknown=n_unknown,
        seed=seed,
        bonferroni_m=bonferroni_m,
        values_a=values_a,
        values_b=values_b,
        t=t,
        p=p,
        p_corrected=p_corrected,
        indistinguishable=indistinguishable,
    )
