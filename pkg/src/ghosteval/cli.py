"""Command-line entry point.

Subcommands: fit, score, eval, audit, compare, synth, import-csv.
Exit codes: 0 success, 2 usage error, 3 data error, 4 statistical
degeneracy.

Every option can also come from a JSON config file (--config); explicit
flags win over the config, which wins over the built-in defaults listed
in DEFAULTS. Randomized subcommands refuse to run without a seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, fields

import numpy as np

from . import featurepack, gaussbank, metrics, scoring, stats, synth
from ._util import atomic_write_text
from .errors import (
    DegenerateStatisticsError,
    FitError,
    PackFormatError,
    PackValidationError,
)

DEFAULTS = {
    "fraction": scoring.NNGUIDE_FRACTION,
    "k_nn": scoring.NNGUIDE_K,
    "alpha": 0.05,
    "metric": "auroc",
    "resamples": 10,
    "n_known": 1000,
    "n_unknown": 1000,
    "bonferroni_m": 1,
    "subset_fraction": 0.10,
    "fpr_grid": None,
    "mean_spread": 3.0,
    "sigma_lo": 0.5,
    "sigma_hi": 1.5,
    "unknown_mode": "shifted-mean",
    "unknown_shift": 2.0,
    "noisy_classes": 0,
    "noisy_sigma_scale": 3.0,
    "logit_bias": 4.0,
    "logit_noise": 0.3,
}

_REQUIRED = {
    "fit": ("train", "out"),
    "score": ("method", "pack", "out"),
    "eval": ("known_pack", "known_scores", "unknown_scores", "out_dir"),
    "audit": ("train", "out"),
    "compare": ("method_a", "method_b", "known_pack", "unknown_pack", "out", "seed"),
    "synth": (
        "out_dir", "classes", "dim", "train_per_class", "test_per_class",
        "unknowns", "seed",
    ),
    "import-csv": ("csv", "out"),
}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved options for one subcommand run."""

    command: str
    train: str = None
    pack: str = None
    known_pack: str = None
    unknown_pack: str = None
    csv: str = None
    out: str = None
    out_dir: str = None
    known_scores: str = None
    unknown_scores: str = None
    method: str = None
    method_a: str = None
    method_b: str = None
    bank: str = None
    ref_pack: str = None
    fraction: float = None
    k_nn: int = None
    seed: int = None
    fpr_grid: list = None
    subset_fraction: float = None
    alpha: float = None
    metric: str = None
    resamples: int = None
    n_known: int = None
    n_unknown: int = None
    bonferroni_m: int = None
    classes: int = None
    dim: int = None
    train_per_class: int = None
    test_per_class: int = None
    unknowns: int = None
    mean_spread: float = None
    sigma_lo: float = None
    sigma_hi: float = None
    unknown_mode: str = None
    unknown_shift: float = None
    noisy_classes: int = None
    noisy_sigma_scale: float = None
    logit_bias: float = None
    logit_noise: float = None


def _parse_grid(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ghosteval",
        description="Per-class Gaussian open-set scoring and evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON file with option defaults; flags win")
        return p

    p = add("fit", "fit a Gaussian bank from a training pack")
    p.add_argument("--train", help="training feature pack")
    p.add_argument("--out", help="output bank file")

    p = add("score", "score one pack with one method")
    p.add_argument("--method", choices=scoring.METHODS)
    p.add_argument("--pack", help="feature pack to score")
    p.add_argument("--out", help="output scores CSV")
    p.add_argument("--bank", help="Gaussian bank (ghost)")
    p.add_argument("--ref-pack", dest="ref_pack", help="training pack for NNGuide")
    p.add_argument("--fraction", type=float, help="NNGuide subsample fraction")
    p.add_argument("--k-nn", dest="k_nn", type=int, help="NNGuide neighbor count")
    p.add_argument("--seed", type=int, help="seed for the NNGuide subsample")

    p = add("eval", "emit OSCR/ROC curves, fairness profile, and summary")
    p.add_argument("--known-pack", dest="known_pack")
    p.add_argument("--known-scores", dest="known_scores")
    p.add_argument("--unknown-scores", dest="unknown_scores")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--fpr-grid", dest="fpr_grid", help="comma-separated FPR targets")
    p.add_argument(
        "--subset-fraction", dest="subset_fraction", type=float,
        help="fraction for top/bottom class curves",
    )

    p = add("audit", "Shapiro-Wilk normality audit of a training pack")
    p.add_argument("--train")
    p.add_argument("--out", help="output audit CSV")
    p.add_argument("--alpha", type=float)

    p = add("compare", "paired resampled comparison of two methods")
    p.add_argument("--method-a", dest="method_a", choices=scoring.METHODS)
    p.add_argument("--method-b", dest="method_b", choices=scoring.METHODS)
    p.add_argument("--known-pack", dest="known_pack")
    p.add_argument("--unknown-pack", dest="unknown_pack")
    p.add_argument("--out", help="output report JSON")
    p.add_argument("--metric", choices=("auroc", "auoscr"))
    p.add_argument("--resamples", type=int)
    p.add_argument("--n-known", dest="n_known", type=int)
    p.add_argument("--n-unknown", dest="n_unknown", type=int)
    p.add_argument("--bonferroni-m", dest="bonferroni_m", type=int)
    p.add_argument("--bank", help="Gaussian bank (ghost)")
    p.add_argument("--ref-pack", dest="ref_pack", help="training pack for NNGuide")
    p.add_argument("--fraction", type=float)
    p.add_argument("--k-nn", dest="k_nn", type=int)
    p.add_argument("--seed", type=int)

    p = add("synth", "generate train/test-known/test-unknown packs")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--classes", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--train-per-class", dest="train_per_class", type=int)
    p.add_argument("--test-per-class", dest="test_per_class", type=int)
    p.add_argument("--unknowns", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--mean-spread", dest="mean_spread", type=float)
    p.add_argument("--sigma-lo", dest="sigma_lo", type=float)
    p.add_argument("--sigma-hi", dest="sigma_hi", type=float)
    p.add_argument("--unknown-mode", dest="unknown_mode", choices=synth.UNKNOWN_MODES)
    p.add_argument("--unknown-shift", dest="unknown_shift", type=float)
    p.add_argument("--noisy-classes", dest="noisy_classes", type=int)
    p.add_argument("--noisy-sigma-scale", dest="noisy_sigma_scale", type=float)
    p.add_argument("--logit-bias", dest="logit_bias", type=float)
    p.add_argument("--logit-noise", dest="logit_noise", type=float)

    p = add("import-csv", "convert a hand-fixture CSV into a pack")
    p.add_argument("--csv")
    p.add_argument("--out", help="output feature pack")
    return parser


def _resolve(parser, args) -> RunConfig:
    config = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            config = json.load(fh)
        if not isinstance(config, dict):
            parser.error(f"config file {args.config} must hold a JSON object")
    names = {f.name for f in fields(RunConfig)}
    resolved = {"command": args.command}
    for name in names - {"command"}:
        value = getattr(args, name, None)
        if value is None and name in config:
            value = config[name]
        if value is None and name in DEFAULTS:
            value = DEFAULTS[name]
        resolved[name] = value
    if isinstance(resolved.get("fpr_grid"), str):
        resolved["fpr_grid"] = _parse_grid(resolved["fpr_grid"])
    missing = [n for n in _REQUIRED[args.command] if resolved.get(n) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        parser.error(f"{args.command}: missing required option(s): {flags}")
    if resolved["command"] == "score" and resolved["method"] == "nnguide":
        if resolved.get("ref_pack") is None:
            parser.error("score --method nnguide needs --ref-pack")
        if resolved.get("seed") is None:
            parser.error(
                "score --method nnguide draws a random subsample; --seed is required"
            )
    if resolved["command"] == "compare" and "nnguide" in (
        resolved["method_a"], resolved["method_b"]
    ):
        if resolved.get("ref_pack") is None:
            parser.error("compare with nnguide needs --ref-pack")
    return RunConfig(**resolved)


def _write_json(path, payload) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2) + "\n")


def _scored_for(cfg: RunConfig, method: str, pack, pack_id: str) -> scoring.ScoredSet:
    bank = ref = None
    if method == "ghost":
        if cfg.bank is None:
            raise ValueError("ghost scoring needs --bank")
        bank = gaussbank.load_bank(cfg.bank)
    elif method == "nnguide":
        ref = scoring.build_reference(
            featurepack.read_pack(cfg.ref_pack),
            fraction=cfg.fraction,
            k_nn=cfg.k_nn,
            seed=cfg.seed,
        )
    return scoring.score_pack(method, pack, bank=bank, ref=ref, pack_id=pack_id)


def _require_known_labels(pack, what: str) -> np.ndarray:
    if not pack.known_mask.all():
        row = int(np.argmax(~pack.known_mask))
        raise PackValidationError(
            f"{what} contains an unknown label at row {row}; known labels required"
        )
    return pack.labels


def _cmd_fit(cfg: RunConfig) -> int:
    bank = gaussbank.fit(featurepack.read_pack(cfg.train))
    gaussbank.save_bank(bank, cfg.out)
    print(f"wrote {cfg.out} ({bank.n_classes} classes x {bank.dim} dims)")
    return 0


def _cmd_score(cfg: RunConfig) -> int:
    pack = featurepack.read_pack(cfg.pack)
    scored = _scored_for(cfg, cfg.method, pack, pack_id=cfg.pack)
    scoring.write_scores_csv(scored, cfg.out)
    print(f"wrote {cfg.out} ({len(scored)} rows, method={cfg.method})")
    return 0


def _cmd_eval(cfg: RunConfig) -> int:
    pack = featurepack.read_pack(cfg.known_pack)
    labels = _require_known_labels(pack, "known pack")
    known = scoring.read_scores_csv(cfg.known_scores)
    unknown = scoring.read_scores_csv(cfg.unknown_scores)
    if len(known) != pack.n_samples:
        raise PackValidationError(
            f"known scores have {len(known)} rows, pack has {pack.n_samples}"
        )
    os.makedirs(cfg.out_dir, exist_ok=True)
    oscr = metrics.oscr_curve(known, labels, unknown)
    roc = metrics.roc_curve(known, unknown)
    metrics.write_curve_csv(oscr, os.path.join(cfg.out_dir, "oscr.csv"))
    metrics.write_curve_csv(roc, os.path.join(cfg.out_dir, "roc.csv"))

    grid = np.asarray(
        cfg.fpr_grid if cfg.fpr_grid is not None else metrics.default_fpr_grid(),
        dtype=np.float64,
    )
    thresholds = metrics.invert_fpr(unknown.scores, grid)
    table = metrics.per_class_ccr(known, labels, pack.n_classes, thresholds)
    profile = metrics.fairness_profile(table, grid)
    metrics.write_fairness_csv(profile, os.path.join(cfg.out_dir, "fairness.csv"))
    if not profile.balanced:
        print(
            "warning: per-class sample counts differ; the FPR=1 mean CCR "
            "is not the closed-set accuracy",
            file=sys.stderr,
        )

    top, bottom = metrics.top_bottom_split(
        known, labels, pack.n_classes, cfg.subset_fraction
    )
    for name, classes in (("top", top), ("bottom", bottom)):
        mask = np.isin(labels, classes)
        sub = scoring.ScoredSet(
            method=known.method,
            predicted=known.predicted[mask],
            scores=known.scores[mask],
            pack_id=known.pack_id,
        )
        curve = metrics.oscr_curve(sub, labels[mask], unknown)
        metrics.write_curve_csv(curve, os.path.join(cfg.out_dir, f"oscr_{name}.csv"))
    _write_json(
        os.path.join(cfg.out_dir, "subsets.json"),
        {"fraction": cfg.subset_fraction, "top": top, "bottom": bottom},
    )

    summary = metrics.summarize(known, labels, unknown)
    _write_json(os.path.join(cfg.out_dir, "summary.json"), summary)
    print(
        f"wrote {cfg.out_dir}/{{oscr,roc,fairness,oscr_top,oscr_bottom}}.csv "
        f"and summary.json"
    )
    return 0


def _cmd_audit(cfg: RunConfig) -> int:
    audit = stats.normality_audit(featurepack.read_pack(cfg.train), alpha=cfg.alpha)
    stats.write_audit_csv(audit, cfg.out)
    print(
        f"tested={audit.n_tested} degenerate={audit.n_cells - audit.n_tested} "
        f"rejected={audit.n_rejected} fraction={audit.rejection_fraction:.6f}"
    )
    return 0


def _cmd_compare(cfg: RunConfig) -> int:
    known_pack = featurepack.read_pack(cfg.known_pack)
    unknown_pack = featurepack.read_pack(cfg.unknown_pack)
    labels = _require_known_labels(known_pack, "known pack")
    report = stats.bootstrap_compare(
        _scored_for(cfg, cfg.method_a, known_pack, cfg.known_pack),
        _scored_for(cfg, cfg.method_a, unknown_pack, cfg.unknown_pack),
        _scored_for(cfg, cfg.method_b, known_pack, cfg.known_pack),
        _scored_for(cfg, cfg.method_b, unknown_pack, cfg.unknown_pack),
        labels,
        metric=cfg.metric,
        resamples=cfg.resamples,
        n_known=cfg.n_known,
        n_unknown=cfg.n_unknown,
        seed=cfg.seed,
        bonferroni_m=cfg.bonferroni_m,
    )
    _write_json(cfg.out, report.to_dict())
    if report.indistinguishable:
        print(f"{cfg.method_a} vs {cfg.method_b}: indistinguishable")
    else:
        print(
            f"{cfg.method_a} vs {cfg.method_b}: t={report.t:.4g} "
            f"p={report.p:.4g} corrected={report.p_corrected:.4g}"
        )
    return 0


def _cmd_synth(cfg: RunConfig) -> int:
    spec = synth.SynthSpec(
        n_classes=cfg.classes,
        dim=cfg.dim,
        train_per_class=cfg.train_per_class,
        test_per_class=cfg.test_per_class,
        n_unknown=cfg.unknowns,
        seed=cfg.seed,
        mean_spread=cfg.mean_spread,
        sigma_range=(cfg.sigma_lo, cfg.sigma_hi),
        unknown_mode=cfg.unknown_mode,
        unknown_shift=cfg.unknown_shift,
        noisy_classes=cfg.noisy_classes,
        noisy_sigma_scale=cfg.noisy_sigma_scale,
        logit_bias=cfg.logit_bias,
        logit_noise=cfg.logit_noise,
    )
    train, known, unknown = synth.generate(spec)
    os.makedirs(cfg.out_dir, exist_ok=True)
    for name, pack in (
        ("train.ghpk", train),
        ("test-known.ghpk", known),
        ("test-unknown.ghpk", unknown),
    ):
        featurepack.write_pack(pack, os.path.join(cfg.out_dir, name))
    print(
        f"wrote {cfg.out_dir}/{{train,test-known,test-unknown}}.ghpk "
        f"(K={spec.n_classes}, D={spec.dim}, seed={spec.seed})"
    )
    return 0


def _cmd_import_csv(cfg: RunConfig) -> int:
    pack = featurepack.read_csv_pack(cfg.csv)
    featurepack.write_pack(pack, cfg.out)
    print(f"wrote {cfg.out} ({pack.n_samples} rows, K={pack.n_classes}, D={pack.dim})")
    return 0


_COMMANDS = {
    "fit": _cmd_fit,
    "score": _cmd_score,
    "eval": _cmd_eval,
    "audit": _cmd_audit,
    "compare": _cmd_compare,
    "synth": _cmd_synth,
    "import-csv": _cmd_import_csv,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _resolve(parser, args)
        return _COMMANDS[cfg.command](cfg)
    except SystemExit as exc:
        code = exc.code
        if code is None:
            return 0
        return code if isinstance(code, int) else 2
    except (PackFormatError, PackValidationError, OSError) as exc:
        print(f"ghosteval: data error: {exc}", file=sys.stderr)
        return 3
    except (FitError, DegenerateStatisticsError) as exc:
        print(f"ghosteval: statistical degeneracy: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"ghosteval: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
