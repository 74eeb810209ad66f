"""Per-class Gaussian open-set scoring (GHOST) with baselines and metrics."""

from .errors import (
    DegenerateStatisticsError,
    FitError,
    GhostEvalError,
    PackFormatError,
    PackValidationError,
)
from .featurepack import (
    FeaturePack,
    PackDiagnostics,
    correct_mask,
    diagnose,
    read_csv_pack,
    read_pack,
    write_pack,
)
from .gaussbank import SIGMA_FLOOR, GaussianBank, fit, load_bank, save_bank, zscore, zscores
from .metrics import (
    CcrTable,
    EvalCurve,
    FairnessProfile,
    area_under,
    closed_set_accuracy,
    default_fpr_grid,
    f_at_c95,
    fairness_profile,
    fpr_at_tpr,
    invert_fpr,
    oscr_curve,
    per_class_ccr,
    roc_curve,
    summarize,
    top_bottom_split,
)
from .scoring import (
    METHODS,
    S_FLOOR,
    ReferenceBank,
    ScoredSet,
    build_reference,
    energy_score,
    ghost_score,
    maxlogit_score,
    msp_score,
    nnguide_score,
    read_scores_csv,
    score_pack,
    write_scores_csv,
)
from .stats import (
    NormalityAudit,
    SignificanceReport,
    bootstrap_compare,
    holm_stepdown,
    normality_audit,
    paired_t_test,
    shapiro_wilk,
    student_t_two_sided,
)
from .synth import SynthSpec, generate

__version__ = "0.1.0"
