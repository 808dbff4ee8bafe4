"""Dataset loading, metric computation, and the batch evaluation driver."""

from bluemed.evalharness.dataset import (
    ERROR_TYPES,
    EvalRecord,
    dataset_stats,
    format_stats,
    load_dataset,
)
from bluemed.evalharness.metrics import (
    REPORT_HEADER,
    MetricsReport,
    PredictionRecord,
    average_reports,
    compute_metrics,
    confusion_counts,
    format_report_row,
    pr_auc_score,
    roc_auc_score,
    score_from_verdict,
)
from bluemed.evalharness.runner import (
    EvalDeps,
    Pipeline,
    ScoreMode,
    run_evaluation,
    run_once,
)

__all__ = [
    "ERROR_TYPES",
    "EvalDeps",
    "EvalRecord",
    "MetricsReport",
    "Pipeline",
    "PredictionRecord",
    "REPORT_HEADER",
    "ScoreMode",
    "average_reports",
    "compute_metrics",
    "confusion_counts",
    "dataset_stats",
    "format_report_row",
    "format_stats",
    "load_dataset",
    "pr_auc_score",
    "roc_auc_score",
    "run_evaluation",
    "run_once",
    "score_from_verdict",
]
