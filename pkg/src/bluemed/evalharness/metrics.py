"""Binary classification metrics with INCORRECT as the positive class.

All reported metrics are percentages in [0, 100]. ROC-AUC uses the
pairwise ranking statistic (ties count one half); PR-AUC integrates the
precision-recall steps over descending score thresholds, which makes tied
scores threshold-atomic and ordering-independent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from bluemed.common import Label
from bluemed.errors import DatasetError
from bluemed.evalharness.dataset import EvalRecord

POSITIVE = Label.INCORRECT


@dataclass(frozen=True)
class PredictionRecord:
    note_id: str
    predicted_label: Label
    score: float
    audit_ref: str = ""

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0,1], got {self.score}")


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    roc_auc: float | None
    pr_auc: float | None
    confusion: tuple[float, float, float, float]  # (TP, FP, TN, FN)
    runs_averaged: int = 1
    warnings: tuple[str, ...] = ()

    def to_record(self) -> dict:
        tp, fp, tn, fn = self.confusion
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "roc_auc": self.roc_auc,
            "pr_auc": self.pr_auc,
            "confusion": {"TP": tp, "FP": fp, "TN": tn, "FN": fn},
            "runs_averaged": self.runs_averaged,
            "warnings": list(self.warnings),
        }


def score_from_verdict(final_label: Label, confidence: int) -> float:
    """P(INCORRECT) proxy from the final label and the judge's confidence.

    When the safety layer overrode the judge, the caller passes the FINAL
    label with the judge's original confidence.
    """
    if not 1 <= confidence <= 10:
        raise ValueError("confidence must be in [1,10]")
    scaled = confidence / 10.0
    return scaled if final_label is POSITIVE else 1.0 - scaled


def roc_auc_score(scores: Sequence[float], labels: Sequence[Label]) -> float | None:
    """Pairwise ranking AUC as a percentage; None when one class is absent.

    Equivalent to the normalized Mann-Whitney U statistic: a correctly
    ordered positive/negative pair scores 1, a tie scores 1/2.
    """
    if len(scores) != len(labels):
        raise ValueError("scores and labels must have equal length")
    n_pos = sum(1 for lab in labels if lab is POSITIVE)
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    # Average ranks (1-based) with midrank ties, then the rank-sum identity.
    order = sorted(range(len(scores)), key=lambda i: scores[i])
    ranks = [0.0] * len(scores)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        mid = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = mid
        i = j + 1
    rank_sum_pos = sum(r for r, lab in zip(ranks, labels) if lab is POSITIVE)
    auc = (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
    return auc * 100.0


def pr_auc_score(scores: Sequence[float], labels: Sequence[Label]) -> float | None:
    """Average precision by step integration; None without any positives."""
    if len(scores) != len(labels):
        raise ValueError("scores and labels must have equal length")
    n_pos = sum(1 for lab in labels if lab is POSITIVE)
    if n_pos == 0:
        return None
    thresholds = sorted(set(scores), reverse=True)
    area = 0.0
    prev_recall = 0.0
    tp = 0
    taken = 0
    idx_by_score: dict[float, list[int]] = {}
    for i, s in enumerate(scores):
        idx_by_score.setdefault(s, []).append(i)
    for t in thresholds:
        for i in idx_by_score[t]:
            taken += 1
            if labels[i] is POSITIVE:
                tp += 1
        precision = tp / taken
        recall = tp / n_pos
        area += (recall - prev_recall) * precision
        prev_recall = recall
    return area * 100.0


def confusion_counts(
    preds: Sequence[PredictionRecord], gold: Sequence[EvalRecord]
) -> tuple[int, int, int, int]:
    gold_by_id = {r.note_id: r for r in gold}
    if sorted(gold_by_id) != sorted(p.note_id for p in preds):
        raise DatasetError("prediction and gold id sets differ")
    tp = fp = tn = fn = 0
    for p in preds:
        actual = gold_by_id[p.note_id].gold_label
        if p.predicted_label is POSITIVE:
            if actual is POSITIVE:
                tp += 1
            else:
                fp += 1
        else:
            if actual is POSITIVE:
                fn += 1
            else:
                tn += 1
    return tp, fp, tn, fn


def compute_metrics(
    preds: Sequence[PredictionRecord], gold: Sequence[EvalRecord]
) -> MetricsReport:
    if not preds:
        raise DatasetError("no predictions to score")
    tp, fp, tn, fn = confusion_counts(preds, gold)
    n = tp + fp + tn + fn
    warnings: list[str] = []

    accuracy = (tp + tn) / n
    if tp + fp == 0:
        precision = 0.0
        warnings.append("precision undefined (no positive predictions); reported as 0")
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall = 0.0
        warnings.append("recall undefined (no positive gold labels); reported as 0")
    else:
        recall = tp / (tp + fn)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)

    gold_by_id = {r.note_id: r for r in gold}
    ordered = sorted(preds, key=lambda p: p.note_id)
    scores = [p.score for p in ordered]
    labels = [gold_by_id[p.note_id].gold_label for p in ordered]
    roc = roc_auc_score(scores, labels)
    if roc is None:
        warnings.append("roc_auc not applicable (single gold class)")
    pr = pr_auc_score(scores, labels)
    if pr is None:
        warnings.append("pr_auc not applicable (no gold positives)")

    return MetricsReport(
        accuracy=accuracy * 100.0,
        precision=precision * 100.0,
        recall=recall * 100.0,
        f1=f1 * 100.0,
        roc_auc=roc,
        pr_auc=pr,
        confusion=(float(tp), float(fp), float(tn), float(fn)),
        runs_averaged=1,
        warnings=tuple(warnings),
    )


def average_reports(reports: Sequence[MetricsReport]) -> MetricsReport:
    """Arithmetic mean across runs; an n/a metric in any run stays n/a."""
    if not reports:
        raise ValueError("no reports to average")
    k = len(reports)

    def mean(values: Sequence[float]) -> float:
        return sum(values) / k

    def mean_opt(values: Sequence[float | None]) -> float | None:
        if any(v is None for v in values):
            return None
        return mean([v for v in values if v is not None])

    warnings: list[str] = []
    for rep in reports:
        for w in rep.warnings:
            if w not in warnings:
                warnings.append(w)
    return MetricsReport(
        accuracy=mean([r.accuracy for r in reports]),
        precision=mean([r.precision for r in reports]),
        recall=mean([r.recall for r in reports]),
        f1=mean([r.f1 for r in reports]),
        roc_auc=mean_opt([r.roc_auc for r in reports]),
        pr_auc=mean_opt([r.pr_auc for r in reports]),
        confusion=tuple(mean([r.confusion[i] for r in reports]) for i in range(4)),  # type: ignore[arg-type]
        runs_averaged=k,
        warnings=tuple(warnings),
    )


def format_report_row(name: str, report: MetricsReport) -> str:
    """One table row in the column order Accuracy, F1, Precision, Recall,
    ROC-AUC, PR-AUC (percent, two decimals)."""

    def fmt(v: float | None) -> str:
        return "n/a" if v is None else f"{v:.2f}"

    cells = [
        fmt(report.accuracy),
        fmt(report.f1),
        fmt(report.precision),
        fmt(report.recall),
        fmt(report.roc_auc),
        fmt(report.pr_auc),
    ]
    return f"{name:<18} " + " ".join(f"{c:>8}" for c in cells)


REPORT_HEADER = (
    f"{'system':<18} " + " ".join(
        f"{c:>8}" for c in ("Acc", "F1", "Prec", "Rec", "ROC-AUC", "PR-AUC")
    )
)
