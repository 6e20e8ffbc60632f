"""Multiclass precision/recall/F plus graded metrics for the ordinal task.

Graded counting penalizes a miss by the ordinal gap: an exact match adds 1
true positive, an over-prediction adds (pred - true) false positives and an
under-prediction adds (true - pred) false negatives. Every 0/0 ratio is
defined as 0 so never-predicted classes cannot inflate scores.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import DataError

__all__ = [
    "confusion_matrix",
    "standard_prf",
    "PrfSummary",
    "GradedCounts",
    "graded_counts",
    "graded_prf",
    "EvalReport",
    "build_report",
    "format_report_table",
]


def _safe_div(num: float, den: float) -> float:
    return float(num / den) if den > 0 else 0.0


def confusion_matrix(
    y_true: Sequence, y_pred: Sequence, labels: Sequence
) -> np.ndarray:
    """Counts with rows = true label, columns = predicted label."""
    if len(y_true) != len(y_pred):
        raise DataError(f"length mismatch: {len(y_true)} true vs {len(y_pred)} predicted")
    if len(y_true) == 0:
        raise DataError("cannot evaluate an empty label sequence")
    index = {lab: i for i, lab in enumerate(labels)}
    cm = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        if t not in index:
            raise DataError(f"unknown true label {t!r}")
        if p not in index:
            raise DataError(f"unknown predicted label {p!r}")
        cm[index[t], index[p]] += 1
    return cm


@dataclass(frozen=True)
class PrfSummary:
    precision: tuple[float, ...]
    recall: tuple[float, ...]
    f_measure: tuple[float, ...]
    support: tuple[int, ...]
    weighted_precision: float
    weighted_recall: float
    weighted_f: float


def standard_prf(cm: np.ndarray) -> PrfSummary:
    """Per-class P/R/F from a confusion matrix plus support-weighted averages."""
    cm = np.asarray(cm)
    diag = np.diag(cm).astype(float)
    pred_totals = cm.sum(axis=0).astype(float)
    true_totals = cm.sum(axis=1).astype(float)
    precision = [_safe_div(diag[i], pred_totals[i]) for i in range(len(diag))]
    recall = [_safe_div(diag[i], true_totals[i]) for i in range(len(diag))]
    f_measure = [
        _safe_div(2 * p * r, p + r) for p, r in zip(precision, recall)
    ]
    n = float(true_totals.sum())
    weights = [float(t) / n for t in true_totals]
    return PrfSummary(
        precision=tuple(precision),
        recall=tuple(recall),
        f_measure=tuple(f_measure),
        support=tuple(int(t) for t in true_totals),
        weighted_precision=float(sum(w * p for w, p in zip(weights, precision))),
        weighted_recall=float(sum(w * r for w, r in zip(weights, recall))),
        weighted_f=float(sum(w * f for w, f in zip(weights, f_measure))),
    )


@dataclass(frozen=True)
class GradedCounts:
    tp: float
    fp: float
    fn: float


def graded_counts(y_true: Sequence[int], y_pred: Sequence[int]) -> GradedCounts:
    """Gap-weighted counts over ordinal encodings 0..3."""
    true = np.asarray(y_true, dtype=np.int64)
    pred = np.asarray(y_pred, dtype=np.int64)
    if true.shape != pred.shape:
        raise DataError(f"length mismatch: {true.shape} vs {pred.shape}")
    for arr, name in ((true, "true"), (pred, "predicted")):
        if arr.size and (arr.min() < 0 or arr.max() > 3):
            raise DataError(f"{name} labels must use the ordinal encoding 0..3")
    gap = pred - true
    return GradedCounts(
        tp=float(np.count_nonzero(gap == 0)),
        fp=float(gap[gap > 0].sum()),
        fn=float(-gap[gap < 0].sum()),
    )


def graded_prf(counts: GradedCounts) -> tuple[float, float, float]:
    precision = _safe_div(counts.tp, counts.tp + counts.fp)
    recall = _safe_div(counts.tp, counts.tp + counts.fn)
    f_measure = _safe_div(2 * precision * recall, precision + recall)
    return precision, recall, f_measure


@dataclass(frozen=True)
class EvalReport:
    """Everything one evaluation run produces, serializable as JSON."""

    labels: tuple[str, ...]
    confusion: tuple[tuple[int, ...], ...]
    per_class: Mapping[str, Mapping[str, float]]
    weighted: Mapping[str, float]
    graded: Optional[Mapping[str, float]]
    metadata: Mapping[str, object] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "confusion": [list(row) for row in self.confusion],
            "per_class": {k: dict(v) for k, v in self.per_class.items()},
            "weighted": dict(self.weighted),
            "graded": dict(self.graded) if self.graded is not None else None,
            "metadata": dict(self.metadata),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def build_report(
    y_true: Sequence[str],
    y_pred: Sequence[str],
    labels: Sequence[str],
    ordinal_encoding: Optional[Mapping[str, int]] = None,
    metadata: Optional[Mapping[str, object]] = None,
) -> EvalReport:
    """Assemble the standard metrics and, for ordinal tasks, the graded ones."""
    cm = confusion_matrix(y_true, y_pred, labels)
    summary = standard_prf(cm)
    per_class = {
        lab: {
            "precision": summary.precision[i],
            "recall": summary.recall[i],
            "f_measure": summary.f_measure[i],
            "support": summary.support[i],
        }
        for i, lab in enumerate(labels)
    }
    graded = None
    if ordinal_encoding is not None:
        gc = graded_counts(
            [ordinal_encoding[t] for t in y_true],
            [ordinal_encoding[p] for p in y_pred],
        )
        p, r, f = graded_prf(gc)
        graded = {
            "tp": gc.tp, "fp": gc.fp, "fn": gc.fn,
            "precision": p, "recall": r, "f_measure": f,
        }
    return EvalReport(
        labels=tuple(labels),
        confusion=tuple(tuple(int(v) for v in row) for row in cm),
        per_class=per_class,
        weighted={
            "precision": summary.weighted_precision,
            "recall": summary.weighted_recall,
            "f_measure": summary.weighted_f,
        },
        graded=graded,
        metadata=dict(metadata or {}),
    )


def format_report_table(reports: Sequence[EvalReport]) -> str:
    """Aligned text table, one row per (model, feature set) evaluation."""
    headers = ["Model", "Features", "SMOTE", "Precision", "Recall", "F-measure", "Graded F"]
    rows = []
    for rep in reports:
        meta = rep.metadata
        rows.append(
            [
                str(meta.get("model", "?")),
                str(meta.get("features", "?")),
                "on" if meta.get("smote") else "off",
                f"{rep.weighted['precision']:.4f}",
                f"{rep.weighted['recall']:.4f}",
                f"{rep.weighted['f_measure']:.4f}",
                f"{rep.graded['f_measure']:.4f}" if rep.graded else "-",
            ]
        )
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(headers)]
    def fmt(row):
        return "  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
    lines = [fmt(headers), fmt(["-" * w for w in widths])]
    lines.extend(fmt(r) for r in rows)
    return "\n".join(lines) + "\n"
