"""Per-class and aggregate classification metrics plus confusion matrices."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np


@dataclass
class ClassScores:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class EvalReport:
    classes: list[str]
    per_class: dict[str, ClassScores]
    micro_f1: float
    macro_f1: float
    median_f1: float
    confusion: np.ndarray
    normalized_confusion: np.ndarray

    def as_dict(self) -> dict:
        return {
            "micro_f1": self.micro_f1,
            "macro_f1": self.macro_f1,
            "median_f1": self.median_f1,
            "classes": self.classes,
            "per_class": {
                name: {
                    "precision": s.precision,
                    "recall": s.recall,
                    "f1": s.f1,
                    "support": s.support,
                }
                for name, s in self.per_class.items()
            },
        }


def score_predictions(
    truths: list[str], predictions: list[str], classes: list[str]
) -> EvalReport:
    """Standard single-label multiclass scoring.

    micro-F1 comes from globally pooled counts (it equals accuracy here);
    macro and median are taken over classes with nonzero support. Zero-support
    classes keep all-zero rows in the normalized confusion matrix.
    """
    if len(truths) != len(predictions):
        raise ValueError(f"{len(truths)} truths vs {len(predictions)} predictions")
    if not truths:
        raise ValueError("nothing to score")
    index = {name: k for k, name in enumerate(classes)}
    if len(index) != len(classes):
        raise ValueError("duplicate class names")
    k = len(classes)
    confusion = np.zeros((k, k), dtype=np.int64)
    for truth, pred in zip(truths, predictions):
        if truth not in index:
            raise ValueError(f"unknown truth label {truth!r}")
        if pred not in index:
            raise ValueError(f"unknown predicted label {pred!r}")
        confusion[index[truth], index[pred]] += 1

    supports = confusion.sum(axis=1)
    predicted = confusion.sum(axis=0)
    tp = np.diag(confusion)
    per_class: dict[str, ClassScores] = {}
    f1_with_support = []
    for c, name in enumerate(classes):
        precision = tp[c] / predicted[c] if predicted[c] else 0.0
        recall = tp[c] / supports[c] if supports[c] else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[name] = ClassScores(
            precision=float(precision),
            recall=float(recall),
            f1=float(f1),
            support=int(supports[c]),
        )
        if supports[c]:
            f1_with_support.append(f1)
    micro = tp.sum() / confusion.sum()
    normalized = np.zeros((k, k), dtype=np.float64)
    nonzero = supports > 0
    normalized[nonzero] = confusion[nonzero] / supports[nonzero, None]
    return EvalReport(
        classes=list(classes),
        per_class=per_class,
        micro_f1=float(micro),
        macro_f1=float(np.mean(f1_with_support)) if f1_with_support else 0.0,
        median_f1=float(np.median(f1_with_support)) if f1_with_support else 0.0,
        confusion=confusion,
        normalized_confusion=normalized,
    )


def confusion_submatrix(
    report: EvalReport, subset: list[str]
) -> tuple[list[str], np.ndarray]:
    """Project the row-normalized confusion matrix onto a class subset.

    Rows normalize over the FULL prediction space first, so each returned row
    is the subset slice of a true distribution; the mass predicted outside
    the subset lands in a trailing residual column. Column order is the
    subset followed by "<other>".
    """
    if not subset:
        raise ValueError("empty class subset")
    index = {name: k for k, name in enumerate(report.classes)}
    missing = [name for name in subset if name not in index]
    if missing:
        raise ValueError(f"classes not in the report: {missing}")
    rows = [index[name] for name in subset]
    full = report.normalized_confusion
    sub = full[np.ix_(rows, rows)]
    residual = full[rows].sum(axis=1) - sub.sum(axis=1)
    out = np.column_stack([sub, residual])
    return list(subset) + ["<other>"], out


def write_report_json(report: EvalReport, path: str, extra: dict | None = None) -> None:
    payload = report.as_dict()
    if extra:
        payload.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, indent=2)
        fh.write("\n")


def write_confusion_csv(report: EvalReport, path: str) -> None:
    """Integer confusion counts with class names as header row and column."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["true\\pred"] + report.classes)
        for c, name in enumerate(report.classes):
            writer.writerow([name] + report.confusion[c].tolist())
