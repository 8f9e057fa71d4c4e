"""Figure rendering for the report paths: every delimited artifact the CLI
writes gets a companion PNG so results can be eyeballed without a notebook."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import EvalReport
from .train import EpochLog


def save_confusion_heatmap(report: EvalReport, path: str, max_classes: int = 40) -> str:
    """Row-normalized confusion heatmap. Reports with more classes than
    ``max_classes`` are cropped to the highest-support ones to stay legible."""
    classes = report.classes
    matrix = report.normalized_confusion
    if len(classes) > max_classes:
        supports = report.confusion.sum(axis=1)
        keep = np.argsort(-supports)[:max_classes]
        keep.sort()
        matrix = matrix[np.ix_(keep, keep)]
        classes = [classes[i] for i in keep]
    size = max(4.0, 0.3 * len(classes))
    fig, ax = plt.subplots(figsize=(size + 1.5, size))
    im = ax.imshow(matrix, cmap="Blues", vmin=0.0, vmax=1.0)
    ax.set_xticks(range(len(classes)), classes, rotation=90, fontsize=7)
    ax.set_yticks(range(len(classes)), classes, fontsize=7)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_title("Normalized confusion matrix")
    fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_f1_bars(report: EvalReport, path: str) -> str:
    """Per-class F1 bars, descending, with support on a twin axis."""
    scored = [(name, s.f1, s.support) for name, s in report.per_class.items() if s.support]
    scored.sort(key=lambda item: -item[1])
    names = [s[0] for s in scored]
    f1s = [s[1] for s in scored]
    supports = [s[2] for s in scored]
    fig, ax = plt.subplots(figsize=(max(5.0, 0.35 * len(names)), 4.5))
    ax.bar(range(len(names)), f1s, color="#C44E52")
    ax.set_xticks(range(len(names)), names, rotation=90, fontsize=7)
    ax.set_ylabel("F1")
    ax.set_ylim(0.0, 1.05)
    ax2 = ax.twinx()
    ax2.plot(range(len(names)), supports, color="#4C72B0", marker="o", markersize=3)
    ax2.set_ylabel("support", color="#4C72B0")
    ax2.set_yscale("log")
    ax.set_title(f"Per-class F1 (micro={report.micro_f1:.3f}, median={report.median_f1:.3f})")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_training_curves(logs: list[EpochLog], path: str) -> str:
    epochs = [log.epoch for log in logs]
    fig, ax = plt.subplots(figsize=(6.5, 4.0))
    ax.plot(epochs, [log.mean_loss for log in logs], color="#C44E52", marker="o", label="train loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean cross-entropy", color="#C44E52")
    ax2 = ax.twinx()
    ax2.plot(
        epochs,
        [log.test_micro_f1 for log in logs],
        color="#4C72B0",
        marker="s",
        label="test micro-F1",
    )
    ax2.set_ylabel("test micro-F1", color="#4C72B0")
    ax2.set_ylim(0.0, 1.05)
    ax.set_title("Training progress")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_label_distribution(counts: dict[str, int], path: str, title: str) -> str:
    """Label histogram on a log axis, largest class first."""
    items = sorted(counts.items(), key=lambda item: -item[1])
    names = [i[0] for i in items]
    values = [i[1] for i in items]
    fig, ax = plt.subplots(figsize=(max(5.0, 0.35 * len(names)), 4.0))
    ax.bar(range(len(names)), values, color="#4C72B0")
    ax.set_yscale("log")
    ax.set_xticks(range(len(names)), names, rotation=90, fontsize=7)
    ax.set_ylabel("documents")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
