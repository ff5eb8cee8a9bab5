"""Report rendering: aligned text tables, delimited files, and figures.

Every artifact-producing command writes its figures next to the delimited
output so a run directory is self-contained.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import METRIC_ORDER, ConfusionMatrix, MetricsReport
from .training import TrainLog

_METRIC_LABELS = {
    "accuracy": "Accuracy",
    "precision": "Precision",
    "recall": "Recall",
    "f1": "F1 Score",
    "csi": "CSI",
    "mcc": "MCC",
}


def format_metrics_table(report: MetricsReport, title: str = "Metric") -> str:
    """Aligned two-column table, one row per metric in the canonical order."""
    width = max(len(v) for v in _METRIC_LABELS.values())
    lines = [f"{title:<{width}}  Value   ({report.averaging} averaging)"]
    for name in METRIC_ORDER:
        lines.append(f"{_METRIC_LABELS[name]:<{width}}  {getattr(report, name):.4f}")
    return "\n".join(lines) + "\n"


def metrics_document(report: MetricsReport, cm: ConfusionMatrix) -> dict:
    """Machine-readable key-value form of a metrics report."""
    return {
        "averaging": report.averaging,
        "metrics": {name: getattr(report, name) for name in METRIC_ORDER},
        "per_class": [
            {
                "label": s.label,
                "precision": s.precision,
                "recall": s.recall,
                "f1": s.f1,
                "csi": s.csi,
            }
            for s in report.per_class
        ],
        "confusion_matrix": cm.counts.tolist(),
    }


def write_metrics(
    report: MetricsReport, cm: ConfusionMatrix, out_dir: str | Path, class_names: Sequence[str]
) -> None:
    """Write metrics.txt / metrics.json / confusion_matrix.csv plus a heatmap."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "metrics.txt").write_text(format_metrics_table(report))
    with open(out_dir / "metrics.json", "w") as fh:
        json.dump(metrics_document(report, cm), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out_dir / "confusion_matrix.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["true\\predicted"] + list(class_names))
        for k, row in enumerate(cm.counts):
            writer.writerow([class_names[k]] + [int(v) for v in row])
    render_confusion_heatmap(cm, class_names, out_dir / "confusion_matrix.png")


def write_train_log_csv(log: TrainLog, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "train_acc", "val_loss", "val_acc", "lr"])
        for r in log.records:
            writer.writerow(
                [r.epoch, repr(r.train_loss), repr(r.train_acc), repr(r.val_loss),
                 repr(r.val_acc), repr(r.learning_rate)]
            )


def render_training_curves(log: TrainLog, path: str | Path) -> None:
    """Loss and accuracy curves over epochs, best epoch marked."""
    epochs = [r.epoch for r in log.records]
    fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(10, 4))
    ax_loss.plot(epochs, [r.train_loss for r in log.records], label="train")
    ax_loss.plot(epochs, [r.val_loss for r in log.records], label="val")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("focal loss")
    ax_loss.legend()
    ax_acc.plot(epochs, [r.train_acc for r in log.records], label="train")
    ax_acc.plot(epochs, [r.val_acc for r in log.records], label="val")
    ax_acc.axvline(log.best_epoch, color="gray", linestyle=":", label="best epoch")
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("accuracy")
    ax_acc.set_ylim(0.0, 1.05)
    ax_acc.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_confusion_heatmap(
    cm: ConfusionMatrix, class_names: Sequence[str], path: str | Path
) -> None:
    counts = cm.counts
    fig, ax = plt.subplots(figsize=(1.2 * len(class_names) + 2.5,) * 2)
    image = ax.imshow(counts, cmap="Blues")
    ax.set_xticks(range(len(class_names)), class_names)
    ax.set_yticks(range(len(class_names)), class_names)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    threshold = counts.max() / 2 if counts.max() else 0.5
    for i in range(counts.shape[0]):
        for j in range(counts.shape[1]):
            color = "white" if counts[i, j] > threshold else "black"
            ax.text(j, i, str(int(counts[i, j])), ha="center", va="center", color=color)
    fig.colorbar(image, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def format_bench_report(result: dict) -> str:
    """Key-value text rendering of a benchmark result."""
    lines = [
        f"parameter_count: {result['parameter_count']}",
        f"memory_mb (32-bit storage): {result['memory_mb']:.1f}",
        f"ensemble_memory_mb (x{result['ensemble_size']}): {result['ensemble_memory_mb']:.1f}",
        f"input_length: {result['input_length']}",
        f"latency_ms (median of {result['repetitions']}): {result['latency_seconds'] * 1e3:.2f}",
        f"throughput_per_second: {result['throughput_per_second']:.1f}",
        f"hardware: {result['hardware']}",
    ]
    return "\n".join(lines) + "\n"
