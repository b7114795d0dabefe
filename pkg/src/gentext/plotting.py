"""Matplotlib figures written next to the text/CSV reports."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .evaluation import EvalReport  # noqa: E402

FIGURE_DPI = 120
# keeps PNG bytes stable across matplotlib builds
_PNG_METADATA = {"Software": None}


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=FIGURE_DPI, metadata=_PNG_METADATA)
    plt.close(fig)
    return path


def plot_accuracy(runs: Sequence[tuple[str, EvalReport]], path: str | Path) -> Path:
    names = [name for name, _ in runs]
    acc = [rep.accuracy for _, rep in runs]
    fig, ax = plt.subplots(figsize=(max(4.0, 1.1 * len(runs) + 2), 3.5))
    bars = ax.bar(range(len(runs)), acc, color="#4c72b0")
    for bar, value in zip(bars, acc):
        ax.text(bar.get_x() + bar.get_width() / 2, value, f"{value:.5f}",
                ha="center", va="bottom", fontsize=8)
    ax.set_xticks(range(len(runs)))
    ax.set_xticklabels(names, rotation=30, ha="right")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("accuracy")
    return _save(fig, path)


def plot_confusion(report: EvalReport, path: str | Path, title: str = "") -> Path:
    names = report.space.names
    size = 2.5 + 0.45 * len(names)
    fig, ax = plt.subplots(figsize=(size, size))
    ax.imshow(report.confusion, cmap="Blues")
    ax.set_xticks(range(len(names)))
    ax.set_yticks(range(len(names)))
    ax.set_xticklabels(names, rotation=60, ha="right", fontsize=7)
    ax.set_yticklabels(names, fontsize=7)
    ax.set_xlabel("predicted")
    ax.set_ylabel("gold")
    peak = report.confusion.max(initial=0)
    for (i, j), v in np.ndenumerate(report.confusion):
        ax.text(j, i, str(v), ha="center", va="center", fontsize=7,
                color="white" if peak and v > peak / 2 else "black")
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_rank_histograms(
    histograms: Mapping[str, Sequence[float]], bin_labels: Sequence[str], path: str | Path
) -> Path:
    """Grouped bars of mean rank-bin fractions, one group per class."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    width = 0.8 / max(1, len(histograms))
    x = np.arange(len(bin_labels))
    for i, (name, fractions) in enumerate(histograms.items()):
        ax.bar(x + i * width, fractions, width, label=name)
    ax.set_xticks(x + width * (len(histograms) - 1) / 2)
    ax.set_xticklabels(bin_labels)
    ax.set_ylabel("share of tokens")
    ax.set_xlabel("rank of the true next token")
    ax.legend(fontsize=8)
    return _save(fig, path)
