"""Matplotlib rendering of report tables to PNG files.

Kept separate from the aggregation code: `bench` produces plot-ready series,
this module turns them into figures on the report path. The Agg backend is
forced so rendering works headless, and nothing time-dependent is drawn, so
re-rendering identical inputs yields byte-identical files.
"""

from __future__ import annotations

import io
from pathlib import Path
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .bench import CorrelationResult, CurvePoint, DcnTable, ResultRecord
from .util import atomic_write_bytes


def _save(fig, path: Path) -> Path:
    buffer = io.BytesIO()
    fig.savefig(buffer, format="png", dpi=120, bbox_inches="tight")
    plt.close(fig)
    return atomic_write_bytes(path, buffer.getvalue())


def save_curve_figure(
    points: Sequence[CurvePoint],
    path: Path | str,
    *,
    title: str,
    ylabel: str = "Top-1 accuracy (%)",
    color: str = "tab:red",
) -> Path:
    """Mean accuracy vs class count, with a shaded +-std band."""
    xs = [p.n_cl for p in points]
    means = np.array([p.mean for p in points])
    stds = np.array([p.std for p in points])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(xs, means, marker="o", color=color)
    ax.fill_between(xs, means - stds, means + stds, color=color, alpha=0.2, linewidth=0)
    if xs and max(xs) / max(min(xs), 1) >= 10:
        ax.set_xscale("log")
        ax.set_xticks(xs)
        ax.get_xaxis().set_major_formatter(matplotlib.ticker.ScalarFormatter())
    ax.set_xlabel("number of classes")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    return _save(fig, Path(path))


def save_correlation_figure(
    xs: Sequence[float],
    ys: Sequence[float],
    result: CorrelationResult,
    path: Path | str,
    *,
    title: str | None = None,
) -> Path:
    """Scatter of the joined points with a least-squares line and the r value."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.scatter(x, y, s=28, color="tab:blue", marker="s", alpha=0.8)
    slope, intercept = np.polyfit(x, y, 1)
    grid = np.linspace(x.min(), x.max(), 50)
    ax.plot(grid, slope * grid + intercept, color="tab:blue", linestyle="--")
    ax.set_xlabel(result.x_label)
    ax.set_ylabel(result.y_label)
    ax.set_title(title or f"{result.y_label} vs {result.x_label} (r={result.r:.2f})")
    ax.grid(True, alpha=0.3)
    return _save(fig, Path(path))


def save_dcn_figure(
    records: Iterable[ResultRecord],
    dcn: DcnTable,
    path: Path | str,
    *,
    title: str = "Top-1 accuracy per dataset",
) -> Path:
    """Per-dataset scatter of every model's accuracy with the DCN marked."""
    by_dataset: dict[str, list[float]] = {}
    for record in records:
        by_dataset.setdefault(record.dataset, []).append(record.top1)
    datasets = sorted(by_dataset, key=lambda d: -max(by_dataset[d]))
    fig, ax = plt.subplots(figsize=(max(6, 0.9 * len(datasets)), 4))
    for i, dataset in enumerate(datasets):
        values = by_dataset[dataset]
        ax.scatter([i] * len(values), values, s=18, color="tab:gray", alpha=0.7)
        best = max(values)
        ax.scatter([i], [best], s=60, color="tab:red", marker="D", zorder=3)
    ax.set_xticks(range(len(datasets)))
    ax.set_xticklabels(datasets, rotation=45, ha="right")
    ax.set_ylabel("Top-1 accuracy (%)")
    ax.set_title(title)
    ax.grid(True, axis="y", alpha=0.3)
    return _save(fig, Path(path))
