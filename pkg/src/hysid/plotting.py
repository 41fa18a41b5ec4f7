"""Figure rendering for reports: free-run trajectories and sweep summaries.

Uses the Agg backend so rendering works headless, and avoids any
time-dependent figure content so reruns produce identical files.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_DPI = 100


def save_trajectory_figure(path, times, true_values, predicted, *, ylabel="h", title=""):
    """True vs. free-run predicted trajectory on one axis, saved as PNG."""
    fig, ax = plt.subplots(figsize=(8, 4), dpi=_DPI)
    ax.plot(times, true_values, label="measured", linewidth=1.2)
    ax.plot(times, predicted, label="predicted", linewidth=1.2, linestyle="--")
    ax.set_xlabel("time [s]")
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend(loc="best")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_sweep_figure(path, points, *, xlabel, title="", logx=False, logy=True):
    """RMSE over the sweep variable; one line per point label (if labeled)."""
    fig, ax = plt.subplots(figsize=(6, 4), dpi=_DPI)
    labels = []
    for p in points:
        if p.label not in labels:
            labels.append(p.label)
    for label in labels:
        xs = [p.sweep_value for p in points if p.label == label]
        ys = [p.rmse for p in points if p.label == label]
        ys = [y if np.isfinite(y) else np.nan for y in ys]
        ax.plot(xs, ys, marker="o", label=label or "rmse")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("free-run RMSE (scaled)")
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    if title:
        ax.set_title(title)
    if len(labels) > 1 or labels[0:1] != [""]:
        ax.legend(loc="best")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
