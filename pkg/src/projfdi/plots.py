"""Report figures: residual-vs-threshold traces and margin histograms.

Rendered on demand by the report path (opt-in); files land next to the
delimited output with the same stem.  CSV remains the primary data
interface; these figures are a convenience view of the same numbers.
"""
from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .thresholds import ThresholdReport

__all__ = ["render_report_figures"]


def _stem(path: str) -> str:
    base, _ = os.path.splitext(path)
    return base


def render_report_figures(report, path: str) -> list[str]:
    """Write PNG figures for a DetectionReport next to its data file."""
    stem = _stem(path)
    written = []
    trials = report.per_trial
    if not trials:
        return written
    if isinstance(trials[0], ThresholdReport):
        J = np.array([t.J for t in trials])
        J_th = np.array([t.J_th for t in trials])
        idx = np.arange(len(trials))

        fig, ax = plt.subplots(figsize=(7.0, 3.8))
        ax.plot(idx, J, ".", color="#1f77b4", label="residual J")
        ax.plot(idx, J_th, "-", color="#d62728", lw=1.2, label="threshold J_th")
        ax.set_xlabel("trial")
        ax.set_ylabel("norm")
        ax.set_title(f"{report.scenario['scheme']}: residual vs threshold")
        ax.legend(loc="best", fontsize=8)
        fig.tight_layout()
        f1 = f"{stem}_residuals.png"
        fig.savefig(f1, dpi=130)
        plt.close(fig)
        written.append(f1)

        fig, ax = plt.subplots(figsize=(5.0, 3.8))
        margins = J_th - J
        ax.hist(margins, bins=min(30, max(5, len(trials) // 10)),
                color="#1f77b4", alpha=0.85)
        ax.axvline(0.0, color="#d62728", lw=1.2)
        ax.set_xlabel("threshold margin J_th - J")
        ax.set_ylabel("count")
        ax.set_title("margin distribution (left of red = alarm)")
        fig.tight_layout()
        f2 = f"{stem}_margins.png"
        fig.savefig(f2, dpi=130)
        plt.close(fig)
        written.append(f2)
    else:
        decisions = {}
        for t in trials:
            key = t.decision if t.decision != "single" else f"single:{t.labels[0]}"
            decisions[key] = decisions.get(key, 0) + 1
        fig, ax = plt.subplots(figsize=(5.0, 3.8))
        keys = sorted(decisions)
        ax.bar(range(len(keys)), [decisions[k] for k in keys], color="#1f77b4")
        ax.set_xticks(range(len(keys)))
        ax.set_xticklabels(keys, rotation=20, ha="right", fontsize=8)
        ax.set_ylabel("trials")
        ax.set_title("classification outcomes")
        fig.tight_layout()
        f1 = f"{stem}_decisions.png"
        fig.savefig(f1, dpi=130)
        plt.close(fig)
        written.append(f1)
    return written
