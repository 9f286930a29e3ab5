"""Figure rendering for the reporting commands.

Renders straight to image files (headless backend) next to the delimited
output; nothing here opens a window.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .gaps import QosCurve, _model_survival
from .isoqos import Ranking

__all__ = ["save_qos_figure", "save_energy_figure"]


def save_qos_figure(curve: QosCurve, path) -> None:
    """Empirical survival staircase with the fitted model overlaid."""
    edges = np.arange(len(curve.survival)) * curve.bin_width
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.step(edges, curve.survival, where="post", label="empirical", color="tab:blue")
    if curve.fitted_lambda is not None:
        fitted = _model_survival(curve.fitted_lambda, len(curve.survival))
        ax.plot(edges, fitted, "--", label=f"Poisson fit (lambda={curve.fitted_lambda:.3g})",
                color="tab:orange")
    ax.set_xlabel("time budget (s)")
    ax.set_ylabel("fraction of gaps at least this long")
    ax.set_ylim(0.0, 1.05)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_energy_figure(ranking: Ranking, path) -> None:
    """Session energy per feasible platform, in ranking order."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    if ranking.ranked:
        labels = [e.platform.label for e in ranking.ranked]
        values = [e.energy_kj for e in ranking.ranked]
        bars = ax.bar(range(len(values)), values, color="tab:green")
        ax.bar_label(bars, fmt="%.2f")
        ax.set_xticks(range(len(labels)))
        ax.set_xticklabels(labels, rotation=20, ha="right")
    else:
        ax.text(0.5, 0.5, "no feasible platform", ha="center", va="center",
                transform=ax.transAxes)
    ax.set_ylabel("session energy (KJ)")
    ax.set_title(f"QoS {ranking.y:g}% within {ranking.g:g} s, {ranking.n_opt} options")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
