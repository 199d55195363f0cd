"""Learning-curve figures written next to the CSV/JSON campaign outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from scipy import stats  # noqa: E402

FIG_SIZE = (6.4, 4.0)
STYLE = {
    "axes.labelsize": 11,
    "font.size": 10,
    "legend.fontsize": 9,
    "xtick.labelsize": 9,
    "ytick.labelsize": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def mean_band(curves, level: float = 0.95):
    """Per-episode mean and Student-t band across runs (band is ``None`` for one run)."""
    arr = np.vstack([np.asarray(c, dtype=float) for c in curves])
    mean = arr.mean(axis=0)
    n = arr.shape[0]
    if n < 2:
        return mean, None
    half = stats.t.ppf(0.5 + level / 2, n - 1) * arr.std(axis=0, ddof=1) / np.sqrt(n)
    return mean, (mean - half, mean + half)


def learning_curve_figure(curves_by_label: dict, path, reference: float | None = None,
                          title: str | None = None) -> Path:
    """Plot mean return per episode with 95% bands, one line per campaign.

    ``reference`` draws a horizontal dashed line (e.g. the heuristic's return).
    """
    path = Path(path)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=FIG_SIZE)
        for label, curves in curves_by_label.items():
            mean, band = mean_band(curves)
            ep = np.arange(1, mean.size + 1)
            (line,) = ax.plot(ep, mean, lw=1.2, label=f"{label} (n={len(curves)})")
            if band is not None:
                ax.fill_between(ep, band[0], band[1], color=line.get_color(), alpha=0.25, lw=0)
        if reference is not None:
            ax.axhline(reference, color="0.4", ls="--", lw=1, label="heuristic")
        ax.set_xlabel("episode")
        ax.set_ylabel("return")
        ax.set_ylim(0, 205)
        if title:
            ax.set_title(title)
        ax.legend(frameon=False, loc="lower right")
        fig.tight_layout()
        fig.savefig(path, dpi=120)
        plt.close(fig)
    return path
