"""Figure rendering for experiment outputs.

CSV stays the data contract; these helpers render companion PNGs next to
the delimited output.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .experiments import CurveTable


def plot_curves(table: CurveTable, path, xlabel: str = "x",
                ylabel: str = "reward", title: str | None = None) -> None:
    """One errorbar line per curve label."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label in table.labels():
        rows = sorted((r for r in table.rows if r.label == label),
                      key=lambda r: r.x)
        xs = [r.x for r in rows]
        ys = [r.mean for r in rows]
        es = [r.stderr for r in rows]
        if label == "t_start":
            ax.axvline(xs[0], linestyle=":", color="gray", label="t_start")
            continue
        style = {"linestyle": "--"} if label == "reward_lower_bound" else {}
        ax.errorbar(xs, ys, yerr=es, label=label, capsize=2, **style)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_matrix(entries: np.ndarray, path) -> None:
    """Black/white/gray rendering of a signed ratings matrix:
    +1 black, -1 white, 0 gray."""
    img = np.full(entries.shape, 0.5)
    img[entries == 1] = 0.0
    img[entries == -1] = 1.0
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.imshow(img, cmap="gray", vmin=0.0, vmax=1.0, aspect="auto",
              interpolation="nearest")
    ax.set_xlabel("items")
    ax.set_ylabel("users")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
