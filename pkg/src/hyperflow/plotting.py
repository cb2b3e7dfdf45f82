"""Report figures written next to the delimited outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 120,
    "figure.figsize": (5.0, 3.4),
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def moving_average(values, window: int = 10) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if len(values) < window:
        return values.copy()
    return np.convolve(values, np.ones(window) / window, mode="valid")


def plot_loss(history: list[dict], path, window: int = 10):
    epochs = [r["epoch"] for r in history]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(epochs, [r["loss"] for r in history], lw=0.8, alpha=0.4, label="loss")
        ma = moving_average([r["loss"] for r in history], window)
        ax.plot(epochs[len(epochs) - len(ma):], ma, lw=1.6, label=f"{window}-epoch mean")
        ax.plot(epochs, [r["pos_term"] for r in history], lw=0.8, ls="--", label="positive")
        ax.plot(epochs, [r["neg_term"] for r in history], lw=0.8, ls=":", label="negative")
        ax.set_yscale("symlog", linthresh=1.0)
        ax.set_xlabel("epoch")
        ax.set_ylabel("loss")
        ax.legend(frameon=False, fontsize=8)
        _save(fig, path)


def plot_group_entropy(initial: dict, updated: dict, path):
    groups = sorted(updated)
    x = np.arange(len(groups))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        if initial:
            ax.bar(x - 0.2, [initial[k] for k in groups], width=0.4, label="Initial")
        ax.bar(x + 0.2 if initial else x, [updated[k] for k in groups], width=0.4,
               label="Updated")
        ax.set_xticks(x, [f"G{k}" for k in groups])
        ax.set_ylabel("group entropy")
        ax.legend(frameon=False)
        _save(fig, path)


def plot_evolving(evolving: dict[int, list[dict]], path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for k, rows in sorted(evolving.items()):
            stages = [r["stage"] for r in rows]
            ratios = [r["ratio"] for r in rows]
            ax.plot(stages, ratios, lw=0.8)
            ax.scatter(stages, ratios, s=[12 + 6 * r["count"] for r in rows], alpha=0.5,
                       label=f"G{k}")
        ax.set_xlabel("epoch")
        ax.set_ylabel("significant ratio")
        ax.set_ylim(-0.05, 1.05)
        ax.legend(frameon=False, fontsize=8)
        _save(fig, path)
