"""SVG figures for run reports. Rendering is headless and reproducible."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# fixed hash salt and no timestamp so the SVG bytes only depend on the data
matplotlib.rcParams["svg.hashsalt"] = "objmem"
_META = {"Date": None}


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)
    return path


def plot_fraction_curves(rows: Sequence[dict], path: str | Path) -> Path:
    """Success, size and retrieval time against the fraction of stream processed.

    ``rows`` need ``fraction``, ``success``, ``size_bytes`` and ``mean_retrieval_time``.
    """
    rows = sorted(rows, key=lambda r: r["fraction"])
    x = [r["fraction"] for r in rows]
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.2))
    axes[0].plot(x, [r["success"] for r in rows], marker="o")
    axes[0].set_ylabel("Success")
    axes[0].set_ylim(0, 105)
    axes[1].plot(x, [r["size_bytes"] / 1e6 for r in rows], marker="o", color="tab:orange")
    axes[1].set_ylabel("Memory size (MB)")
    axes[2].plot(x, [r["mean_retrieval_time"] * 1e3 for r in rows], marker="o", color="tab:green")
    axes[2].set_ylabel("Retrieval time (ms)")
    for ax in axes:
        ax.set_xlabel("Stream processed (%)")
        ax.set_xticks(x)
        ax.grid(alpha=0.3)
    return _save(fig, path)


def plot_sweep(agg: Sequence[dict], axis: str, path: str | Path) -> Path:
    """Mean success and size per swept value."""
    labels = [str(r["value"]) for r in agg]
    xs = list(range(len(agg)))
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    ax.plot(xs, [r["success"] for r in agg], marker="o", label="Success")
    ax.set_xticks(xs)
    ax.set_xticklabels(labels)
    ax.set_xlabel(axis)
    ax.set_ylabel("Success")
    ax.set_ylim(0, 105)
    ax.grid(alpha=0.3)
    ax2 = ax.twinx()
    ax2.plot(xs, [r["size_bytes"] / 1e6 for r in agg], marker="s", color="tab:orange", label="Size")
    ax2.set_ylabel("Memory size (MB)")
    return _save(fig, path)
