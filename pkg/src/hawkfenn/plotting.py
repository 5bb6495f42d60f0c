"""SVG figures for convergence traces and hyperparameter searches."""
from __future__ import annotations

import os
import tempfile
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

FLOOR = 1e-300  # log axes cannot show exact zeros

# deterministic SVG output: no embedded date, fixed element ids
matplotlib.rcParams["svg.hashsalt"] = "hawkfenn"
matplotlib.rcParams["svg.fonttype"] = "none"


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".svg.tmp")
    os.close(fd)
    try:
        fig.savefig(tmp, format="svg", metadata={"Date": None})
        os.replace(tmp, path)
    finally:
        plt.close(fig)
        if os.path.exists(tmp):
            os.unlink(tmp)
    return path


def convergence_plot(traces: dict, path, title: str = "", optimum: float | None = None) -> Path:
    """Median best-so-far curve per algorithm on a log axis.

    ``traces[label]`` is a list of equal-length traces (one per seed).  With
    a known ``optimum`` the gap ``f - optimum`` is plotted.
    """
    fig, ax = plt.subplots(figsize=(6, 4))
    for label in sorted(traces):
        runs = np.asarray(traces[label], dtype=float)
        med = np.median(runs, axis=0)
        y = med - optimum if optimum is not None else med
        ax.plot(np.arange(1, y.size + 1), np.maximum(np.abs(y), FLOOR), label=label, linewidth=1.2)
    ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("best fitness" + (" - optimum" if optimum is not None else " (abs)"))
    ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(True, which="major", alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def hpo_trace_plot(trace, path, title: str = "hyperparameter search") -> Path:
    """Every evaluated fitness plus the running best, in evaluation order."""
    f = np.array([row[-1] for row in trace], dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(np.arange(f.size), f, ".", alpha=0.5, label="evaluation")
    ax.plot(np.arange(f.size), np.minimum.accumulate(f), "-", label="best so far")
    ax.set_yscale("log")
    ax.set_xlabel("evaluation")
    ax.set_ylabel("validation loss")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)
