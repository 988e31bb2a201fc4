"""PNG figures for traces and sweeps, rendered off-screen."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .errors import IoFailure  # noqa: E402
from .harness import SimulationTrace  # noqa: E402


def _save(fig, path: Path) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, dpi=110)
    except OSError as exc:
        raise IoFailure(f"cannot write figure to {path}: {exc}") from exc
    finally:
        plt.close(fig)
    return path


def plot_trace(trace: SimulationTrace, path: str | Path) -> Path:
    """Outputs against references, plus inputs, one column per channel."""
    m_y, m_u = trace.y.shape[1], trace.u.shape[1]
    cols = max(m_y, m_u)
    fig, axes = plt.subplots(2, cols, figsize=(5 * cols, 6), squeeze=False, sharex=True)
    for i in range(m_y):
        ax = axes[0, i]
        ax.plot(trace.k, trace.y_star[:, i], "k--", lw=1, label=f"y*_{i + 1}")
        ax.plot(trace.k, trace.y[:, i], lw=1, label=f"y_{i + 1}")
        ax.legend(loc="upper right", fontsize=8)
    for j in range(m_u):
        axes[1, j].plot(trace.k, trace.u[:, j], lw=1, color="tab:green", label=f"u_{j + 1}")
        axes[1, j].legend(loc="upper right", fontsize=8)
        axes[1, j].set_xlabel("k")
    for ax in axes.flat:
        if not ax.has_data():
            ax.set_visible(False)
    fig.suptitle(f"{trace.config.plant_id}, lambda = {trace.config.lam:g}")
    fig.tight_layout()
    return _save(fig, Path(path))


def plot_sweep(traces: Sequence[SimulationTrace], path: str | Path, channel: int = 0) -> Path:
    """Tracking error of one output channel for every weight in a sweep."""
    fig, ax = plt.subplots(figsize=(8, 4))
    for trace in traces:
        ax.plot(trace.k, trace.e[:, channel], lw=1, label=f"lambda = {trace.config.lam:g}")
    ax.set_xlabel("k")
    ax.set_ylabel(f"e_{channel + 1}")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, Path(path))
