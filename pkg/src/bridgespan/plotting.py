"""Figures written next to the CSV reports (Agg backend, PNG files)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from bridgespan.cost_model import (  # noqa: E402
    MaterialCostParams,
    economic_span_closed_form,
    unit_area_cost,
)
from bridgespan.dqn_agent import TrainMetrics  # noqa: E402

# no timestamps or version strings, so repeated runs give identical bytes
_PNG_METADATA = {"Software": None}

plt.rcParams.update(
    {
        "font.size": 9,
        "axes.labelsize": 9,
        "legend.fontsize": 8,
        "axes.spines.top": False,
        "axes.spines.right": False,
    }
)


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=120, metadata=_PNG_METADATA)
    plt.close(fig)
    return path


def plot_cost_curves(materials: Sequence[MaterialCostParams], path: str | Path,
                     spans: np.ndarray | None = None) -> Path:
    """Unit-area cost against span with each material's economic span marked."""
    if spans is None:
        spans = np.linspace(10, 200, 400)
    fig, ax = plt.subplots(figsize=(5.5, 3.4))
    for p in materials:
        line, = ax.plot(spans, [unit_area_cost(p, x) for x in spans], label=p.name)
        opt = economic_span_closed_form(p)
        ax.plot(opt.span_star, opt.unit_cost_star, "o", color=line.get_color())
        ax.annotate(f"{opt.span_star:.1f} m", (opt.span_star, opt.unit_cost_star),
                    textcoords="offset points", xytext=(4, -12))
    ax.set_xlabel("span (m)")
    ax.set_ylabel("cost (yuan/m$^2$)")
    ax.legend(frameon=False)
    fig.tight_layout()
    return _save(fig, path)


def plot_loss_curve(metrics: TrainMetrics, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(5.5, 3.4))
    losses = np.asarray(metrics.mean_loss, dtype=float)
    episodes = np.asarray(metrics.episode)
    mask = ~np.isnan(losses)
    ax.semilogy(episodes[mask], losses[mask], lw=1)
    ax.set_xlabel("episode")
    ax.set_ylabel("mean MSE loss")
    fig.tight_layout()
    return _save(fig, path)


def plot_trajectories(images: Sequence[np.ndarray], labels: Sequence[str], path: str | Path) -> Path:
    """Stack rendered trajectory images into one figure."""
    rows = max(len(images), 1)
    fig, axes = plt.subplots(rows, 1, figsize=(8, 0.55 * rows + 0.3), squeeze=False)
    for ax, image, label in zip(axes[:, 0], images, labels):
        ax.imshow(image, interpolation="nearest", aspect="auto")
        ax.set_xticks([])
        ax.set_yticks([])
        ax.set_ylabel(label, rotation=0, ha="right", va="center")
    fig.tight_layout()
    return _save(fig, path)
