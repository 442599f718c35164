"""SVG rendering of post-selection curves."""

from __future__ import annotations

from collections.abc import Sequence
from pathlib import Path

import numpy as np
from matplotlib.figure import Figure

from .harness import CurvePoint, per_round_ler


def write_curve_svg(
    points: Sequence[CurvePoint],
    path: Path,
    rounds: int = 1,
    title: str | None = None,
) -> Path:
    """Plot per-round LER against post-selection rate.

    The Wilson band is converted to per-round rates with ``rounds``. Points
    with a zero error rate cannot be shown on the log axis and are skipped;
    the dashed line marks the ``T = 0`` rate.

    Raises:
        ValueError: If ``points`` is empty
    """
    if not points:
        raise ValueError("Cannot plot an empty curve")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    x = np.array([p.ps_rate for p in points])
    y = np.array([p.ler_per_round for p in points])
    low = np.array([per_round_ler(p.ci_low, rounds) for p in points])
    high = np.array([per_round_ler(p.ci_high, rounds) for p in points])
    shown = y > 0

    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot()
    if shown.any():
        ax.fill_between(
            x[shown],
            np.maximum(low[shown], y[shown].min() / 10),
            high[shown],
            alpha=0.25,
            linewidth=0,
            label="95% Wilson interval",
        )
        ax.plot(x[shown], y[shown], marker="o", markersize=3, label="forced gap")
        ax.set_yscale("log")
    zero = [p for p in points if p.threshold == 0.0]
    if zero and zero[0].ler_per_round > 0:
        ax.axhline(zero[0].ler_per_round, linestyle="--", color="gray", label="no post-selection")
    ax.set_xlabel("post-selection rate")
    ax.set_ylabel("logical error rate per round")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    if ax.get_legend_handles_labels()[0]:
        ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    return path
