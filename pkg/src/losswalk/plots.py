"""Scatter plots of loss-gradient clouds as self-contained vector graphics.

Rendering is headless (Agg) and deterministic: the SVG id hash salt is
pinned and no timestamps are embedded, so a fixed input produces a fixed
file.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.colors import LogNorm, Normalize

from .exceptions import UsageError

matplotlib.rcParams["svg.hashsalt"] = "losswalk"

# fixed colours per curvature class so legends are stable across runs
CLASS_COLOURS = {
    "convex": "#1f77b4",
    "saddle": "#ff7f0e",
    "concave": "#d62728",
    "singular": "#2ca02c",
    "none": "#7f7f7f",
}
CLASS_ORDER = ("convex", "concave", "saddle", "singular", "none")


@dataclass(frozen=True)
class PlotInfo:
    path: Path
    points: int
    legend: tuple


def colour_normaliser(values, log_scale: bool):
    """Monotone mapping of colour values onto [0, 1] for the colour map."""
    lo, hi = float(min(values)), float(max(values))
    if log_scale:
        if lo <= 0.0:
            raise UsageError("log colour scale needs strictly positive values")
        if lo == hi:
            hi = lo * (1.0 + 1e-9)
        return LogNorm(vmin=lo, vmax=hi)
    if lo == hi:
        hi = lo + 1e-9
    return Normalize(vmin=lo, vmax=hi)


def emit_scatter_plot(
    records,
    path,
    colour_by: str = "curvature",
    max_loss: float | None = None,
    log_colour: bool = False,
    title: str | None = None,
) -> PlotInfo:
    """Scatter training loss (x) against gradient magnitude (y).

    Points are coloured by curvature class or by the test loss ``e_g`` (on
    a linear or logarithmic scale).  ``max_loss`` keeps only records with
    ``e_t`` at most that value; filtering to an empty set is an error that
    names the filter.
    """
    records = list(records)
    if max_loss is not None:
        records = [r for r in records if r.e_t <= max_loss]
        if not records:
            raise UsageError(f"no records left after the filter e_t <= {max_loss}")
    if not records:
        raise UsageError("no records to plot")
    if colour_by not in ("curvature", "e_g"):
        raise UsageError(f"colour_by must be 'curvature' or 'e_g', got {colour_by!r}")

    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    legend = ()
    if colour_by == "curvature":
        groups = {}
        for r in records:
            groups.setdefault(r.curvature, []).append(r)
        present = [c for c in CLASS_ORDER if c in groups]
        for cls in present:
            xs = [r.e_t for r in groups[cls]]
            ys = [r.grad_mag for r in groups[cls]]
            ax.scatter(xs, ys, s=6, color=CLASS_COLOURS[cls], label=cls, linewidths=0)
        ax.legend(loc="best", title="curvature")
        legend = tuple(present)
    else:
        missing = [r for r in records if r.e_g is None]
        if missing:
            raise UsageError("colour_by='e_g' needs test losses on every record")
        values = [r.e_g for r in records]
        norm = colour_normaliser(values, log_colour)
        sc = ax.scatter(
            [r.e_t for r in records], [r.grad_mag for r in records],
            s=6, c=values, cmap="viridis", norm=norm, linewidths=0,
        )
        fig.colorbar(sc, ax=ax, label="e_g")

    ax.set_xlabel("training loss")
    ax.set_ylabel("gradient magnitude")
    if title:
        ax.set_title(title)
    path = Path(path)
    fig.savefig(path, format=path.suffix.lstrip(".") or "svg", metadata={"Date": None})
    plt.close(fig)
    return PlotInfo(path=path, points=len(records), legend=legend)
