"""Render report aggregates as figures next to the delimited output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .report import FormatShare, FormatSlowdown

__all__ = ["render_report_figures"]


def render_report_figures(
    share_rows: list[FormatShare],
    slow_rows: list[FormatSlowdown],
    out_dir,
    stem: str = "report",
) -> list[Path]:
    """Write the win-share and slowdown bar charts as PNGs; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    names = [row.format.value for row in share_rows]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.bar(names, [100.0 * row.share for row in share_rows], color="#4878d0")
    ax.set_ylabel("best on (% of matrices)")
    ax.set_title("Best-format distribution")
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    path = out_dir / f"{stem}_wins.png"
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(5, 3.2))
    values = [row.geomean for row in slow_rows]
    ax.bar([row.format.value for row in slow_rows], values, color="#d65f5f")
    ax.axhline(1.0, color="black", linewidth=0.8, linestyle="--")
    ax.set_ylabel("geomean slowdown vs best (x)")
    ax.set_title("Cost of fixing a single format")
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    path = out_dir / f"{stem}_slowdowns.png"
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    written.append(path)
    return written
