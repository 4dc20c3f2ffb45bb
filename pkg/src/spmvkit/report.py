"""Aggregate benchmark records: best-format wins and fixed-format slowdowns.

The slowdown of fixing one format is the geometric mean, over the matrices
where that format converted, of its runtime divided by the per-matrix best
runtime; 1.0x means the fixed format always matched the best choice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .bench import BenchRecord, best_labels, times_by_matrix
from .formats import FormatTag

__all__ = ["FormatShare", "FormatSlowdown", "format_report", "slowdowns", "wins"]


@dataclass
class FormatShare:
    format: FormatTag
    wins: int
    share: float


@dataclass
class FormatSlowdown:
    format: FormatTag
    geomean: float
    n_matrices: int


def wins(records: list[BenchRecord]) -> list[FormatShare]:
    """Per-format win counts over all matrices with at least one measurement."""
    labels = best_labels(records)
    total = len(labels)
    counts = {tag: 0 for tag in FormatTag}
    for tag in labels.values():
        counts[tag] += 1
    return [
        FormatShare(tag, counts[tag], counts[tag] / total if total else 0.0)
        for tag in FormatTag
    ]


def slowdowns(records: list[BenchRecord]) -> list[FormatSlowdown]:
    times = times_by_matrix(records)
    out = []
    for tag in FormatTag:
        ratios = []
        for per_format in times.values():
            t = per_format.get(tag)
            if t is not None:
                ratios.append(t / min(per_format.values()))
        if ratios:
            geo = math.exp(sum(math.log(r) for r in ratios) / len(ratios))
        else:
            geo = float("nan")
        out.append(FormatSlowdown(tag, geo, len(ratios)))
    return out


def format_report(records: list[BenchRecord]) -> tuple[str, str]:
    """(machine-readable lines, human-readable table) for a record set."""
    share_rows = wins(records)
    slow_rows = slowdowns(records)
    lines = []
    for row in share_rows:
        lines.append(
            f"report kind:wins format:{row.format.value} wins:{row.wins} "
            f"share:{row.share!r}"
        )
    for row in slow_rows:
        lines.append(
            f"report kind:slowdown format:{row.format.value} "
            f"geomean:{row.geomean!r} n:{row.n_matrices}"
        )
    table = ["format    wins   share   slowdown   matrices"]
    for share, slow in zip(share_rows, slow_rows):
        table.append(
            f"{share.format.value:<8} {share.wins:>5} {share.share:>7.1%} "
            f"{slow.geomean:>9.3f}x {slow.n_matrices:>8}"
        )
    return "\n".join(lines) + "\n", "\n".join(table)
