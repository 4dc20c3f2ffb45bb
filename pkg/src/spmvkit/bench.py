"""Measurement harness: repeat SpMV until the confidence interval tightens.

A benchmark run converts once (outside the timed region), performs untimed
warmup repetitions, then times repetitions until the Student-t confidence
interval of the mean is narrower than ``ci_gap`` of the mean at confidence
``ci_level``, or ``max_reps`` is reached. Zero sample variance therefore
stops at ``min_reps``. Setting ``fixed_reps`` bypasses the stopping rule and
times exactly that many repetitions (it may lie outside the min/max bounds).

The clock is injectable for deterministic tests: a callable returning
seconds, invoked exactly twice per timed repetition (start, end).

Reported bandwidth uses transparent per-format byte models (8-byte values,
4-byte indices/offsets, 1-byte flags) counting the format's stored arrays
including padding, plus one read of x and one write of y:

* CSR:  12*nnz + 4*(n_rows+1) + 8*n_cols + 8*n_rows
* CSR5: 12*nnz + 4*(n_rows+1) + 4*(num_tiles+1) + nnz + 8*omega*num_tiles
        + 8*n_cols + 8*n_rows
* ELL:  12*n_rows*k + 8*n_cols + 8*n_rows
* SELL: 12*sum(slice_rows*width) + 4*n_slices + (4*n_rows when sorted)
        + 8*n_cols + 8*n_rows
* HYB:  12*n_rows*K + 16*tail_nnz + 8*n_cols + 8*n_rows
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import stats

from .coo import CooMatrix, read_matrix_market
from .formats import (
    ConversionError,
    Csr5Matrix,
    CsrMatrix,
    EllMatrix,
    FormatMatrix,
    FormatTag,
    HybMatrix,
    SellMatrix,
    convert,
)
from .kernels import spmv

__all__ = [
    "BenchConfig",
    "BenchRecord",
    "bandwidth_estimate",
    "bench_corpus",
    "best_labels",
    "read_records",
    "run_bench",
    "times_by_matrix",
    "write_records",
]

log = logging.getLogger(__name__)

RECORD_FIELDS = (
    "matrix_id",
    "format",
    "reps",
    "mean_time_s",
    "ci_low_s",
    "ci_high_s",
    "gflops",
    "bandwidth_bps",
    "converted_ok",
)


@dataclass
class BenchConfig:
    min_reps: int = 5
    max_reps: int = 1000
    ci_level: float = 0.95
    ci_gap: float = 0.05
    workers: int = 1
    warmup_reps: int = 2
    csr5_omega: int = 4
    csr5_sigma: int = 16
    sell_c: int = 4
    sell_sigma: int = 0
    fixed_reps: int | None = None
    max_grid_cells: int = 1 << 26

    def __post_init__(self) -> None:
        if self.min_reps < 2:
            raise ValueError(f"min_reps must be >= 2, got {self.min_reps}")
        if self.max_reps < self.min_reps:
            raise ValueError(
                f"max_reps {self.max_reps} below min_reps {self.min_reps}"
            )
        if self.ci_gap <= 0:
            raise ValueError(f"ci_gap must be positive, got {self.ci_gap}")
        if not 0 < self.ci_level < 1:
            raise ValueError(f"ci_level must be in (0, 1), got {self.ci_level}")
        if self.fixed_reps is not None and self.fixed_reps < 1:
            raise ValueError(f"fixed_reps must be >= 1, got {self.fixed_reps}")


@dataclass
class BenchRecord:
    """One (matrix, format) measurement; timing fields are NaN when conversion failed."""

    matrix_id: str
    format: FormatTag
    reps: int
    mean_time_s: float
    ci_low_s: float
    ci_high_s: float
    gflops: float
    bandwidth_bps: float
    converted_ok: bool


@lru_cache(maxsize=None)
def _t_critical(level: float, dof: int) -> float:
    return float(stats.t.ppf((1.0 + level) / 2.0, dof))


def _t_interval(samples: list[float], level: float) -> tuple[float, float, float]:
    n = len(samples)
    mean = float(np.mean(samples))
    if n < 2:
        return mean, mean, mean
    sd = float(np.std(samples, ddof=1))
    half = _t_critical(level, n - 1) * sd / math.sqrt(n)
    return mean, mean - half, mean + half


def bandwidth_estimate(tag: FormatTag, m: FormatMatrix, seconds: float) -> float:
    """Bytes per second under the documented per-format byte model."""
    if seconds <= 0:
        raise ValueError(f"time must be positive, got {seconds}")
    vec = 8 * m.n_cols + 8 * m.n_rows
    tag = FormatTag(tag)
    if tag is FormatTag.CSR:
        assert isinstance(m, CsrMatrix)
        total = 12 * m.nnz + 4 * (m.n_rows + 1) + vec
    elif tag is FormatTag.CSR5:
        assert isinstance(m, Csr5Matrix)
        total = (
            12 * m.nnz
            + 4 * (m.n_rows + 1)
            + 4 * (m.num_tiles + 1)
            + m.nnz
            + 8 * m.omega * m.num_tiles
            + vec
        )
    elif tag is FormatTag.ELL:
        assert isinstance(m, EllMatrix)
        total = 12 * m.n_rows * m.k + vec
    elif tag is FormatTag.SELL:
        assert isinstance(m, SellMatrix)
        cells = sum(g.shape[0] * g.shape[1] for g in m.data)
        total = 12 * cells + 4 * m.n_slices + vec
        if m.sigma > 0:
            total += 4 * m.n_rows
    else:
        assert isinstance(m, HybMatrix)
        total = 12 * m.n_rows * m.k + 16 * m.coo_tail.nnz + vec
    return total / seconds


def _failed_record(matrix_id: str, tag: FormatTag) -> BenchRecord:
    nan = float("nan")
    return BenchRecord(matrix_id, tag, 0, nan, nan, nan, nan, nan, False)


def run_bench(
    a: CooMatrix,
    tag: FormatTag,
    cfg: BenchConfig,
    matrix_id: str = "",
    clock=None,
    timer_resolution: float | None = None,
) -> BenchRecord:
    """Benchmark one format on one matrix; x is the all-ones vector.

    Conversion failures are recorded (``converted_ok`` false), not raised.
    A mean below 100x the timer granularity is flagged with a warning.
    """
    tag = FormatTag(tag)
    if clock is None:
        clock = time.perf_counter
        if timer_resolution is None:
            timer_resolution = time.get_clock_info("perf_counter").resolution
    try:
        m = convert(
            tag,
            a,
            omega=cfg.csr5_omega,
            sigma=cfg.csr5_sigma,
            sell_c=cfg.sell_c,
            sell_sigma=cfg.sell_sigma,
            max_cells=cfg.max_grid_cells,
        )
    except ConversionError as exc:
        log.warning("conversion of %s to %s failed: %s", matrix_id, tag.value, exc)
        return _failed_record(matrix_id, tag)

    x = np.ones(a.n_cols, dtype=np.float64)
    for _ in range(cfg.warmup_reps):
        spmv(tag, m, x, cfg.workers)

    samples: list[float] = []
    while True:
        start = clock()
        spmv(tag, m, x, cfg.workers)
        samples.append(clock() - start)
        n = len(samples)
        if cfg.fixed_reps is not None:
            if n >= cfg.fixed_reps:
                break
            continue
        if n >= cfg.min_reps:
            mean, lo, hi = _t_interval(samples, cfg.ci_level)
            if hi - lo < cfg.ci_gap * mean:
                break
        if n >= cfg.max_reps:
            break

    mean, lo, hi = _t_interval(samples, cfg.ci_level)
    if timer_resolution is not None and mean < 100.0 * timer_resolution:
        log.warning(
            "mean time %.3e s for %s/%s is below 100x the timer resolution "
            "%.1e s; treat the measurement as unreliable",
            mean,
            matrix_id,
            tag.value,
            timer_resolution,
        )
    denom = mean * 1e9
    gflops = (2.0 * a.nnz) / denom if denom > 0 else float("inf")
    return BenchRecord(
        matrix_id=matrix_id,
        format=tag,
        reps=len(samples),
        mean_time_s=mean,
        ci_low_s=lo,
        ci_high_s=hi,
        gflops=gflops,
        bandwidth_bps=bandwidth_estimate(tag, m, mean) if mean > 0 else float("inf"),
        converted_ok=True,
    )


def best_labels(records: list[BenchRecord]) -> dict[str, FormatTag]:
    """Fastest converted format per matrix; ties go to declaration order."""
    by_matrix: dict[str, dict[FormatTag, float]] = {}
    for rec in records:
        if rec.converted_ok and math.isfinite(rec.mean_time_s):
            by_matrix.setdefault(rec.matrix_id, {})[rec.format] = rec.mean_time_s
    labels: dict[str, FormatTag] = {}
    for matrix_id, times in by_matrix.items():
        best = None
        best_time = math.inf
        for tag in FormatTag:
            t = times.get(tag)
            if t is not None and t < best_time:
                best, best_time = tag, t
        if best is not None:
            labels[matrix_id] = best
    return labels


def times_by_matrix(records: list[BenchRecord]) -> dict[str, dict[FormatTag, float]]:
    out: dict[str, dict[FormatTag, float]] = {}
    for rec in records:
        if rec.converted_ok and math.isfinite(rec.mean_time_s):
            out.setdefault(rec.matrix_id, {})[rec.format] = rec.mean_time_s
    return out


def discover_corpus(corpus_dir) -> list[tuple[str, Path]]:
    """(matrix_id, path) pairs for every *.mtx under the directory, sorted."""
    root = Path(corpus_dir)
    paths = sorted(root.rglob("*.mtx"), key=lambda p: p.as_posix())
    return [(p.relative_to(root).with_suffix("").as_posix(), p) for p in paths]


def bench_corpus(
    corpus_dir,
    cfg: BenchConfig,
    formats: list[FormatTag] | None = None,
    clock_factory=None,
) -> tuple[list[BenchRecord], dict[str, FormatTag], list[str]]:
    """Benchmark every matrix in a directory against every requested format.

    Returns (records, best-format labels, diagnostics for skipped files).
    ``clock_factory(matrix_id, tag, matrix)`` may supply a deterministic
    clock per measurement; matrices are always benchmarked one at a time.
    """
    tags = [FormatTag(f) for f in formats] if formats else list(FormatTag)
    records: list[BenchRecord] = []
    skipped: list[str] = []
    for matrix_id, path in discover_corpus(corpus_dir):
        try:
            a = read_matrix_market(path)
        except (OSError, ValueError) as exc:
            message = f"skipping {path}: {exc}"
            log.warning("%s", message)
            skipped.append(message)
            continue
        for tag in tags:
            clock = clock_factory(matrix_id, tag, a) if clock_factory else None
            records.append(run_bench(a, tag, cfg, matrix_id, clock=clock))
    return records, best_labels(records), skipped


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, FormatTag):
        return value.value
    if isinstance(value, float):
        return repr(value)
    return str(value)


def record_to_line(rec: BenchRecord) -> str:
    return " ".join(
        f"{name}:{_format_value(getattr(rec, name))}" for name in RECORD_FIELDS
    )


def record_from_line(line: str) -> BenchRecord:
    fields = {}
    for token in line.split():
        key, _, value = token.partition(":")
        fields[key] = value
    try:
        return BenchRecord(
            matrix_id=fields["matrix_id"],
            format=FormatTag(fields["format"]),
            reps=int(fields["reps"]),
            mean_time_s=float(fields["mean_time_s"]),
            ci_low_s=float(fields["ci_low_s"]),
            ci_high_s=float(fields["ci_high_s"]),
            gflops=float(fields["gflops"]),
            bandwidth_bps=float(fields["bandwidth_bps"]),
            converted_ok=fields["converted_ok"] == "true",
        )
    except (KeyError, ValueError) as exc:
        raise ValueError(f"bad record line {line!r}: {exc}") from None


def write_records(records: list[BenchRecord], dest) -> None:
    text = "".join(record_to_line(rec) + "\n" for rec in records)
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        Path(dest).write_text(text)


def read_records(source) -> list[BenchRecord]:
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = Path(source).read_text()
    return [record_from_line(line) for line in text.splitlines() if line.strip()]
