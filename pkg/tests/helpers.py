"""Shared test machinery: random matrices, fake clocks, a synthetic cost model."""

from __future__ import annotations

import itertools
import math
import statistics

import numpy as np
from scipy import stats

from spmvkit import CooMatrix, FormatTag, canonicalize
from spmvkit.features import FeatureVector, extract_features


def random_coo(
    rng: np.random.Generator,
    n_rows: int | None = None,
    n_cols: int | None = None,
    density: float | None = None,
    max_dim: int = 256,
) -> CooMatrix:
    """A random canonical matrix; low densities leave rows/columns empty."""
    if n_rows is None:
        n_rows = int(rng.integers(1, max_dim + 1))
    if n_cols is None:
        n_cols = int(rng.integers(1, max_dim + 1))
    if density is None:
        density = float(rng.uniform(0.001, 0.2))
    nnz = min(n_rows * n_cols, max(0, round(density * n_rows * n_cols)))
    flat = rng.choice(n_rows * n_cols, size=nnz, replace=False)
    vals = rng.uniform(0.1, 3.0, size=nnz) * rng.choice([-1.0, 1.0], size=nnz)
    return canonicalize(flat // n_cols, flat % n_cols, vals, n_rows, n_cols)


def coo_with_dense_row(rng: np.random.Generator, n: int = 64) -> CooMatrix:
    base = random_coo(rng, n, n, 0.02)
    dense_row = int(rng.integers(0, n))
    rows = np.concatenate([base.row, np.full(n, dense_row)])
    cols = np.concatenate([base.col, np.arange(n)])
    vals = np.concatenate([base.data, rng.uniform(0.1, 1.0, size=n)])
    return canonicalize(rows, cols, vals, n, n)


def coo_with_empty_band(rng: np.random.Generator, n: int = 80) -> CooMatrix:
    """Rows n//3 .. 2n//3 are empty; several leading columns are empty too."""
    base = random_coo(rng, n, n, 0.05)
    keep = (base.row < n // 3) | (base.row >= 2 * n // 3)
    keep &= base.col >= 4
    return canonicalize(base.row[keep], base.col[keep], base.data[keep], n, n)


class DurationClock:
    """Each (start, end) call pair measures the next duration in the cycle.

    The start call returns 0.0 and the end call returns the duration itself,
    so measured samples are bit-exact (the harness only ever differences the
    two calls of one repetition).
    """

    def __init__(self, durations):
        self.durations = itertools.cycle(durations)
        self.in_rep = False

    def __call__(self) -> float:
        self.in_rep = not self.in_rep
        return 0.0 if self.in_rep else next(self.durations)


class ManualClock(DurationClock):
    """Every repetition measures exactly ``step``: true zero variance."""

    def __init__(self, step: float):
        super().__init__([step])
        self.step = step


def simulate_stopping_rule(
    durations,
    min_reps: int,
    max_reps: int,
    ci_level: float,
    ci_gap: float,
) -> int:
    """Independent replay of the confidence-interval stopping rule.

    Uses the statistics module (exact rational mean/stdev) rather than numpy
    so the check does not share arithmetic with the harness.
    """
    samples: list[float] = []
    for d in itertools.cycle(durations):
        samples.append(d)
        n = len(samples)
        if n >= min_reps:
            mean = statistics.fmean(samples)
            sd = statistics.stdev(samples)
            half = float(stats.t.ppf((1.0 + ci_level) / 2.0, n - 1)) * sd / math.sqrt(n)
            if 2.0 * half < ci_gap * mean:
                return n
        if n >= max_reps:
            return n
    raise AssertionError("unreachable")


# ---------------------------------------------------------------------------
# Synthetic end-to-end corpus: per-format runtimes follow a deterministic
# cost model over the static features, so format labels are learnable and a
# known ground truth exists for every matrix.
#
# Model (time in seconds, nnz-proportional base):
#     pad  = n_rows * nnz_max / nnz          (padded-grid blowup, >= 1)
#     cv   = variation, capped at 2
#     csr  : 0.95 + 0.30 * cv                (row imbalance hurts)
#     csr5 : 1.12 + 0.02 * cv                (tiling immune, constant overhead)
#     ell  : 0.55 * pad                      (unbeatable when rows are uniform)
#     sell : 0.80 + 0.16 * cv + 0.02 * min(pad, 6)
#     hyb  : 0.92 + 0.22 * cv / (1 + spike)  (spike = nnz_max / nnz_avg)
# ---------------------------------------------------------------------------

COST_BASE = 1e-9  # seconds per nonzero, arbitrary scale


def cost_model(f: FeatureVector, tag: FormatTag) -> float:
    nnz = f.nnz_frac * f.n_rows * f.n_cols
    pad = f.n_rows * f.nnz_max / max(nnz, 1.0)
    cv = min(f.variation, 2.0)
    spike = f.nnz_max / max(f.nnz_avg, 1e-9)
    factors = {
        FormatTag.CSR: 0.95 + 0.30 * cv,
        FormatTag.CSR5: 1.12 + 0.02 * cv,
        FormatTag.ELL: 0.55 * pad,
        FormatTag.SELL: 0.80 + 0.16 * cv + 0.02 * min(pad, 6.0),
        FormatTag.HYB: 0.92 + 0.22 * cv / (1.0 + spike),
    }
    return COST_BASE * max(nnz, 1.0) * factors[tag]


def _uniform_rows(rng, n, k):
    rows = np.repeat(np.arange(n), k)
    cols = np.concatenate([rng.choice(n, size=k, replace=False) for _ in range(n)])
    vals = rng.uniform(0.1, 2.0, size=rows.size)
    return canonicalize(rows, cols, vals, n, n)


def _powerlaw_rows(rng, n, kmax):
    counts = np.minimum(
        np.maximum(rng.pareto(1.2, size=n).astype(np.int64), 1), min(kmax, n)
    )
    rows = np.repeat(np.arange(n), counts)
    cols = np.concatenate([rng.choice(n, size=c, replace=False) for c in counts])
    vals = rng.uniform(0.1, 2.0, size=rows.size)
    return canonicalize(rows, cols, vals, n, n)


def _spiky_rows(rng, n, k, n_heavy):
    counts = np.full(n, k, dtype=np.int64)
    heavy = rng.choice(n, size=n_heavy, replace=False)
    counts[heavy] = rng.integers(n // 2, n, size=n_heavy)
    rows = np.repeat(np.arange(n), counts)
    cols = np.concatenate([rng.choice(n, size=c, replace=False) for c in counts])
    vals = rng.uniform(0.1, 2.0, size=rows.size)
    return canonicalize(rows, cols, vals, n, n)


def _jittered_rows(rng, n, k, jitter):
    counts = np.maximum(1, k + rng.integers(-jitter, jitter + 1, size=n))
    counts = np.minimum(counts, n)
    rows = np.repeat(np.arange(n), counts)
    cols = np.concatenate([rng.choice(n, size=c, replace=False) for c in counts])
    vals = rng.uniform(0.1, 2.0, size=rows.size)
    return canonicalize(rows, cols, vals, n, n)


def make_cost_corpus(seed: int, count: int) -> list[tuple[str, CooMatrix]]:
    """Synthetic matrices spanning the feature regions of the cost model."""
    rng = np.random.default_rng(seed)
    corpus = []
    for i in range(count):
        kind = i % 4
        n = int(rng.integers(24, 97))
        if kind == 0:
            a = _uniform_rows(rng, n, int(rng.integers(2, 9)))
        elif kind == 1:
            a = _jittered_rows(rng, n, int(rng.integers(4, 10)), 3)
        elif kind == 2:
            a = _powerlaw_rows(rng, n, n // 2)
        else:
            a = _spiky_rows(rng, n, int(rng.integers(2, 5)), int(rng.integers(1, 4)))
        corpus.append((f"syn{i:04d}", a))
    return corpus


def cost_clock_factory(matrix_id: str, tag: FormatTag, a: CooMatrix) -> ManualClock:
    return ManualClock(cost_model(extract_features(a), tag))
