"""Static matrix features and min-max scaling for the format selector.

Eight structure-only features describe a matrix: its shape, the stored
fraction of nonzeros, and the min/max/mean/population-standard-deviation of
nonzeros per row, plus ``variation``, the coefficient of variation of the
per-row counts (std divided by mean, 0 for an all-empty matrix). Values of
the nonzeros never influence the features.

Scaling maps each feature to [0, 1] using extremes recorded from a training
set; a degenerate feature (min == max) maps to 0 and out-of-range deployment
values are clamped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coo import CooMatrix, row_nnz_histogram

__all__ = [
    "FEATURE_NAMES",
    "FeatureVector",
    "ScalingParams",
    "apply_scaling",
    "extract_features",
    "fit_scaling",
    "read_features",
    "write_features",
]

FEATURE_NAMES = (
    "n_rows",
    "n_cols",
    "nnz_frac",
    "nnz_min",
    "nnz_max",
    "nnz_avg",
    "nnz_std",
    "variation",
)


@dataclass
class FeatureVector:
    n_rows: int
    n_cols: int
    nnz_frac: float
    nnz_min: int
    nnz_max: int
    nnz_avg: float
    nnz_std: float
    variation: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [float(getattr(self, name)) for name in FEATURE_NAMES],
            dtype=np.float64,
        )


@dataclass
class ScalingParams:
    mins: np.ndarray
    maxs: np.ndarray


def extract_features(a: CooMatrix) -> FeatureVector:
    if a.n_rows == 0 or a.n_cols == 0:
        raise ValueError(f"features are undefined for a {a.n_rows}x{a.n_cols} matrix")
    counts = row_nnz_histogram(a)
    avg = float(counts.mean())
    std = float(counts.std())  # population standard deviation
    return FeatureVector(
        n_rows=a.n_rows,
        n_cols=a.n_cols,
        nnz_frac=a.nnz / (a.n_rows * a.n_cols),
        nnz_min=int(counts.min()),
        nnz_max=int(counts.max()),
        nnz_avg=avg,
        nnz_std=std,
        variation=std / avg if avg > 0 else 0.0,
    )


def fit_scaling(features: list[FeatureVector]) -> ScalingParams:
    """Componentwise extremes over a nonempty feature list."""
    if not features:
        raise ValueError("cannot fit scaling parameters on an empty list")
    table = np.stack([f.as_array() for f in features])
    return ScalingParams(mins=table.min(axis=0), maxs=table.max(axis=0))


def apply_scaling(f: FeatureVector, params: ScalingParams) -> np.ndarray:
    """Scale to [0, 1]^8; degenerate features map to 0, outliers clamp."""
    raw = f.as_array()
    span = params.maxs - params.mins
    scaled = np.zeros_like(raw)
    ok = span > 0
    scaled[ok] = (raw[ok] - params.mins[ok]) / span[ok]
    return np.clip(scaled, 0.0, 1.0)


def features_to_line(matrix_id: str, f: FeatureVector) -> str:
    tokens = [f"matrix_id:{matrix_id}"]
    for name in FEATURE_NAMES:
        value = getattr(f, name)
        tokens.append(f"{name}:{value if isinstance(value, int) else repr(value)}")
    return " ".join(tokens)


def features_from_line(line: str) -> tuple[str, FeatureVector]:
    fields = {}
    for token in line.split():
        key, _, value = token.partition(":")
        fields[key] = value
    try:
        return fields["matrix_id"], FeatureVector(
            n_rows=int(fields["n_rows"]),
            n_cols=int(fields["n_cols"]),
            nnz_frac=float(fields["nnz_frac"]),
            nnz_min=int(fields["nnz_min"]),
            nnz_max=int(fields["nnz_max"]),
            nnz_avg=float(fields["nnz_avg"]),
            nnz_std=float(fields["nnz_std"]),
            variation=float(fields["variation"]),
        )
    except (KeyError, ValueError) as exc:
        raise ValueError(f"bad feature line {line!r}: {exc}") from None


def write_features(entries: list[tuple[str, FeatureVector]], dest) -> None:
    from pathlib import Path

    text = "".join(features_to_line(mid, f) + "\n" for mid, f in entries)
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        Path(dest).write_text(text)


def read_features(source) -> list[tuple[str, FeatureVector]]:
    from pathlib import Path

    if hasattr(source, "read"):
        text = source.read()
    else:
        text = Path(source).read_text()
    return [features_from_line(line) for line in text.splitlines() if line.strip()]
