"""Canonical coordinate-format matrices and Matrix Market ingestion.

The COO form used everywhere in this package is *canonical*: entries sorted
lexicographically by (row, col), duplicate coordinates summed, explicit zeros
dropped, values held as float64 and indices as int64. Dense vectors are plain
float64 numpy arrays (length n_cols on input, n_rows on output).

Matrix Market support covers the ``coordinate`` layout with real, integer and
pattern fields and general or symmetric storage. Symmetric input is expanded
to full storage on read by mirroring off-diagonal entries. The writer always
emits ``coordinate real general`` with 17 significant digits, which
round-trips float64 exactly.

All objects are treated as immutable after construction and are safe to share
across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "INDEX_LIMIT",
    "CooMatrix",
    "MatrixMarketError",
    "canonicalize",
    "coo_equal",
    "dense_spmv_oracle",
    "read_matrix_market",
    "row_nnz_histogram",
    "write_matrix_market",
]

# Index arrays use int64 storage but the toolkit guarantees only 32-bit range.
INDEX_LIMIT = 2**32 - 1


class MatrixMarketError(ValueError):
    """Malformed Matrix Market input; the message names the offending line."""


@dataclass
class CooMatrix:
    """A canonical sparse matrix as (row, col, value) triplets.

    Invariants: ``row``/``col``/``data`` have equal length, entries are sorted
    by (row, col) with no duplicate coordinates and no stored zeros, and all
    indices lie inside the declared shape.
    """

    n_rows: int
    n_cols: int
    row: np.ndarray
    col: np.ndarray
    data: np.ndarray

    @property
    def nnz(self) -> int:
        return int(self.data.shape[0])


def coo_equal(a: CooMatrix, b: CooMatrix) -> bool:
    """Exact equality: same shape, same coordinates, bit-identical values."""
    return (
        a.n_rows == b.n_rows
        and a.n_cols == b.n_cols
        and a.nnz == b.nnz
        and np.array_equal(a.row, b.row)
        and np.array_equal(a.col, b.col)
        and a.data.tobytes() == b.data.tobytes()
    )


def _check_shape(n_rows: int, n_cols: int) -> None:
    if n_rows < 0 or n_cols < 0:
        raise ValueError(f"negative matrix shape {n_rows}x{n_cols}")
    if n_rows > INDEX_LIMIT or n_cols > INDEX_LIMIT:
        raise ValueError(
            f"matrix shape {n_rows}x{n_cols} exceeds the 32-bit index range"
        )


def canonicalize(row, col, data, n_rows: int, n_cols: int) -> CooMatrix:
    """Build a canonical :class:`CooMatrix` from unsorted triplet arrays.

    Entries are sorted by (row, col), duplicate coordinates are summed in
    their sorted (stable) order, and coordinates whose summed value is zero
    are dropped. Idempotent on already-canonical input.
    """
    _check_shape(n_rows, n_cols)
    row = np.asarray(row, dtype=np.int64).ravel()
    col = np.asarray(col, dtype=np.int64).ravel()
    data = np.asarray(data, dtype=np.float64).ravel()
    if not (row.shape == col.shape == data.shape):
        raise ValueError(
            f"triplet arrays disagree in length: {row.shape[0]}, "
            f"{col.shape[0]}, {data.shape[0]}"
        )
    nnz = row.shape[0]
    if nnz > INDEX_LIMIT:
        raise ValueError(f"nnz {nnz} exceeds the 32-bit index range")
    if nnz == 0:
        empty_i = np.empty(0, dtype=np.int64)
        return CooMatrix(n_rows, n_cols, empty_i, empty_i.copy(), np.empty(0))
    if row.min() < 0 or row.max() >= n_rows or col.min() < 0 or col.max() >= n_cols:
        bad = np.flatnonzero(
            (row < 0) | (row >= n_rows) | (col < 0) | (col >= n_cols)
        )[0]
        raise ValueError(
            f"entry {bad} at ({row[bad]}, {col[bad]}) is outside "
            f"{n_rows}x{n_cols}"
        )

    order = np.lexsort((col, row))
    r, c, v = row[order], col[order], data[order]
    fresh = np.empty(nnz, dtype=bool)
    fresh[0] = True
    np.logical_or(r[1:] != r[:-1], c[1:] != c[:-1], out=fresh[1:])
    starts = np.flatnonzero(fresh)
    sums = np.add.reduceat(v, starts)
    keep = sums != 0.0
    return CooMatrix(n_rows, n_cols, r[starts][keep], c[starts][keep], sums[keep])


def dense_spmv_oracle(a: CooMatrix, x) -> np.ndarray:
    """Reference y = A @ x, accumulated entry by entry in ascending triplet order.

    This sequential accumulation order is the correctness contract every
    storage-format kernel is checked against.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != a.n_cols:
        raise ValueError(f"x has length {x.shape[0]}, expected {a.n_cols}")
    y = [0.0] * a.n_rows
    xs = x.tolist()
    for i, j, v in zip(a.row.tolist(), a.col.tolist(), a.data.tolist()):
        y[i] += v * xs[j]
    return np.array(y, dtype=np.float64)


def row_nnz_histogram(a: CooMatrix) -> np.ndarray:
    """Number of stored nonzeros in each row; sums to nnz."""
    return np.bincount(a.row, minlength=a.n_rows).astype(np.int64)


def _read_text(source) -> str:
    if hasattr(source, "read"):
        raw = source.read()
        return raw.decode("utf-8") if isinstance(raw, bytes) else raw
    if isinstance(source, bytes):
        return source.decode("utf-8")
    return Path(source).read_text()


def read_matrix_market(source) -> CooMatrix:
    """Parse a Matrix Market coordinate file into a canonical :class:`CooMatrix`.

    ``source`` may be a path, a byte string, or a file-like object. Accepts
    real/integer/pattern fields with general or symmetric storage. 1-based
    indices become 0-based, symmetric storage is expanded, pattern entries get
    value 1.0, duplicates are summed and resulting zeros dropped.
    """
    lines = _read_text(source).splitlines()
    if not lines:
        raise MatrixMarketError("empty input (line 1)")

    banner = lines[0].split()
    if len(banner) != 5 or banner[0].lower() != "%%matrixmarket":
        raise MatrixMarketError(f"malformed header {lines[0]!r} (line 1)")
    obj, fmt, field, symmetry = (tok.lower() for tok in banner[1:])
    if obj != "matrix":
        raise MatrixMarketError(f"unsupported object {obj!r} (line 1)")
    if fmt != "coordinate":
        raise MatrixMarketError(
            f"unsupported format {fmt!r}, only coordinate is supported (line 1)"
        )
    if field == "complex":
        raise MatrixMarketError("complex matrices are not supported (line 1)")
    if field not in ("real", "integer", "pattern"):
        raise MatrixMarketError(f"unsupported field {field!r} (line 1)")
    if symmetry not in ("general", "symmetric"):
        raise MatrixMarketError(f"unsupported symmetry {symmetry!r} (line 1)")
    pattern = field == "pattern"
    symmetric = symmetry == "symmetric"

    # Size line: first non-comment, non-blank line after the banner.
    pos = 1
    size_line = None
    while pos < len(lines):
        stripped = lines[pos].strip()
        pos += 1
        if stripped and not stripped.startswith("%"):
            size_line = stripped
            break
    if size_line is None:
        raise MatrixMarketError(f"missing size line (line {len(lines)})")
    size_lineno = pos  # 1-based
    toks = size_line.split()
    try:
        if len(toks) != 3:
            raise ValueError
        n_rows, n_cols, declared = (int(t) for t in toks)
        if n_rows < 0 or n_cols < 0 or declared < 0:
            raise ValueError
    except ValueError:
        raise MatrixMarketError(
            f"malformed size line {size_line!r} (line {size_lineno})"
        ) from None
    if max(n_rows, n_cols, declared) > INDEX_LIMIT:
        raise MatrixMarketError(
            f"matrix exceeds the 32-bit index range (line {size_lineno})"
        )

    want = 2 if pattern else 3
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    count = 0
    for lineno in range(pos + 1, len(lines) + 1):
        stripped = lines[lineno - 1].strip()
        if not stripped or stripped.startswith("%"):
            continue
        if count == declared:
            raise MatrixMarketError(
                f"entry count mismatch: declared {declared}, found more "
                f"(line {lineno})"
            )
        toks = stripped.split()
        if len(toks) != want:
            raise MatrixMarketError(
                f"malformed entry {stripped!r}, expected {want} fields "
                f"(line {lineno})"
            )
        try:
            i = int(toks[0])
            j = int(toks[1])
            v = 1.0 if pattern else float(toks[2])
        except ValueError:
            raise MatrixMarketError(
                f"malformed entry {stripped!r} (line {lineno})"
            ) from None
        if not (1 <= i <= n_rows and 1 <= j <= n_cols):
            raise MatrixMarketError(
                f"index ({i}, {j}) out of declared bounds "
                f"{n_rows}x{n_cols} (line {lineno})"
            )
        rows.append(i - 1)
        cols.append(j - 1)
        vals.append(v)
        if symmetric and i != j:
            rows.append(j - 1)
            cols.append(i - 1)
            vals.append(v)
        count += 1
    if count != declared:
        raise MatrixMarketError(
            f"entry count mismatch: declared {declared}, found {count} "
            f"(line {len(lines)})"
        )
    return canonicalize(rows, cols, vals, n_rows, n_cols)


def write_matrix_market(a: CooMatrix, dest) -> None:
    """Write ``coordinate real general`` Matrix Market text (1-based, 17 digits)."""
    out = [
        "%%MatrixMarket matrix coordinate real general",
        f"{a.n_rows} {a.n_cols} {a.nnz}",
    ]
    for i, j, v in zip(a.row.tolist(), a.col.tolist(), a.data.tolist()):
        out.append(f"{i + 1} {j + 1} {v:.17g}")
    text = "\n".join(out) + "\n"
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        Path(dest).write_text(text)
