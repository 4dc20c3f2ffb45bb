"""Sparse storage formats: CSR, CSR5, ELL, SELL (plain and sorted), HYB.

Every format is constructed from a canonical :class:`~spmvkit.coo.CooMatrix`
and converts back losslessly via :func:`to_coo`. Grid-shaped formats (ELL,
SELL, the ELL part of HYB) pad short rows with value 0.0; the padded index
slot repeats the row's last valid column index (0 for an empty row) so a
gather through it stays in bounds. Recovering the COO form consults per-row
counts, never the pad marker.

CSR5 layout: nonzeros in CSR order are cut into tiles of ``omega * sigma``
entries. Within a tile the entries occupy a sigma-row by omega-column grid,
filled column by column (so a column holds sigma consecutive CSR-order
entries), while the stored arrays are laid out row-major over that grid. The
per-tile descriptor is

* ``tile_ptr[t]``: row containing the tile's first nonzero; the final slot
  holds ``n_rows``.
* ``bit_flag``: per stored entry, true when the entry starts a new row in CSR
  order; the first entry of every tile is forced true.
* ``y_off[t][j]``: number of true flags in grid columns before ``j``.
* ``seg_off[t][j]``: how many consecutive columns to the right of ``j`` have
  an unflagged top entry, i.e. how far column ``j``'s open segment spills.

A trailing partial tile keeps the same grid positions, storing only the
occupied cells in row-major scan order.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .coo import CooMatrix, canonicalize, row_nnz_histogram

__all__ = [
    "DEFAULT_MAX_GRID_CELLS",
    "ConversionError",
    "Csr5Matrix",
    "CsrMatrix",
    "EllMatrix",
    "FormatMatrix",
    "FormatTag",
    "HybMatrix",
    "SellMatrix",
    "convert",
    "hyb_typical_k",
    "to_coo",
    "to_csr",
    "to_csr5",
    "to_ell",
    "to_hyb",
    "to_sell",
]

# Padded grids refuse to allocate more than this many cells.
DEFAULT_MAX_GRID_CELLS = 1 << 26


class ConversionError(RuntimeError):
    """A format conversion could not be carried out (e.g. grid too large)."""


class FormatTag(str, Enum):
    """The benchmarked storage formats, in tie-breaking declaration order."""

    CSR = "csr"
    CSR5 = "csr5"
    ELL = "ell"
    SELL = "sell"
    HYB = "hyb"


@dataclass
class CsrMatrix:
    n_rows: int
    n_cols: int
    ptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray

    @property
    def nnz(self) -> int:
        return int(self.data.shape[0])


@dataclass
class Csr5Matrix:
    """CSR plus the tiled arrays and descriptor described in the module docstring."""

    n_rows: int
    n_cols: int
    ptr: np.ndarray
    omega: int
    sigma: int
    num_tiles: int
    tile_ptr: np.ndarray
    bit_flag: np.ndarray
    y_off: np.ndarray
    seg_off: np.ndarray
    indices: np.ndarray
    data: np.ndarray

    @property
    def nnz(self) -> int:
        return int(self.data.shape[0])


@dataclass
class EllMatrix:
    """Fixed-width padded rows; ``k`` is the widest row of the matrix."""

    n_rows: int
    n_cols: int
    k: int
    indices: np.ndarray
    data: np.ndarray
    row_nnz: np.ndarray

    @property
    def nnz(self) -> int:
        return int(self.row_nnz.sum())


@dataclass
class SellMatrix:
    """Sliced ELL: strips of ``c`` rows, each stored at its own width.

    ``perm[i]`` is the original row held at permuted position ``i``. Plain
    SELL uses ``sigma == 0`` and the identity permutation; the sorted variant
    stably orders each window of ``sigma`` original rows by descending row
    nnz. Slice grids (one data and one index array per slice, shaped rows by
    width) hold rows in permuted order and are stored column-major.
    """

    n_rows: int
    n_cols: int
    c: int
    sigma: int
    perm: np.ndarray
    widths: np.ndarray
    data: list[np.ndarray]
    indices: list[np.ndarray]
    row_nnz_perm: np.ndarray

    @property
    def n_slices(self) -> int:
        return int(self.widths.shape[0])

    @property
    def nnz(self) -> int:
        return int(self.row_nnz_perm.sum())


@dataclass
class HybMatrix:
    """ELL part of width K plus a canonical COO tail of overflow entries."""

    ell: EllMatrix
    coo_tail: CooMatrix

    @property
    def n_rows(self) -> int:
        return self.ell.n_rows

    @property
    def n_cols(self) -> int:
        return self.ell.n_cols

    @property
    def k(self) -> int:
        return self.ell.k

    @property
    def nnz(self) -> int:
        return self.ell.nnz + self.coo_tail.nnz


FormatMatrix = CsrMatrix | Csr5Matrix | EllMatrix | SellMatrix | HybMatrix


def to_csr(a: CooMatrix) -> CsrMatrix:
    """Compress canonical COO rows into a row-pointer array."""
    counts = np.bincount(a.row, minlength=a.n_rows)
    ptr = np.zeros(a.n_rows + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    return CsrMatrix(a.n_rows, a.n_cols, ptr, a.col.copy(), a.data.copy())


def _row_of_nonzero(ptr: np.ndarray, k) -> np.ndarray:
    # Row containing CSR-order nonzero k; empty rows are skipped naturally.
    return np.searchsorted(ptr, np.asarray(k), side="right") - 1


def to_csr5(a: CooMatrix, omega: int, sigma: int) -> Csr5Matrix:
    if omega < 1 or sigma < 1:
        raise ValueError(f"omega and sigma must be >= 1, got {omega}, {sigma}")
    csr = to_csr(a)
    nnz = a.nnz
    tile = omega * sigma
    num_tiles = -(-nnz // tile)

    k = np.arange(nnz, dtype=np.int64)
    p = k % tile
    gi = p % sigma
    gj = p // sigma
    # Stored order: tile, then grid row, then grid column.
    order = np.lexsort((gj, gi, k // tile))

    flags_csr = np.zeros(nnz, dtype=bool)
    row_counts = np.diff(csr.ptr)
    flags_csr[csr.ptr[:-1][row_counts > 0]] = True
    flags_csr[p == 0] = True

    tile_ptr = np.empty(num_tiles + 1, dtype=np.int64)
    tile_ptr[:num_tiles] = _row_of_nonzero(
        csr.ptr, np.arange(num_tiles, dtype=np.int64) * tile
    )
    tile_ptr[num_tiles] = a.n_rows

    y_off = np.zeros((num_tiles, omega), dtype=np.int64)
    seg_off = np.zeros((num_tiles, omega), dtype=np.int64)
    for t in range(num_tiles):
        base = t * tile
        m = min(tile, nnz - base)
        fl = flags_csr[base : base + m]
        cols = np.arange(m) // sigma
        per_col = np.bincount(cols[fl], minlength=omega)
        y_off[t, 1:] = np.cumsum(per_col[:-1])
        run = 0
        for j in range(omega - 1, -1, -1):
            seg_off[t, j] = run
            top = j * sigma
            run = run + 1 if (top < m and not fl[top]) else 0

    return Csr5Matrix(
        n_rows=a.n_rows,
        n_cols=a.n_cols,
        ptr=csr.ptr,
        omega=omega,
        sigma=sigma,
        num_tiles=num_tiles,
        tile_ptr=tile_ptr,
        bit_flag=flags_csr[order],
        y_off=y_off,
        seg_off=seg_off,
        indices=csr.indices[order],
        data=csr.data[order],
    )


def _padded_grids(
    n_rows: int,
    k: int,
    counts: np.ndarray,
    ptr: np.ndarray,
    cols: np.ndarray,
    vals: np.ndarray,
    max_cells: int,
):
    """Left-justified (n_rows, k) grids; pads carry the safe-gather index and 0.0."""
    if n_rows * k > max_cells:
        raise ConversionError(
            f"padded grid of {n_rows}x{k} = {n_rows * k} cells exceeds the "
            f"{max_cells}-cell limit"
        )
    last_col = np.zeros(n_rows, dtype=np.int64)
    nonempty = counts > 0
    last_col[nonempty] = cols[ptr[1:][nonempty] - 1]
    idx_grid = np.repeat(last_col[:, None], k, axis=1)
    data_grid = np.zeros((n_rows, k), dtype=np.float64)
    if counts.sum() > 0:
        rows = np.repeat(np.arange(n_rows), counts)
        slots = np.arange(len(cols)) - np.repeat(ptr[:-1], counts)
        idx_grid[rows, slots] = cols
        data_grid[rows, slots] = vals
    return idx_grid, data_grid


def to_ell(a: CooMatrix, max_cells: int = DEFAULT_MAX_GRID_CELLS) -> EllMatrix:
    counts = row_nnz_histogram(a)
    k = int(counts.max()) if a.n_rows else 0
    csr = to_csr(a)
    idx_grid, data_grid = _padded_grids(
        a.n_rows, k, counts, csr.ptr, csr.indices, csr.data, max_cells
    )
    return EllMatrix(a.n_rows, a.n_cols, k, idx_grid, data_grid, counts)


def to_sell(
    a: CooMatrix,
    c: int,
    sigma: int = 0,
    max_cells: int = DEFAULT_MAX_GRID_CELLS,
) -> SellMatrix:
    if c < 1:
        raise ValueError(f"slice height c must be >= 1, got {c}")
    if sigma < 0 or (sigma > 0 and sigma % c != 0):
        raise ValueError(
            f"sorting window sigma must be 0 or a positive multiple of c, "
            f"got sigma={sigma}, c={c}"
        )
    counts = row_nnz_histogram(a)
    perm = np.arange(a.n_rows, dtype=np.int64)
    if sigma > 0:
        for start in range(0, a.n_rows, sigma):
            stop = min(start + sigma, a.n_rows)
            window = np.argsort(-counts[start:stop], kind="stable")
            perm[start:stop] = start + window
    counts_perm = counts[perm]

    n_slices = -(-a.n_rows // c)
    widths = np.zeros(n_slices, dtype=np.int64)
    for s in range(n_slices):
        chunk = counts_perm[s * c : (s + 1) * c]
        widths[s] = chunk.max() if chunk.size else 0
    rows_in = [min(c, a.n_rows - s * c) for s in range(n_slices)]
    total_cells = sum(r * int(w) for r, w in zip(rows_in, widths))
    if total_cells > max_cells:
        raise ConversionError(
            f"sliced grids of {total_cells} cells exceed the {max_cells}-cell limit"
        )

    csr = to_csr(a)
    data = []
    indices = []
    for s in range(n_slices):
        r, w = rows_in[s], int(widths[s])
        dg = np.zeros((r, w), dtype=np.float64)
        ig = np.zeros((r, w), dtype=np.int64)
        for local in range(r):
            orig = perm[s * c + local]
            cnt = int(counts[orig])
            lo = csr.ptr[orig]
            if cnt:
                dg[local, :cnt] = csr.data[lo : lo + cnt]
                ig[local, :cnt] = csr.indices[lo : lo + cnt]
                ig[local, cnt:] = csr.indices[lo + cnt - 1]
        data.append(np.asfortranarray(dg))
        indices.append(np.asfortranarray(ig))
    return SellMatrix(
        a.n_rows, a.n_cols, c, sigma, perm, widths, data, indices, counts_perm
    )


def hyb_typical_k(row_nnz) -> int:
    """Largest K reached by strictly more than a third of the rows (else 1).

    Equivalently the ceil(n/3)-th largest per-row count, floored at 1.
    """
    row_nnz = np.asarray(row_nnz)
    n = row_nnz.shape[0]
    if n == 0:
        raise ValueError("typical width is undefined for a matrix with no rows")
    rank = n // 3  # 0-based index of the (n//3 + 1)-th largest count
    k = int(np.partition(row_nnz, n - 1 - rank)[n - 1 - rank])
    return max(k, 1)


def to_hyb(a: CooMatrix, max_cells: int = DEFAULT_MAX_GRID_CELLS) -> HybMatrix:
    counts = row_nnz_histogram(a)
    if a.nnz == 0:
        ell = EllMatrix(
            a.n_rows,
            a.n_cols,
            0,
            np.empty((a.n_rows, 0), dtype=np.int64),
            np.empty((a.n_rows, 0), dtype=np.float64),
            counts,
        )
        return HybMatrix(ell, canonicalize([], [], [], a.n_rows, a.n_cols))
    k = hyb_typical_k(counts)
    csr = to_csr(a)
    slots = np.arange(a.nnz) - np.repeat(csr.ptr[:-1], counts)
    in_ell = slots < k
    ell_counts = np.minimum(counts, k)
    ell_ptr = np.zeros(a.n_rows + 1, dtype=np.int64)
    np.cumsum(ell_counts, out=ell_ptr[1:])
    idx_grid, data_grid = _padded_grids(
        a.n_rows,
        k,
        ell_counts,
        ell_ptr,
        csr.indices[in_ell],
        csr.data[in_ell],
        max_cells,
    )
    ell = EllMatrix(a.n_rows, a.n_cols, k, idx_grid, data_grid, ell_counts)
    tail = CooMatrix(
        a.n_rows,
        a.n_cols,
        a.row[~in_ell].copy(),
        a.col[~in_ell].copy(),
        a.data[~in_ell].copy(),
    )
    return HybMatrix(ell, tail)


def _ell_triplets(m: EllMatrix):
    mask = np.arange(m.k) < m.row_nnz[:, None]
    rows = np.repeat(np.arange(m.n_rows, dtype=np.int64), m.row_nnz)
    return rows, m.indices[mask], m.data[mask]


def to_coo(m: FormatMatrix) -> CooMatrix:
    """Recover the canonical COO source of any format instance, bit-exactly."""
    if isinstance(m, CsrMatrix):
        rows = np.repeat(np.arange(m.n_rows, dtype=np.int64), np.diff(m.ptr))
        return canonicalize(rows, m.indices, m.data, m.n_rows, m.n_cols)
    if isinstance(m, Csr5Matrix):
        nnz = m.nnz
        tile = m.omega * m.sigma
        k = np.arange(nnz, dtype=np.int64)
        p = k % tile
        order = np.lexsort((p // m.sigma, p % m.sigma, k // tile))
        csr_pos = k[order]  # stored entry s came from CSR position csr_pos[s]
        rows = _row_of_nonzero(m.ptr, csr_pos)
        return canonicalize(rows, m.indices, m.data, m.n_rows, m.n_cols)
    if isinstance(m, EllMatrix):
        rows, cols, vals = _ell_triplets(m)
        return canonicalize(rows, cols, vals, m.n_rows, m.n_cols)
    if isinstance(m, SellMatrix):
        rows = []
        cols = []
        vals = []
        for s in range(m.n_slices):
            base = s * m.c
            r = m.data[s].shape[0]
            for local in range(r):
                cnt = int(m.row_nnz_perm[base + local])
                rows.append(np.full(cnt, m.perm[base + local], dtype=np.int64))
                cols.append(m.indices[s][local, :cnt])
                vals.append(m.data[s][local, :cnt])
        if rows:
            return canonicalize(
                np.concatenate(rows),
                np.concatenate(cols),
                np.concatenate(vals),
                m.n_rows,
                m.n_cols,
            )
        return canonicalize([], [], [], m.n_rows, m.n_cols)
    if isinstance(m, HybMatrix):
        rows, cols, vals = _ell_triplets(m.ell)
        return canonicalize(
            np.concatenate([rows, m.coo_tail.row]),
            np.concatenate([cols, m.coo_tail.col]),
            np.concatenate([vals, m.coo_tail.data]),
            m.n_rows,
            m.n_cols,
        )
    raise TypeError(f"not a format matrix: {type(m).__name__}")


def convert(
    tag: FormatTag,
    a: CooMatrix,
    *,
    omega: int = 4,
    sigma: int = 16,
    sell_c: int = 4,
    sell_sigma: int = 0,
    max_cells: int = DEFAULT_MAX_GRID_CELLS,
) -> FormatMatrix:
    """Convert canonical COO to the tagged format with the given parameters."""
    tag = FormatTag(tag)
    if tag is FormatTag.CSR:
        return to_csr(a)
    if tag is FormatTag.CSR5:
        return to_csr5(a, omega, sigma)
    if tag is FormatTag.ELL:
        return to_ell(a, max_cells)
    if tag is FormatTag.SELL:
        return to_sell(a, sell_c, sell_sigma, max_cells)
    return to_hyb(a, max_cells)
