import numpy as np
import pytest

from spmvkit import (
    ConversionError,
    FormatTag,
    canonicalize,
    coo_equal,
    convert,
    hyb_typical_k,
    to_coo,
    to_csr,
    to_csr5,
    to_ell,
    to_hyb,
    to_sell,
)

from helpers import coo_with_dense_row, coo_with_empty_band, random_coo


class TestToCsr:
    def test_demo_golden(self, demo4x4):
        m = to_csr(demo4x4)
        assert m.ptr.tolist() == [0, 2, 5, 6, 8]
        assert m.indices.tolist() == [1, 2, 0, 2, 3, 2, 1, 2]
        assert m.data.tolist() == [6, 1, 2, 8, 3, 4, 7, 5]

    def test_empty(self):
        m = to_csr(canonicalize([], [], [], 3, 3))
        assert m.ptr.tolist() == [0, 0, 0, 0]

    def test_single_row(self):
        a = canonicalize([0, 0], [0, 3], [5.0, 2.0], 1, 4)
        m = to_csr(a)
        assert m.ptr.tolist() == [0, 2]
        assert m.indices.tolist() == [0, 3]
        assert m.data.tolist() == [5.0, 2.0]


class TestToCsr5:
    def test_demo_golden_descriptor(self, demo4x4):
        m = to_csr5(demo4x4, 2, 2)
        assert m.num_tiles == 2
        assert m.tile_ptr.tolist() == [0, 1, 4]
        assert m.bit_flag.tolist() == [True, True, False, False, True, True, True, False]
        assert m.y_off.tolist() == [[0, 1], [0, 2]]
        assert m.seg_off.tolist() == [[0, 0], [0, 0]]
        assert m.indices.tolist() == [1, 0, 2, 2, 3, 1, 2, 2]
        assert m.data.tolist() == [6, 2, 1, 8, 3, 7, 4, 5]

    def test_single_entry_partial_tile(self):
        a = canonicalize([0], [0], [3.0], 1, 1)
        m = to_csr5(a, 2, 2)
        assert m.num_tiles == 1
        assert m.data.tolist() == [3.0]
        assert m.bit_flag.tolist() == [True]
        assert m.tile_ptr.tolist() == [0, 1]

    def test_one_nonzero_per_row(self):
        # Four rows, one nonzero each, omega=sigma=2: every entry starts a
        # row, so all flags are true; column 0 of the single tile holds two
        # row starts, hence y_off = [0, 2].
        a = canonicalize(range(4), [0, 1, 0, 1], [1.0, 2.0, 3.0, 4.0], 4, 2)
        m = to_csr5(a, 2, 2)
        assert m.num_tiles == 1
        assert m.bit_flag.all()
        assert m.y_off.tolist() == [[0, 2]]

    def test_eight_rows_two_tiles(self):
        a = canonicalize(range(8), [0] * 8, np.arange(1.0, 9.0), 8, 1)
        m = to_csr5(a, 2, 2)
        assert m.y_off.tolist() == [[0, 2], [0, 2]]
        assert m.bit_flag.all()

    def test_zero_parameters_rejected(self, demo4x4):
        with pytest.raises(ValueError, match="omega"):
            to_csr5(demo4x4, 0, 2)
        with pytest.raises(ValueError, match="sigma"):
            to_csr5(demo4x4, 4, 0)

    def test_flag_offset_consistency(self, rng):
        # y_off must count the true flags of the columns to its left, every
        # tile must carry at least one true flag, and seg_off must equal the
        # run length of unflagged-top columns to the right.
        for _ in range(25):
            a = random_coo(rng, max_dim=64)
            omega = int(rng.integers(1, 6))
            sigma = int(rng.integers(1, 6))
            m = to_csr5(a, omega, sigma)
            tile = omega * sigma
            for t in range(m.num_tiles):
                base = t * tile
                count = min(tile, a.nnz - base)
                flags = m.bit_flag[base : base + count]
                p = np.arange(count)
                perm = np.lexsort((p // sigma, p % sigma))
                flags_csr = np.empty(count, dtype=bool)
                flags_csr[perm] = flags
                assert flags_csr[0], "tile head flag must be forced true"
                cols = p // sigma
                for j in range(omega):
                    expect = int(flags_csr[cols < j].sum())
                    assert m.y_off[t, j] == expect
                    run = 0
                    for j2 in range(j + 1, omega):
                        if j2 * sigma >= count or flags_csr[j2 * sigma]:
                            break
                        run += 1
                    assert m.seg_off[t, j] == run

    def test_tile_ptr_matches_definition(self, rng):
        for _ in range(10):
            a = random_coo(rng, max_dim=64)
            if a.nnz == 0:
                continue
            m = to_csr5(a, 4, 3)
            csr = to_csr(a)
            rows = np.repeat(np.arange(a.n_rows), np.diff(csr.ptr))
            for t in range(m.num_tiles):
                assert m.tile_ptr[t] == rows[t * 12]
            assert m.tile_ptr[m.num_tiles] == a.n_rows


class TestToEll:
    def test_demo_golden(self, demo4x4):
        m = to_ell(demo4x4)
        assert m.k == 3
        assert m.data.tolist() == [[6, 1, 0], [2, 8, 3], [4, 0, 0], [7, 5, 0]]
        # Pads repeat the row's last valid column index (safe gather).
        assert m.indices.tolist() == [[1, 2, 2], [0, 2, 3], [2, 2, 2], [1, 2, 2]]
        assert m.row_nnz.tolist() == [2, 3, 1, 2]

    def test_diagonal(self):
        a = canonicalize(range(3), range(3), [9.0, 8.0, 7.0], 3, 3)
        m = to_ell(a)
        assert m.k == 1
        assert m.data.tolist() == [[9.0], [8.0], [7.0]]

    def test_empty_row_fully_padded(self):
        a = canonicalize([0, 2], [1, 0], [4.0, 5.0], 3, 2)
        m = to_ell(a)
        assert m.data[1].tolist() == [0.0]
        assert m.row_nnz.tolist() == [1, 0, 1]

    def test_empty_matrix_k_zero(self):
        m = to_ell(canonicalize([], [], [], 3, 3))
        assert m.k == 0
        assert m.data.shape == (3, 0)

    def test_storage_bound(self, rng):
        for _ in range(15):
            a = random_coo(rng, max_dim=48)
            m = to_ell(a)
            counts = m.row_nnz
            assert m.n_rows * m.k >= a.nnz
            uniform = a.nnz > 0 and counts.min() == counts.max()
            assert (m.n_rows * m.k == a.nnz) == (uniform or a.nnz == 0)

    def test_grid_cell_limit(self):
        a = canonicalize([0] * 8 + [1], list(range(8)) + [0], [1.0] * 9, 64, 8)
        with pytest.raises(ConversionError, match="cell"):
            to_ell(a, max_cells=100)


class TestToSell:
    def test_demo_plain_golden(self, demo4x4):
        m = to_sell(demo4x4, 2, 0)
        assert m.sigma == 0
        assert m.perm.tolist() == [0, 1, 2, 3]
        assert m.widths.tolist() == [3, 2]
        assert m.data[0].tolist() == [[6, 1, 0], [2, 8, 3]]
        assert m.data[1].tolist() == [[4, 0], [7, 5]]
        assert m.indices[0].tolist() == [[1, 2, 2], [0, 2, 3]]
        assert m.indices[1].tolist() == [[2, 2], [1, 2]]

    def test_demo_sorted_golden(self, demo4x4):
        # Window of 4 rows with nnz [2, 3, 1, 2]: descending stable order is
        # row 1 (3), row 0 (2), row 3 (2), row 2 (1).
        m = to_sell(demo4x4, 2, 4)
        assert m.perm.tolist() == [1, 0, 3, 2]
        assert m.widths.tolist() == [3, 2]
        assert m.data[0].tolist() == [[2, 8, 3], [6, 1, 0]]
        assert m.indices[0].tolist() == [[0, 2, 3], [1, 2, 2]]
        assert m.data[1].tolist() == [[7, 5], [4, 0]]

    def test_short_last_slice(self):
        a = canonicalize([0, 1], [0, 1], [1.0, 2.0], 2, 2)
        m = to_sell(a, 4, 0)
        assert m.n_slices == 1
        assert m.data[0].shape == (2, 1)

    def test_sigma_must_be_multiple_of_c(self, demo4x4):
        with pytest.raises(ValueError, match="multiple"):
            to_sell(demo4x4, 2, 3)

    def test_window_permutation_properties(self, rng):
        from spmvkit import row_nnz_histogram

        for _ in range(20):
            a = random_coo(rng, max_dim=80)
            c = int(rng.integers(1, 6))
            sigma = c * int(rng.integers(1, 5))
            m = to_sell(a, c, sigma)
            counts = row_nnz_histogram(a)
            for start in range(0, a.n_rows, sigma):
                stop = min(start + sigma, a.n_rows)
                window = m.perm[start:stop]
                assert sorted(window.tolist()) == list(range(start, stop))
                nnz_along = counts[window]
                assert np.all(np.diff(nnz_along) <= 0)


class TestHybTypicalK:
    def test_demo_counts(self):
        assert hyb_typical_k([2, 3, 1, 2]) == 2

    def test_uniform(self):
        assert hyb_typical_k([5, 5, 5, 5]) == 5

    def test_one_heavy_row(self):
        # Brute force over K: the share of rows with >= K nonzeros only
        # clears a third at K = 1.
        assert hyb_typical_k([1, 1, 1, 100]) == 1

    def test_single_busy_row_returns_floor(self):
        assert hyb_typical_k([10, 0, 0]) == 1

    def test_matches_brute_force(self, rng):
        # Independent scan: largest K where strictly more than n/3 of the
        # rows reach K nonzeros, else 1.
        for _ in range(50):
            counts = rng.integers(0, 20, size=int(rng.integers(1, 30)))
            best = 1
            for k in range(1, 21):
                if 3 * int((counts >= k).sum()) > counts.size:
                    best = k
            assert hyb_typical_k(counts) == best


class TestToHyb:
    def test_demo_golden(self, demo4x4):
        m = to_hyb(demo4x4)
        assert m.k == 2
        assert m.ell.data.tolist() == [[6, 1], [2, 8], [4, 0], [7, 5]]
        assert m.ell.indices.tolist() == [[1, 2], [0, 2], [2, 2], [1, 2]]
        assert m.coo_tail.row.tolist() == [1]
        assert m.coo_tail.col.tolist() == [3]
        assert m.coo_tail.data.tolist() == [3.0]

    def test_no_overflow_rows_empty_tail(self):
        a = canonicalize([0, 1, 2], [0, 1, 2], [1.0, 2.0, 3.0], 3, 3)
        m = to_hyb(a)
        assert m.coo_tail.nnz == 0

    def test_single_long_row_spills(self):
        a = canonicalize([0] * 10, range(10), [1.0] * 10, 3, 10)
        m = to_hyb(a)
        assert m.k == 1
        assert m.coo_tail.nnz == 9

    def test_split_properties(self, rng):
        from spmvkit import row_nnz_histogram

        for _ in range(20):
            a = random_coo(rng, max_dim=64)
            if a.nnz == 0:
                continue
            m = to_hyb(a)
            assert m.ell.nnz + m.coo_tail.nnz == a.nnz
            counts = row_nnz_histogram(a)
            for r in np.unique(m.coo_tail.row):
                assert counts[r] > m.k


class TestRoundTrips:
    def _variants(self, rng, a):
        yield to_csr(a)
        yield to_csr5(a, int(rng.integers(1, 6)), int(rng.integers(1, 6)))
        yield to_ell(a)
        yield to_sell(a, 4, 8)
        yield to_sell(a, 3, 0)
        yield to_hyb(a)

    def test_every_format_round_trips_bit_exactly(self, rng):
        mats = [random_coo(rng, max_dim=50) for _ in range(15)]
        mats += [coo_with_dense_row(rng), coo_with_empty_band(rng)]
        mats.append(canonicalize([], [], [], 5, 7))
        for a in mats:
            for m in self._variants(rng, a):
                assert coo_equal(to_coo(m), a), type(m).__name__

    def test_csr5_demo_round_trip(self, demo4x4):
        assert coo_equal(to_coo(to_csr5(demo4x4, 2, 2)), demo4x4)

    def test_hyb_empty_round_trip(self):
        empty = canonicalize([], [], [], 4, 4)
        assert coo_equal(to_coo(to_hyb(empty)), empty)

    def test_sell_random_50x50(self, rng):
        a = random_coo(rng, 50, 50, 0.1)
        assert coo_equal(to_coo(to_sell(a, 4, 8)), a)


class TestFormatTag:
    def test_stable_names_and_order(self):
        assert [t.value for t in FormatTag] == ["csr", "csr5", "ell", "sell", "hyb"]

    def test_convert_dispatches_every_tag(self, demo4x4):
        from spmvkit import Csr5Matrix, CsrMatrix, EllMatrix, HybMatrix, SellMatrix

        expected = {
            FormatTag.CSR: CsrMatrix,
            FormatTag.CSR5: Csr5Matrix,
            FormatTag.ELL: EllMatrix,
            FormatTag.SELL: SellMatrix,
            FormatTag.HYB: HybMatrix,
        }
        for tag, cls in expected.items():
            assert isinstance(convert(tag, demo4x4), cls)
