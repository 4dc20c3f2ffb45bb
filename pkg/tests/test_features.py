import io
import math

import numpy as np
import pytest

from spmvkit import (
    FEATURE_NAMES,
    FeatureVector,
    apply_scaling,
    canonicalize,
    extract_features,
    fit_scaling,
    read_features,
    write_features,
)

from helpers import random_coo


class TestExtractFeatures:
    def test_demo_values(self, demo4x4):
        # Row counts [2, 3, 1, 2]: mean 2, population variance
        # (0 + 1 + 1 + 0) / 4 = 0.5.
        f = extract_features(demo4x4)
        assert (f.n_rows, f.n_cols) == (4, 4)
        assert f.nnz_frac == 0.5
        assert (f.nnz_min, f.nnz_max) == (1, 3)
        assert f.nnz_avg == 2.0
        assert f.nnz_std == math.sqrt(0.5)
        assert f.variation == math.sqrt(0.5) / 2.0

    def test_uniform_diagonal_has_zero_variation(self):
        a = canonicalize(range(6), range(6), [1.0] * 6, 6, 6)
        f = extract_features(a)
        assert f.nnz_std == 0.0
        assert f.variation == 0.0

    def test_empty_matrix_stats_are_zero(self):
        f = extract_features(canonicalize([], [], [], 3, 3))
        assert f.nnz_frac == 0.0
        assert (f.nnz_min, f.nnz_max, f.nnz_avg, f.nnz_std, f.variation) == (
            0,
            0,
            0.0,
            0.0,
            0.0,
        )

    def test_zero_dimension_rejected(self):
        with pytest.raises(ValueError, match="undefined"):
            extract_features(canonicalize([], [], [], 0, 5))

    def test_structure_only(self, rng, demo4x4):
        scaled = canonicalize(
            demo4x4.row, demo4x4.col, demo4x4.data * 1e6 + 1.0, 4, 4
        )
        assert extract_features(scaled) == extract_features(demo4x4)

    def test_invariants_hold(self, rng):
        for _ in range(20):
            f = extract_features(random_coo(rng, max_dim=64))
            assert f.nnz_min <= f.nnz_avg <= f.nnz_max
            assert 0.0 <= f.nnz_frac <= 1.0
            assert all(math.isfinite(v) for v in f.as_array())


class TestScaling:
    def test_single_vector_degenerates(self, demo4x4):
        f = extract_features(demo4x4)
        params = fit_scaling([f])
        assert np.array_equal(params.mins, params.maxs)
        assert apply_scaling(f, params).tolist() == [0.0] * 8

    def test_two_vectors_componentwise_extremes(self, demo4x4):
        a = extract_features(demo4x4)
        b = extract_features(canonicalize([0], [0], [1.0], 9, 2))
        params = fit_scaling([a, b])
        stacked = np.stack([a.as_array(), b.as_array()])
        assert params.mins.tolist() == stacked.min(axis=0).tolist()
        assert params.maxs.tolist() == stacked.max(axis=0).tolist()

    def test_extremes_match_brute_force_scan(self, rng):
        fs = [extract_features(random_coo(rng, max_dim=40)) for _ in range(25)]
        params = fit_scaling(fs)
        for j, name in enumerate(FEATURE_NAMES):
            values = [float(getattr(f, name)) for f in fs]
            assert params.mins[j] == min(values)
            assert params.maxs[j] == max(values)

    def test_min_maps_to_zero_max_to_one_midpoint_to_half(self):
        lo = FeatureVector(2, 2, 0.0, 0, 0, 0.0, 0.0, 0.0)
        hi = FeatureVector(4, 6, 1.0, 2, 8, 4.0, 2.0, 0.5)
        mid = FeatureVector(3, 4, 0.5, 1, 4, 2.0, 1.0, 0.25)
        params = fit_scaling([lo, hi])
        assert apply_scaling(lo, params).tolist() == [0.0] * 8
        assert apply_scaling(hi, params).tolist() == [1.0] * 8
        assert apply_scaling(mid, params).tolist() == [0.5] * 8

    def test_out_of_range_clamps(self):
        lo = FeatureVector(2, 2, 0.1, 1, 1, 1.0, 0.0, 0.0)
        hi = FeatureVector(4, 4, 0.9, 3, 3, 3.0, 1.0, 1.0)
        params = fit_scaling([lo, hi])
        out = FeatureVector(40, 1, 0.95, 0, 9, 9.0, 9.0, 9.0)
        scaled = apply_scaling(out, params)
        assert np.all(scaled >= 0.0) and np.all(scaled <= 1.0)
        assert scaled[0] == 1.0 and scaled[1] == 0.0

    def test_scaled_corpus_lands_in_unit_cube(self, rng):
        fs = [extract_features(random_coo(rng, max_dim=80)) for _ in range(30)]
        params = fit_scaling(fs)
        for f in fs:
            scaled = apply_scaling(f, params)
            assert np.all(scaled >= 0.0) and np.all(scaled <= 1.0)

    def test_monotone_per_feature(self):
        lo = FeatureVector(2, 2, 0.0, 0, 0, 0.0, 0.0, 0.0)
        hi = FeatureVector(10, 10, 1.0, 5, 9, 6.0, 3.0, 1.0)
        params = fit_scaling([lo, hi])
        a = FeatureVector(3, 4, 0.2, 1, 2, 1.0, 0.5, 0.1)
        b = FeatureVector(7, 8, 0.8, 4, 7, 5.0, 2.5, 0.9)
        assert np.all(apply_scaling(a, params) <= apply_scaling(b, params))

    def test_refit_on_scaled_data_is_idempotent(self, rng):
        # After scaling, every live feature spans [0, 1], so refitting on the
        # scaled corpus and scaling again must change nothing.
        fs = [extract_features(random_coo(rng, max_dim=40)) for _ in range(10)]
        params = fit_scaling(fs)
        scaled_fs = [FeatureVector(*apply_scaling(f, params)) for f in fs]
        params2 = fit_scaling(scaled_fs)
        for f in scaled_fs:
            assert apply_scaling(f, params2).tolist() == f.as_array().tolist()

    def test_empty_fit_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            fit_scaling([])


class TestFeatureFile:
    def test_round_trip(self, rng, demo4x4):
        entries = [("demo", extract_features(demo4x4))]
        for i in range(5):
            entries.append((f"m{i}", extract_features(random_coo(rng, max_dim=30))))
        buf = io.StringIO()
        write_features(entries, buf)
        again = read_features(io.StringIO(buf.getvalue()))
        assert again == entries

    def test_field_order_is_fixed(self, demo4x4):
        buf = io.StringIO()
        write_features([("demo", extract_features(demo4x4))], buf)
        keys = [tok.split(":")[0] for tok in buf.getvalue().split()]
        assert keys == ["matrix_id", *FEATURE_NAMES]

    def test_bad_line_rejected(self):
        with pytest.raises(ValueError, match="bad feature line"):
            read_features(io.StringIO("matrix_id:x n_rows:oops\n"))
