import math

import numpy as np
import pytest

from dynpsn.features import (
    ColumnFilter,
    FeatureError,
    apply_pipeline,
    compute_gcm,
    fit_column_filter,
    fit_pca,
    flatten_upper,
    read_column_filter,
    read_feature_matrix,
    read_pca_model,
    write_column_filter,
    write_feature_matrix,
    write_pca_model,
)


class TestColumnFilter:
    def test_definition(self):
        m1 = np.zeros((3, 10), dtype=np.int64)
        m2 = np.zeros((4, 10), dtype=np.int64)
        m1[0, 0] = 1
        m1[2, 5] = 2
        m2[1, 9] = 7
        cf = fit_column_filter([m1, m2])
        assert cf.kept_indices == [0, 5, 9]

    def test_all_positive_keeps_everything(self):
        m = np.ones((2, 3727), dtype=np.int64)
        assert len(fit_column_filter([m]).kept_indices) == 3727

    def test_all_zero_fatal(self):
        with pytest.raises(FeatureError):
            fit_column_filter([np.zeros((3, 5), dtype=np.int64)])

    def test_empty_corpus_fatal(self):
        with pytest.raises(FeatureError):
            fit_column_filter([])

    def test_apply(self):
        cf = ColumnFilter(kept_indices=[1, 3])
        m = np.arange(8).reshape(2, 4)
        assert np.array_equal(cf.apply(m), [[1, 3], [5, 7]])


class TestGCM:
    def test_identical_columns_all_ones(self):
        col = np.array([1.0, 3.0, 2.0, 5.0])
        gcm = compute_gcm(np.column_stack([col, col, col]))
        assert np.allclose(gcm, 1.0)

    def test_rank_reversed_minus_one(self):
        a = np.array([1.0, 2.0, 3.0, 4.0])
        gcm = compute_gcm(np.column_stack([a, -a]))
        assert gcm[0, 1] == pytest.approx(-1.0)

    def test_hand_computed_spearman(self):
        m = np.array([[1, 2, 5],
                      [2, 1, 4],
                      [3, 4, 3],
                      [4, 3, 1]], dtype=float)
        gcm = compute_gcm(m, method="spearman")
        assert gcm[0, 1] == pytest.approx(0.6, abs=1e-12)
        assert gcm[0, 2] == pytest.approx(-1.0, abs=1e-12)
        assert gcm[1, 2] == pytest.approx(-0.6, abs=1e-12)

    def test_tied_ranks_average(self):
        m = np.column_stack([[1.0, 2.0, 3.0, 4.0], [1.0, 1.0, 2.0, 3.0]])
        gcm = compute_gcm(m, method="spearman")
        assert gcm[0, 1] == pytest.approx(math.sqrt(0.9), abs=1e-12)

    def test_constant_column_zero(self):
        m = np.column_stack([[1.0, 2.0, 3.0], [5.0, 5.0, 5.0]])
        gcm = compute_gcm(m)
        assert gcm[0, 1] == 0.0
        assert gcm[1, 1] == 1.0

    def test_symmetry_and_diagonal_exact(self):
        rng = np.random.default_rng(0)
        m = rng.integers(0, 50, size=(20, 15)).astype(float)
        gcm = compute_gcm(m)
        assert np.abs(gcm - gcm.T).max() <= 1e-12
        assert np.abs(np.diag(gcm) - 1.0).max() <= 1e-12
        assert gcm.min() >= -1.0 and gcm.max() <= 1.0

    def test_pearson_option(self):
        a = np.array([1.0, 2.0, 3.0, 4.0])
        b = np.array([1.0, 2.0, 3.0, 100.0])
        spear = compute_gcm(np.column_stack([a, b]), method="spearman")
        pear = compute_gcm(np.column_stack([a, b]), method="pearson")
        assert spear[0, 1] == pytest.approx(1.0)
        assert pear[0, 1] < 1.0

    def test_joint_row_permutation_invariance(self):
        rng = np.random.default_rng(3)
        m = rng.integers(0, 9, size=(12, 6)).astype(float)
        perm = rng.permutation(12)
        assert np.allclose(compute_gcm(m), compute_gcm(m[perm]))

    def test_too_few_rows(self):
        with pytest.raises(FeatureError):
            compute_gcm(np.ones((1, 4)))


class TestFlatten:
    def test_c3(self):
        a, b, e = 0.2, -0.5, 0.9
        gcm = np.array([[1, a, b], [a, 1, e], [b, e, 1]])
        assert np.array_equal(flatten_upper(gcm), [a, b, e])

    def test_c2(self):
        assert flatten_upper(np.array([[1.0, 0.3], [0.3, 1.0]])).shape == (1,)

    def test_c211_length(self):
        gcm = np.eye(211)
        assert flatten_upper(gcm).shape == (22155,)
        assert 22155 == 211 * 210 // 2


class TestPCA:
    def test_single_direction(self):
        t = np.linspace(-1, 1, 7)
        X = np.outer(t, np.array([1.0, 2.0, -1.0]))
        model = fit_pca(X, retain=0.90)
        assert model.d == 1

    def test_isotropic_needs_all(self):
        lam = 2.0
        X = np.vstack([np.eye(3) * math.sqrt(lam), -np.eye(3) * math.sqrt(lam)])
        model = fit_pca(X, retain=0.90)
        assert model.d == 3
        assert np.allclose(model.explained_variance_ratio, [1 / 3] * 3)

    def test_reconstruction_error_bound(self):
        rng = np.random.default_rng(11)
        X = rng.normal(size=(40, 12)) @ np.diag([5, 4, 3, 2] + [0.3] * 8)
        model = fit_pca(X, retain=0.90)
        centered = X - X.mean(axis=0)
        recon = model.transform(X) @ model.components
        err = np.sum((centered - recon) ** 2)
        total = np.sum(centered ** 2)
        retained = model.explained_variance_ratio.sum()
        assert err <= (1 - retained) * total + 1e-9 * total

    def test_orthonormal_components(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(30, 9))
        model = fit_pca(X, retain=0.99)
        gram = model.components @ model.components.T
        assert np.abs(gram - np.eye(model.d)).max() <= 1e-8

    def test_minimality_of_d(self):
        rng = np.random.default_rng(8)
        X = rng.normal(size=(50, 10)) @ np.diag(np.linspace(3, 0.2, 10))
        model = fit_pca(X, retain=0.90)
        # recompute full ratios independently
        centered = X - X.mean(axis=0)
        eig = np.linalg.svd(centered, compute_uv=False) ** 2
        ratios = eig / eig.sum()
        cum = np.cumsum(ratios)
        assert cum[model.d - 1] >= 0.90 - 1e-9
        if model.d > 1:
            assert cum[model.d - 2] < 0.90

    def test_ratio_sum_bounded(self):
        rng = np.random.default_rng(9)
        model = fit_pca(rng.normal(size=(20, 6)), retain=1.0)
        assert model.explained_variance_ratio.sum() <= 1 + 1e-9

    def test_zero_variance_fatal(self):
        with pytest.raises(FeatureError):
            fit_pca(np.ones((5, 3)))

    def test_retain_range(self):
        with pytest.raises(FeatureError):
            fit_pca(np.random.default_rng(0).normal(size=(5, 3)), retain=0.0)


class TestPipeline:
    def _gdvms(self, seed=0, domains=12, cols=40):
        rng = np.random.default_rng(seed)
        out = {}
        for i in range(domains):
            n = int(rng.integers(6, 15))
            m = rng.integers(0, 6, size=(n, cols))
            m[:, rng.integers(0, cols, size=5)] = 0
            out[f"d{i:02d}"] = m.astype(np.int64)
        return out

    def test_shapes_and_keying(self):
        gdvms = self._gdvms()
        feats, art = apply_pipeline(gdvms)
        assert feats.shape[0] == len(gdvms)
        assert art.ids == sorted(gdvms)
        c = len(art.column_filter.kept_indices)
        assert feats.shape[1] <= c * (c - 1) // 2

    def test_deterministic(self):
        gdvms = self._gdvms(3)
        f1, _ = apply_pipeline(gdvms)
        f2, _ = apply_pipeline(gdvms)
        assert np.array_equal(f1, f2)

    def test_static_kind_flows_through(self, static_table):
        from dynpsn.graphlets import count_static_orbits
        from dynpsn.psn import build_static_psn
        from tests.conftest import collinear_chain
        gdvms = {}
        for i, n in enumerate((8, 9, 10, 11)):
            psn = build_static_psn(collinear_chain(n))
            gdvms[f"c{i}"] = count_static_orbits(psn, static_table).counts
        feats, art = apply_pipeline(gdvms)
        assert feats.shape[0] == 4


class TestFeatureFiles:
    def test_feature_matrix_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        ids = ["a", "b", "c"]
        X = rng.normal(size=(3, 5))
        path = tmp_path / "x.feat"
        write_feature_matrix(ids, X, path)
        ids2, X2 = read_feature_matrix(path)
        assert ids2 == ids
        assert np.array_equal(X, X2)  # 17 significant digits round-trips floats

    def test_column_filter_round_trip(self, tmp_path):
        cf = ColumnFilter(kept_indices=[0, 4, 4000])
        path = tmp_path / "cols.txt"
        write_column_filter(cf, path)
        assert read_column_filter(path).kept_indices == [0, 4, 4000]

    def test_pca_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        model = fit_pca(rng.normal(size=(10, 6)), retain=0.9)
        path = tmp_path / "pca.txt"
        write_pca_model(model, path)
        again = read_pca_model(path)
        assert again.d == model.d
        assert np.array_equal(again.mean, model.mean)
        assert np.array_equal(again.components, model.components)
