import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lvpi.data import (
    Dataset,
    SplitSpec,
    StandardizationStats,
    apply_standardizer,
    fit_standardizer,
    inverse_standardizer,
    partition_sizes,
    read_csv,
    split_dataset,
    write_csv,
)
from lvpi.exceptions import ValidationError


def _ds(n, m=2, seed=0):
    r = np.random.default_rng(seed)
    return Dataset(X=r.standard_normal((n, m)), y=r.standard_normal(n))


class TestDataset:
    def test_shapes_and_readonly(self):
        ds = _ds(5, 3)
        assert (ds.n, ds.m) == (5, 3)
        with pytest.raises(ValueError):
            ds.X[0, 0] = 1.0

    def test_length_mismatch(self):
        with pytest.raises(ValidationError, match="rows"):
            Dataset(X=np.zeros((3, 2)), y=np.zeros(4))

    def test_non_finite_rejected(self):
        with pytest.raises(ValidationError):
            Dataset(X=np.array([[np.nan]]), y=np.array([1.0]))

    def test_feature_names_count(self):
        with pytest.raises(ValidationError):
            Dataset(X=np.zeros((2, 2)), y=np.zeros(2), feature_names=("a",))


class TestSplit:
    def test_paper_fractions(self):
        sp = split_dataset(_ds(100), SplitSpec(0.4, 0.4, 0.2))
        assert (sp.train.n, sp.cal.n, sp.test.n) == (40, 40, 20)

    def test_remainder_goes_train_first(self):
        assert partition_sizes(11, (0.4, 0.4, 0.2)) == (5, 4, 2)
        assert partition_sizes(7, (1 / 3, 1 / 3, 1 / 3)) == (3, 2, 2)

    def test_degenerate_split_needs_opt_in(self):
        with pytest.raises(ValidationError, match="empty"):
            split_dataset(_ds(10), SplitSpec(1.0, 0.0, 0.0))
        sp = split_dataset(_ds(10), SplitSpec(1.0, 0.0, 0.0, allow_empty=True))
        assert sp.train.n == 10 and sp.cal.n == 0 and sp.test.n == 0

    def test_fractions_must_sum_to_one(self):
        with pytest.raises(ValidationError, match="sum"):
            SplitSpec(0.5, 0.5, 0.5)

    def test_seeded_determinism(self):
        ds = _ds(10)
        a = split_dataset(ds, SplitSpec(seed=7))
        b = split_dataset(ds, SplitSpec(seed=7))
        for name in ("train_index", "cal_index", "test_index"):
            np.testing.assert_array_equal(getattr(a, name), getattr(b, name))

    def test_contiguous_keeps_order(self):
        sp = split_dataset(_ds(8), SplitSpec(0.5, 0.25, 0.25, mode="contiguous"))
        np.testing.assert_array_equal(sp.train_index, [0, 1, 2, 3])
        np.testing.assert_array_equal(sp.test_index, [6, 7])

    @settings(max_examples=60, deadline=None)
    @given(
        n=st.integers(24, 400),
        a=st.integers(1, 8),
        b=st.integers(1, 8),
        c=st.integers(1, 8),
        seed=st.integers(0, 2**32),
        mode=st.sampled_from(["random", "contiguous"]),
    )
    def test_disjoint_and_exhaustive(self, n, a, b, c, seed, mode):
        s = a + b + c
        spec = SplitSpec(a / s, b / s, 1 - a / s - b / s, mode=mode, seed=seed)
        sp = split_dataset(_ds(n), spec)
        allidx = np.concatenate([sp.train_index, sp.cal_index, sp.test_index])
        assert sorted(allidx.tolist()) == list(range(n))


class TestStandardizer:
    def test_unit_variance_column(self):
        st_ = fit_standardizer(np.array([[1.0], [2.0], [3.0]]))
        assert st_.mean[0] == 2.0 and st_.scale[0] == 1.0

    def test_constant_column_scale_one(self):
        st_ = fit_standardizer(np.array([[5.0], [5.0], [5.0]]))
        assert st_.mean[0] == 5.0 and st_.scale[0] == 1.0

    def test_two_point_column(self):
        st_ = fit_standardizer(np.array([[0.0], [2.0]]))
        assert st_.mean[0] == 1.0
        assert st_.scale[0] == pytest.approx(math.sqrt(2.0), abs=1e-15)

    def test_single_row_scaled_rejected(self):
        with pytest.raises(ValidationError):
            fit_standardizer(np.ones((1, 3)), scaled=True)
        fit_standardizer(np.ones((1, 3)), scaled=False)

    def test_arithmetic_and_identity(self):
        s = StandardizationStats(np.array([2.0]), np.array([2.0]), True, True)
        assert apply_standardizer(s, np.array([[6.0]]))[0, 0] == 2.0
        ident = StandardizationStats(np.zeros(2), np.ones(2), False, False)
        X = np.array([[1.5, -2.0]])
        np.testing.assert_array_equal(apply_standardizer(ident, X), X)

    def test_train_moments(self, rng):
        X = rng.standard_normal((50, 4)) * [1, 3, 0.1, 7] + [5, -1, 0, 2]
        X[:, 2] = 4.0
        Xt = apply_standardizer(fit_standardizer(X), X)
        assert np.all(np.abs(Xt.mean(axis=0)) < 1e-10)
        sd = Xt.std(axis=0, ddof=1)
        np.testing.assert_allclose(sd[[0, 1, 3]], 1.0, atol=1e-10)

    def test_inverse_roundtrip(self, rng):
        X = rng.standard_normal((10, 3))
        s = fit_standardizer(X)
        np.testing.assert_allclose(inverse_standardizer(s, apply_standardizer(s, X)), X, atol=1e-12)

    def test_column_mismatch(self):
        s = fit_standardizer(np.ones((3, 2)))
        with pytest.raises(ValidationError, match="columns"):
            apply_standardizer(s, np.ones((2, 3)))

    def test_dict_roundtrip(self, rng):
        s = fit_standardizer(rng.standard_normal((6, 2)))
        t = StandardizationStats.from_dict(s.to_dict())
        np.testing.assert_array_equal(s.mean, t.mean)
        np.testing.assert_array_equal(s.scale, t.scale)


class TestCsv:
    def test_roundtrip_exact(self, tmp_path, rng):
        ds = Dataset(X=rng.standard_normal((7, 3)), y=rng.standard_normal(7))
        p = tmp_path / "d.csv"
        write_csv(p, ds, target="resp")
        back = read_csv(p, target="resp")
        np.testing.assert_array_equal(back.X, ds.X)
        np.testing.assert_array_equal(back.y, ds.y)

    def test_bad_row_reports_line(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("a,b\n1,2\n3,oops\n")
        with pytest.raises(ValidationError, match="row 3"):
            read_csv(p)

    def test_missing_target(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("a,b\n1,2\n")
        with pytest.raises(ValidationError, match="target"):
            read_csv(p, target="zzz")
