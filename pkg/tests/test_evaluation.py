import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lvpi.data import SplitSpec, split_dataset
from lvpi.evaluation import (
    SWEEP_COLUMNS,
    empirical_coverage,
    evaluate,
    exceedance_stats,
    hk_grid_sweep,
    residual_quantile_correlation,
    timing,
    width_stats,
)
from lvpi.exceptions import ValidationError


def rank_oracle(values):
    """Average ranks (1-based), computed by plain enumeration."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2 + 1
        for kk in range(i, j + 1):
            ranks[order[kk]] = avg
        i = j + 1
    return ranks


def pearson_oracle(a, b):
    n = len(a)
    ma, mb = sum(a) / n, sum(b) / n
    cov = sum((x - ma) * (y - mb) for x, y in zip(a, b))
    va = sum((x - ma) ** 2 for x in a)
    vb = sum((y - mb) ** 2 for y in b)
    return cov / math.sqrt(va * vb)


class TestCoverage:
    def test_all_inside(self):
        assert empirical_coverage([1, 2], np.array([[0, 3], [0, 3]])) == 100.0

    def test_endpoint_inclusive(self):
        assert empirical_coverage([1.0, 3.0], (np.array([1.0, 0.0]), np.array([2.0, 3.0]))) == 100.0

    def test_hand_count(self):
        r = np.random.default_rng(10)
        y = r.standard_normal(10)
        lo = r.standard_normal(10) - 0.5
        hi = lo + r.uniform(0, 2, 10)
        count = sum(1 for i in range(10) if lo[i] <= y[i] <= hi[i])
        assert empirical_coverage(y, (lo, hi)) == 100.0 * count / 10

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            empirical_coverage([1, 2, 3], np.array([[0, 1], [0, 1]]))


class TestWidths:
    @pytest.mark.parametrize(
        "w, expect", [([1, 1, 1], (1, 1)), ([1, 3], (2, 2)), ([0, 0, 6], (2, 0))]
    )
    def test_examples(self, w, expect):
        w = np.asarray(w, dtype=float)
        assert width_stats((np.zeros_like(w), w)) == expect

    def test_exceedance(self):
        assert exceedance_stats([0.5, 0.5], (np.zeros(2), np.ones(2))) == (0.0, 0.0)
        y = np.array([0.5, 0.5, 0.5, 1.2])
        pct, excess = exceedance_stats(y, (np.zeros(4), np.ones(4)))
        assert pct == 25.0 and excess == pytest.approx(0.2)


class TestCorrelation:
    def test_identity_and_reversal(self, rng):
        a = np.abs(rng.standard_normal(30))
        c = residual_quantile_correlation(a, a)
        assert c.pearson_r == pytest.approx(1.0) and c.spearman_rho == pytest.approx(1.0)
        assert residual_quantile_correlation(a, 5 - a).spearman_rho == pytest.approx(-1.0)

    def test_zero_variance_flagged(self, rng):
        c = residual_quantile_correlation(rng.uniform(size=5), np.ones(5))
        assert not c.defined and math.isnan(c.pearson_r) and math.isnan(c.spearman_rho)

    def test_against_rank_oracle(self):
        r = np.random.default_rng(50)
        a = np.abs(r.standard_normal(50))
        b = np.round(r.uniform(0, 1, 50), 1)  # ties on purpose
        c = residual_quantile_correlation(a, b)
        assert abs(c.pearson_r - pearson_oracle(list(a), list(b))) < 1e-12
        assert abs(c.spearman_rho - pearson_oracle(rank_oracle(list(a)), rank_oracle(list(b)))) < 1e-12

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=3, max_size=40))
    def test_spearman_property(self, pairs):
        a = [float(p[0]) for p in pairs]
        b = [float(p[1]) for p in pairs]
        c = residual_quantile_correlation(a, b)
        if len(set(a)) < 2 or len(set(b)) < 2:
            assert not c.defined
        else:
            assert c.spearman_rho == pytest.approx(pearson_oracle(rank_oracle(a), rank_oracle(b)), abs=1e-12)


class TestEvaluate:
    def test_report_fields(self):
        y = np.array([0.0, 1.0, 2.0, 10.0])
        lo, hi = y - 1, y + 1
        hi[-1] = 5.0
        rep = evaluate(y, (lo, hi))
        assert rep.coverage_pct == 75.0 and rep.exceed_pct == 25.0
        assert rep.excess_mean == pytest.approx(5.0)
        assert rep.n_test == 4

    def test_timing_nonnegative(self):
        out, dt = timing(lambda: 3)
        assert out == 3 and dt >= 0


@pytest.fixture(scope="module")
def split(small_synthetic):
    ds, _ = small_synthetic
    return split_dataset(ds, SplitSpec(0.5, 0.25, 0.25, seed=2))


class TestSweep:
    def test_shape_and_columns(self, split):
        rows = hk_grid_sweep(split, "pcr", [1, 2, 3], [1, 3, 5])
        assert len(rows) == 9
        assert all(set(r) == set(SWEEP_COLUMNS) for r in rows)
        assert [(r["H"], r["k"]) for r in rows[:3]] == [(1, 1), (1, 3), (1, 5)]

    def test_fast_path_equals_naive(self, split):
        fast = hk_grid_sweep(split, "pls", [2, 3], [1, 4, 8])
        naive = hk_grid_sweep(split, "pls", [2, 3], [1, 4, 8], refit_each_cell=True)
        for a, b in zip(fast, naive):
            for c in SWEEP_COLUMNS:
                assert a[c] == b[c] or (isinstance(a[c], float) and math.isnan(a[c]) and math.isnan(b[c]))

    def test_threads_identical(self, split):
        a = hk_grid_sweep(split, "pcr", [1, 2, 3], [2, 5])
        b = hk_grid_sweep(split, "pcr", [1, 2, 3], [2, 5], threads=3)
        assert a == b

    def test_failing_cell_recorded(self, split):
        rows = hk_grid_sweep(split, "pcr", [3, 500], [5])
        assert rows[0]["error"] == "" and "exceeds" in rows[1]["error"]
