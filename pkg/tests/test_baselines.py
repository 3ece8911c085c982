import threading

import numpy as np
import pytest

from lvpi.baselines import (
    BootstrapConfig,
    global_conformal_halfwidth,
    global_conformal_pi,
    pairs_bootstrap_pi,
    replicate_streams,
    residual_bootstrap_pi,
)
from lvpi.exceptions import LVPIError, SingularityError, ValidationError
from lvpi.models import fit_model


class TestGlobalConformal:
    def test_zero_residuals(self):
        assert global_conformal_halfwidth(np.zeros(20)) == 0.0

    def test_order_statistic(self):
        assert global_conformal_halfwidth(np.arange(1, 101), 0.05) == 95
        assert global_conformal_halfwidth(-np.arange(1, 101), 0.05) == 95

    def test_interval(self):
        lo, hi = global_conformal_pi(np.array([1.0, 2.0]), 0.5)
        np.testing.assert_array_equal(lo, [0.5, 1.5])
        np.testing.assert_array_equal(hi, [1.5, 2.5])

    def test_empty(self):
        with pytest.raises(ValidationError):
            global_conformal_halfwidth([])


class TestResidualBootstrap:
    def test_zero_residuals(self):
        lo, hi = residual_bootstrap_pi(np.array([3.0]), np.zeros(10), BootstrapConfig(B=50))
        assert lo[0] == hi[0] == 3.0

    def test_symmetric_pair(self):
        a = 0.8
        lo, hi = residual_bootstrap_pi(np.array([1.0]), np.array([-a, a]), BootstrapConfig(B=4000, seed=2))
        # with 4000 draws both values appear far more than 2.5% of the time
        assert lo[0] == pytest.approx(1.0 - a, abs=1e-12)
        assert hi[0] == pytest.approx(1.0 + a, abs=1e-12)

    def test_seeded(self, rng):
        r = rng.standard_normal(100)
        cfg = BootstrapConfig(B=300, seed=9)
        a = residual_bootstrap_pi(np.zeros(3), r, cfg)
        b = residual_bootstrap_pi(np.zeros(3), r, cfg)
        np.testing.assert_array_equal(a[0], b[0])

    def test_config_validation(self):
        with pytest.raises(ValidationError):
            BootstrapConfig(B=0)
        with pytest.raises(ValidationError):
            BootstrapConfig(alpha=1.5)


def _linear_data(rng, n=80, noise=0.0):
    Z = rng.standard_normal((n, 2))
    X = Z @ rng.standard_normal((2, 5))
    y = Z @ [1.0, -0.5] + noise * rng.standard_normal(n)
    return X, y


def _pcr(X, y):
    return fit_model("pcr", X, y, 2)


class TestPairsBootstrap:
    def test_noiseless_collapse(self, rng):
        X, y = _linear_data(rng)
        res = pairs_bootstrap_pi(X, y, _pcr, X[:10], BootstrapConfig(B=40))
        assert np.max(res.hi - res.lo) < 1e-8

    def test_single_replicate(self, rng):
        X, y = _linear_data(rng, noise=0.5)
        res = pairs_bootstrap_pi(X, y, _pcr, X[:5], BootstrapConfig(B=1))
        np.testing.assert_array_equal(res.lo, res.hi)

    def test_threads_do_not_change_results(self, rng):
        X, y = _linear_data(rng, noise=0.3)
        cfg = BootstrapConfig(B=30, seed=4)
        a = pairs_bootstrap_pi(X, y, _pcr, X[:7], cfg, threads=1)
        b = pairs_bootstrap_pi(X, y, _pcr, X[:7], cfg, threads=4)
        np.testing.assert_array_equal(a.lo, b.lo)
        np.testing.assert_array_equal(a.hi, b.hi)

    def test_streams_are_distinct_and_stable(self):
        s1 = [np.random.default_rng(s).integers(0, 2**32) for s in replicate_streams(0, 5)]
        s2 = [np.random.default_rng(s).integers(0, 2**32) for s in replicate_streams(0, 5)]
        assert s1 == s2 and len(set(s1)) == 5

    def test_failures_skipped_then_fatal(self, rng):
        X, y = _linear_data(rng, noise=0.3)
        lock = threading.Lock()
        calls = {"n": 0}

        def flaky(every):
            def refit(Xb, yb):
                with lock:
                    calls["n"] += 1
                    c = calls["n"]
                if c % every == 0:
                    raise SingularityError("forced")
                return _pcr(Xb, yb)

            return refit

        res = pairs_bootstrap_pi(X, y, flaky(20), X[:3], BootstrapConfig(B=40))
        assert res.n_failed == 2
        calls["n"] = 0
        with pytest.raises(LVPIError, match="failed"):
            pairs_bootstrap_pi(X, y, flaky(5), X[:3], BootstrapConfig(B=40))
