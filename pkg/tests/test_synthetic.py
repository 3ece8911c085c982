import numpy as np
import pytest

from lvpi.data import SplitSpec, apply_standardizer, fit_standardizer, split_dataset
from lvpi.exceptions import ValidationError
from lvpi.linear import fit_pca
from lvpi.models import fit_model
from lvpi.synthetic import NoiseSpec, SyntheticSpec, generate


@pytest.fixture(scope="module")
def big():
    return generate(SyntheticSpec(n=10_000, seed=0))


class TestNoise:
    def test_ramp(self):
        s = NoiseSpec(0.1, 0.5, pivot=0.0, slope=2.0)
        np.testing.assert_allclose(s.sd(np.array([-3.0, 0.0, 1.0, 2.0, 9.0])), [0.1, 0.1, 0.3, 0.5, 0.5])

    def test_logistic_midpoint(self):
        s = NoiseSpec(0.0, 1.0, transition="logistic")
        assert s.sd(np.array([0.0]))[0] == pytest.approx(0.5)

    def test_validation(self):
        with pytest.raises(ValidationError):
            NoiseSpec(0.5, 0.1)
        with pytest.raises(ValidationError):
            NoiseSpec(transition="cubic")


class TestGenerate:
    def test_defaults(self):
        spec = SyntheticSpec()
        assert spec.response_coeffs == (-0.9, 0.3, -0.2)
        assert (spec.n, spec.m) == (10_000, 66)

    def test_bit_reproducible(self):
        a, ta = generate(SyntheticSpec(n=300, seed=5))
        b, tb = generate(SyntheticSpec(n=300, seed=5))
        np.testing.assert_array_equal(a.X, b.X)
        np.testing.assert_array_equal(a.y, b.y)
        np.testing.assert_array_equal(ta.noise, tb.noise)
        c, _ = generate(SyntheticSpec(n=300, seed=6))
        assert not np.array_equal(a.y, c.y)

    def test_low_noise_below_pivot(self, big):
        _, truth = big
        below = truth.scores[:, 0] < 0
        np.testing.assert_array_equal(truth.noise_sd[below], 0.05)

    def test_top3_variance_share(self, big):
        ds, _ = big
        st = fit_standardizer(ds.X)
        Xt = apply_standardizer(st, ds.X)
        lam = fit_pca(Xt, 10).eigenvalues
        total = Xt.var(axis=0, ddof=1).sum()
        assert lam[:3].sum() / total >= 0.99

    def test_coefficients_recovered(self, big):
        ds, truth = big
        A = np.column_stack([np.ones(ds.n), truth.scores])
        coef, *_ = np.linalg.lstsq(A, ds.y, rcond=None)
        resid = ds.y - A @ coef
        s2 = resid @ resid / (ds.n - 4)
        se = np.sqrt(s2 * np.diag(np.linalg.inv(A.T @ A)))
        assert np.all(np.abs(coef[1:] - [-0.9, 0.3, -0.2]) <= 3 * se[1:])

    def test_group_noise_level(self, big):
        ds, truth = big
        eps = ds.y - truth.scores @ [-0.9, 0.3, -0.2]
        below = truth.scores[:, 0] < 0
        assert abs(eps[below].std(ddof=1) - 0.05) <= 0.1 * 0.05

    def test_noiseless_limit(self):
        ds, _ = generate(SyntheticSpec(n=2000, seed=1, noise=NoiseSpec(0.0, 0.0)))
        sp = split_dataset(ds, SplitSpec(0.5, 0.25, 0.25, seed=1))
        pred = fit_model("pcr", sp.train.X, sp.train.y, 3).predict(sp.test.X)
        y = sp.test.y
        r2 = 1 - np.sum((y - pred) ** 2) / np.sum((y - y.mean()) ** 2)
        assert r2 > 0.999

    def test_infeasible_background(self):
        with pytest.raises(ValidationError, match="background_noise"):
            generate(SyntheticSpec(n=50, background_noise=1.0))

    def test_spec_validation(self):
        with pytest.raises(ValidationError):
            SyntheticSpec(m=2)
        with pytest.raises(ValidationError):
            SyntheticSpec(latent_strengths=(1.0, 0.0, 1.0))
