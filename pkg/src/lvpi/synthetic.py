"""Semi-synthetic benchmark: latent-factor spectra with heteroscedastic response.

Rows play the role of pixels in scan order. Three latent scores drive the
predictors, the response is linear in those scores, and the noise level grows
with the first score. ``spatial_drift`` shifts the mean of the first score
linearly along the row order (from ``-drift`` to ``+drift``), so contiguous
train / calibration / test regions see different amounts of high-noise
samples, as a scene split into spatial regions would.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .data import Dataset
from .exceptions import ValidationError
from .rng import stream

TARGET_TOP3_SHARE = 0.99


@dataclass(frozen=True)
class NoiseSpec:
    sigma_lo: float = 0.05
    sigma_hi: float = 0.5
    transition: str = "piecewise_linear"
    pivot: float = 0.0
    slope: float = 2.0

    def __post_init__(self):
        if not (0 <= self.sigma_lo <= self.sigma_hi):
            raise ValidationError("need 0 <= sigma_lo <= sigma_hi")
        if self.transition not in ("piecewise_linear", "logistic"):
            raise ValidationError(f"unknown transition {self.transition!r}")
        if not self.slope > 0:
            raise ValidationError("slope must be positive")

    def sd(self, t1: np.ndarray) -> np.ndarray:
        """Noise standard deviation as a function of the first latent score.

        ``piecewise_linear``: sigma_lo below ``pivot``, linear ramp reaching
        sigma_hi at ``pivot + slope``. ``logistic``: smooth step centred on
        ``pivot`` with scale ``slope / 4`` (same mid-slope as the ramp).
        """
        z = (np.asarray(t1, dtype=float) - self.pivot) / self.slope
        if self.transition == "piecewise_linear":
            s = np.clip(z, 0.0, 1.0)
        else:
            s = 1.0 / (1.0 + np.exp(-4.0 * z))
        return self.sigma_lo + (self.sigma_hi - self.sigma_lo) * s


@dataclass(frozen=True)
class SyntheticSpec:
    n: int = 10_000
    m: int = 66
    seed: int = 0
    latent_strengths: tuple[float, float, float] = (0.85, 0.10, 0.05)
    response_coeffs: tuple[float, float, float] = (-0.9, 0.3, -0.2)
    noise: NoiseSpec = NoiseSpec()
    background_noise: float = 0.01
    spatial_drift: float = 0.9

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("n must be positive")
        if self.m < 3:
            raise ValidationError("need m >= 3 predictors for three latent factors")
        if len(self.latent_strengths) != 3 or any(not s > 0 for s in self.latent_strengths):
            raise ValidationError("latent_strengths must be three positive numbers")
        if len(self.response_coeffs) != 3:
            raise ValidationError("response_coeffs must have three entries")
        if self.background_noise < 0:
            raise ValidationError("background_noise must be nonnegative")
        if not (0 <= int(self.seed) < 2**64):
            raise ValidationError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "latent_strengths", tuple(float(s) for s in self.latent_strengths))
        object.__setattr__(self, "response_coeffs", tuple(float(c) for c in self.response_coeffs))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class GroundTruth:
    scores: np.ndarray
    noise_sd: np.ndarray
    noise: np.ndarray


def expected_top3_share(loadings: np.ndarray, score_var: np.ndarray, bg: float) -> float:
    """Signal share of variance after unit-variance scaling of every column."""
    signal = (loadings**2) @ score_var
    return float(np.mean(signal / (signal + bg**2)))


def generate(spec: SyntheticSpec) -> tuple[Dataset, GroundTruth]:
    rng = stream(spec.seed, "synthetic")
    n, m = spec.n, spec.m
    strengths = np.asarray(spec.latent_strengths)
    strengths = strengths / strengths.sum()

    Q, _ = np.linalg.qr(rng.standard_normal((m, 3)))
    loadings = Q * np.sqrt(strengths * m)
    pos = np.arange(n) / max(n - 1, 1)
    drift = spec.spatial_drift * (2.0 * pos - 1.0)
    score_var = np.array([1.0 + np.var(drift), 1.0, 1.0])
    share = expected_top3_share(loadings, score_var, spec.background_noise)
    if share < TARGET_TOP3_SHARE:
        raise ValidationError(
            f"background_noise={spec.background_noise} leaves the three latent factors "
            f"only {share:.4f} of the scaled variance (need >= {TARGET_TOP3_SHARE}); "
            "lower background_noise or raise m"
        )

    T = rng.standard_normal((n, 3))
    T[:, 0] += drift
    X = T @ loadings.T + spec.background_noise * rng.standard_normal((n, m))
    sd = spec.noise.sd(T[:, 0])
    eta = sd * rng.standard_normal(n)
    y = T @ np.asarray(spec.response_coeffs) + eta
    names = tuple(f"band{j + 1:03d}" for j in range(m))
    return Dataset(X=X, y=y, feature_names=names), GroundTruth(scores=T, noise_sd=sd, noise=eta)
