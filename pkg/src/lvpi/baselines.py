"""Reference interval methods: global split conformal, residual and pairs bootstrap."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exceptions import LVPIError, ValidationError
from .quantiles import check_alpha, empirical_quantile
from .rng import seed_sequence, stream

log = logging.getLogger(__name__)

MAX_FAILED_FRACTION = 0.10


@dataclass(frozen=True)
class BootstrapConfig:
    B: int = 1000
    seed: int = 0
    alpha: float = 0.05

    def __post_init__(self):
        if int(self.B) != self.B or self.B < 1:
            raise ValidationError(f"B must be a positive integer, got {self.B!r}")
        check_alpha(self.alpha)
        if not (0 <= int(self.seed) < 2**64):
            raise ValidationError("seed must be a 64-bit unsigned integer")


def global_conformal_halfwidth(r_cal, alpha: float = 0.05, rule: str = "higher") -> float:
    """Single (1 - alpha) quantile of the absolute calibration residuals."""
    r = np.asarray(r_cal, dtype=float).reshape(-1)
    if r.size == 0:
        raise ValidationError("no calibration residuals")
    return empirical_quantile(np.abs(r), alpha, rule)


def global_conformal_pi(y_hat, q_hat: float) -> tuple[np.ndarray, np.ndarray]:
    y_hat = np.asarray(y_hat, dtype=float)
    return y_hat - q_hat, y_hat + q_hat


def residual_bootstrap_offsets(r_cal_signed, cfg: BootstrapConfig) -> tuple[float, float]:
    """Percentile endpoints of ``B`` residuals drawn with replacement.

    The interval for any point prediction is ``y_hat + offsets``, so one draw
    serves a whole test batch.
    """
    r = np.asarray(r_cal_signed, dtype=float).reshape(-1)
    if r.size == 0:
        raise ValidationError("no calibration residuals")
    rng = stream(cfg.seed, "residual_bootstrap")
    draws = rng.choice(r, size=int(cfg.B), replace=True)
    lo, hi = np.quantile(draws, [cfg.alpha / 2, 1 - cfg.alpha / 2])
    return float(lo), float(hi)


def residual_bootstrap_pi(y_hat_star, r_cal_signed, cfg: BootstrapConfig):
    lo, hi = residual_bootstrap_offsets(r_cal_signed, cfg)
    y = np.asarray(y_hat_star, dtype=float)
    return y + lo, y + hi


@dataclass(frozen=True)
class PairsBootstrapResult:
    lo: np.ndarray
    hi: np.ndarray
    n_failed: int
    B: int


def replicate_streams(seed: int, B: int) -> list[np.random.SeedSequence]:
    """Independent child seed sequences, one per replicate index."""
    return seed_sequence(seed, "pairs_bootstrap").spawn(int(B))


def pairs_bootstrap_pi(
    X_train,
    y_train,
    refit: Callable[[np.ndarray, np.ndarray], object],
    X_test,
    cfg: BootstrapConfig,
    threads: int = 1,
) -> PairsBootstrapResult:
    """Resample training pairs, refit the whole pipeline, take percentile endpoints.

    ``refit(X, y)`` must return an object with ``predict``; standardization is
    part of the refit. Replicates that raise a package error or a linear-algebra
    error are skipped; more than 10% skipped is an error.
    """
    X_train = np.asarray(X_train, dtype=float)
    y_train = np.asarray(y_train, dtype=float).reshape(-1)
    X_test = np.asarray(X_test, dtype=float)
    n = X_train.shape[0]
    if n == 0 or n != y_train.shape[0]:
        raise ValidationError("training set is empty or X/y lengths differ")
    streams = replicate_streams(cfg.seed, cfg.B)

    def one(b: int):
        rng = np.random.default_rng(streams[b])
        idx = rng.integers(0, n, size=n)
        try:
            model = refit(X_train[idx], y_train[idx])
            return np.asarray(model.predict(X_test), dtype=float)
        except (LVPIError, np.linalg.LinAlgError) as exc:
            log.debug("pairs bootstrap replicate %d failed: %s", b, exc)
            return None

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            preds = list(ex.map(one, range(cfg.B)))
    else:
        preds = [one(b) for b in range(cfg.B)]

    ok = [p for p in preds if p is not None]
    n_failed = cfg.B - len(ok)
    if n_failed > MAX_FAILED_FRACTION * cfg.B:
        raise LVPIError(f"{n_failed} of {cfg.B} bootstrap refits failed")
    P = np.vstack(ok)
    lo, hi = np.quantile(P, [cfg.alpha / 2, 1 - cfg.alpha / 2], axis=0)
    return PairsBootstrapResult(lo=lo, hi=hi, n_failed=n_failed, B=cfg.B)
