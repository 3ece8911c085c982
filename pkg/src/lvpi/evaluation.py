"""Coverage, width, exceedance and correlation diagnostics, plus H x k sweeps."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.stats import rankdata

from .calibration import calibrate, intervals_from_scores, recalibrate
from .data import SplitDataset
from .exceptions import LVPIError, ValidationError
from .models import fit_model


def _bounds(intervals) -> tuple[np.ndarray, np.ndarray]:
    """Accept a PIBatch, an (n, 2) array or a ``(lo, hi)`` pair."""
    if hasattr(intervals, "lo") and hasattr(intervals, "hi"):
        lo, hi = intervals.lo, intervals.hi
    elif isinstance(intervals, tuple) and len(intervals) == 2:
        lo, hi = intervals
    else:
        a = np.asarray(intervals, dtype=float)
        if a.ndim != 2 or a.shape[1] != 2:
            raise ValidationError(f"intervals must be (n, 2), got shape {a.shape}")
        lo, hi = a[:, 0], a[:, 1]
    lo = np.asarray(lo, dtype=float).reshape(-1)
    hi = np.asarray(hi, dtype=float).reshape(-1)
    if lo.shape != hi.shape:
        raise ValidationError("lower and upper bounds differ in length")
    return lo, hi


def _check_len(y, lo):
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape[0] != lo.shape[0]:
        raise ValidationError(f"{y.shape[0]} responses but {lo.shape[0]} intervals")
    if y.shape[0] == 0:
        raise ValidationError("no samples to evaluate")
    return y


def _covered(y, lo, hi):
    return (y >= lo) & (y <= hi)


def empirical_coverage(y_test, intervals) -> float:
    """Percentage of responses inside their interval, endpoints included."""
    lo, hi = _bounds(intervals)
    y = _check_len(y_test, lo)
    return 100.0 * np.count_nonzero(_covered(y, lo, hi)) / y.shape[0]


def width_stats(intervals) -> tuple[float, float]:
    lo, hi = _bounds(intervals)
    if lo.size == 0:
        raise ValidationError("no intervals")
    w = hi - lo
    return float(np.mean(w)), float(np.median(w))


def exceedance_stats(y_test, intervals) -> tuple[float, float]:
    """Percent of samples outside their interval and their mean distance beyond it.

    For symmetric intervals the distance is ``|y - y_hat| - q``. With nothing
    outside the mean is reported as 0.
    """
    lo, hi = _bounds(intervals)
    y = _check_len(y_test, lo)
    out = ~_covered(y, lo, hi)
    pct = 100.0 * np.count_nonzero(out) / y.shape[0]
    if not out.any():
        return pct, 0.0
    excess = np.maximum(lo - y, y - hi)[out]
    return pct, float(excess.mean())


def residual_mean_over(y_test, intervals) -> float:
    """Mean absolute residual (about the interval centre) of samples outside."""
    lo, hi = _bounds(intervals)
    y = _check_len(y_test, lo)
    out = ~_covered(y, lo, hi)
    if not out.any():
        return 0.0
    return float(np.abs(y - 0.5 * (lo + hi))[out].mean())


class Correlation(NamedTuple):
    pearson_r: float
    spearman_rho: float
    defined: bool


def _pearson(a, b) -> float:
    a = a - a.mean()
    b = b - b.mean()
    return float((a @ b) / math.sqrt((a @ a) * (b @ b)))


def residual_quantile_correlation(abs_residuals, half_widths) -> Correlation:
    """Pearson on values and Spearman (Pearson on average ranks).

    Zero variance on either side gives NaNs with ``defined=False``.
    """
    a = np.asarray(abs_residuals, dtype=float).reshape(-1)
    b = np.asarray(half_widths, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise ValidationError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    if a.size < 3:
        raise ValidationError("need at least three samples for a correlation")
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        return Correlation(math.nan, math.nan, False)
    return Correlation(_pearson(a, b), _pearson(rankdata(a), rankdata(b)), True)


@dataclass(frozen=True)
class EvalReport:
    coverage_pct: float
    mean_width: float
    median_width: float
    exceed_pct: float
    excess_mean: float
    residual_mean_over: float
    pearson_r: float
    spearman_rho: float
    correlation_defined: bool
    wall_time_s: float
    n_test: int

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(y_test, intervals, y_hat=None, wall_time_s: float = math.nan) -> EvalReport:
    """All diagnostics for one set of intervals.

    Correlations use ``|y - y_hat|`` against the half-width; ``y_hat``
    defaults to the interval centre.
    """
    lo, hi = _bounds(intervals)
    y = _check_len(y_test, lo)
    centre = 0.5 * (lo + hi) if y_hat is None else np.asarray(y_hat, dtype=float).reshape(-1)
    mean_w, med_w = width_stats((lo, hi))
    pct_over, excess = exceedance_stats(y, (lo, hi))
    corr = (
        residual_quantile_correlation(np.abs(y - centre), 0.5 * (hi - lo))
        if y.shape[0] >= 3
        else Correlation(math.nan, math.nan, False)
    )
    return EvalReport(
        coverage_pct=empirical_coverage(y, (lo, hi)),
        mean_width=mean_w,
        median_width=med_w,
        exceed_pct=pct_over,
        excess_mean=excess,
        residual_mean_over=residual_mean_over(y, (lo, hi)),
        pearson_r=corr.pearson_r,
        spearman_rho=corr.spearman_rho,
        correlation_defined=corr.defined,
        wall_time_s=float(wall_time_s),
        n_test=int(y.shape[0]),
    )


def timing(run: Callable[[], object]) -> tuple[object, float]:
    """Run ``run()`` once and return ``(result, wall seconds)``."""
    t0 = time.perf_counter()
    out = run()
    return out, time.perf_counter() - t0


# ------------------------------------------------------------------ H x k sweep

SWEEP_COLUMNS = (
    "H",
    "k",
    "coverage_pct",
    "mean_width",
    "median_width",
    "exceed_pct",
    "excess_mean",
    "residual_mean_over",
    "pearson_r",
    "spearman_rho",
    "n_sparse_cells",
    "n_fallback_cells",
    "error",
)


def _row(H, k, cm, report: EvalReport | None, error: str = "") -> dict:
    row = {c: math.nan for c in SWEEP_COLUMNS}
    row.update(H=H, k=k, error=error)
    if report is not None:
        for c in SWEEP_COLUMNS[2:10]:
            row[c] = getattr(report, c)
    if cm is not None:
        row["n_sparse_cells"] = len(cm.table.sparse_cells)
        row["n_fallback_cells"] = int(np.count_nonzero(cm.table.fallback_from >= 0))
    return row


def hk_grid_sweep(
    split: SplitDataset,
    kind: str,
    H_values: Sequence[int],
    k_values: Sequence[int],
    alpha: float = 0.05,
    scale: bool = True,
    kernel=None,
    rule: str = "higher",
    refit_each_cell: bool = False,
    threads: int = 1,
) -> list[dict]:
    """Evaluate LV-localized intervals over every (H, k) pair.

    By default each H is fitted and projected once and only the grid/table is
    rebuilt per k; ``refit_each_cell=True`` runs the full pipeline per cell.
    A failing cell is recorded with its error message and the sweep goes on.
    """
    H_values = list(H_values)
    k_values = list(k_values)
    if not H_values or not k_values:
        raise ValidationError("H and k ranges must be nonempty")
    tr, ca, te = split.train, split.cal, split.test

    def naive_cell(H, k):
        try:
            model = fit_model(kind, tr.X, tr.y, H, scale=scale, kernel=kernel)
            cm = calibrate(model, ca.X, ca.y, k, alpha, rule=rule)
            pis = cm.predict_with_pi(te.X)
            return _row(H, k, cm, evaluate(te.y, pis, y_hat=pis.y_hat))
        except LVPIError as exc:
            return _row(H, k, None, None, str(exc))

    def per_H(H):
        if refit_each_cell:
            return [naive_cell(H, k) for k in k_values]
        try:
            model = fit_model(kind, tr.X, tr.y, H, scale=scale, kernel=kernel)
            T_cal = model.scores(ca.X)
            r = np.abs(ca.y - model.predict(ca.X))
            T_te = model.scores(te.X)
            y_hat = model.predict(te.X)
            base = calibrate(model, ca.X, ca.y, k_values[0], alpha, rule=rule)
        except LVPIError as exc:
            return [_row(H, k, None, None, str(exc)) for k in k_values]
        rows = []
        for k in k_values:
            try:
                cm = recalibrate(base, T_cal, r, k)
                pis = intervals_from_scores(cm, T_te, y_hat)
                rows.append(_row(H, k, cm, evaluate(te.y, pis, y_hat=y_hat)))
            except LVPIError as exc:
                rows.append(_row(H, k, None, None, str(exc)))
        return rows

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            blocks = list(ex.map(per_H, H_values))
    else:
        blocks = [per_H(H) for H in H_values]
    return [row for block in blocks for row in block]
