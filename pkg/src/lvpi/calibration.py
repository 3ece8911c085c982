"""LV-localized prediction-interval calibration.

Calibration scores of each latent variable are cut into ``k`` equal-width
LV intervals. Every cell stores an empirical quantile of the absolute
calibration residuals that fall into it. A new sample gets the
explained-variance weighted sum of the quantiles of the cells it lands in,
one per LV, and that sum is the half-width of its symmetric interval.

Cell indices are 0-based (``0 .. k-1``). LV labels reported in flags and
messages are 1-based (``1 .. H``).
"""

from __future__ import annotations

import warnings
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .exceptions import NotCalibratedError, ValidationError
from .linear import explained_variance_weights
from .quantiles import QUANTILE_RULES, check_alpha, empirical_quantile

MIN_CELL_OCCUPANCY = 10


@dataclass(frozen=True)
class LVIntervalGrid:
    """Per-LV cell edges, shape (H, k + 1)."""

    edges: np.ndarray

    @property
    def n_lvs(self) -> int:
        return self.edges.shape[0]

    @property
    def k(self) -> int:
        return self.edges.shape[1] - 1

    @property
    def mins(self) -> np.ndarray:
        return self.edges[:, 0]

    @property
    def maxs(self) -> np.ndarray:
        return self.edges[:, -1]

    def assign(self, h: int, t) -> np.ndarray:
        return assign_interval(self, h, t)

    def assign_all(self, T: np.ndarray) -> np.ndarray:
        T = _scores(T, self.n_lvs)
        return np.column_stack([assign_interval(self, h, T[:, h]) for h in range(self.n_lvs)])

    def outside(self, T: np.ndarray) -> np.ndarray:
        """Mask of scores beyond the calibration range (boundary-clamped)."""
        T = _scores(T, self.n_lvs)
        return (T < self.mins) | (T > self.maxs)


def _scores(T, H=None) -> np.ndarray:
    T = np.asarray(T, dtype=float)
    if T.ndim == 1:
        T = T.reshape(1, -1) if H is not None and T.shape[0] == H else T.reshape(-1, 1)
    if T.ndim != 2:
        raise ValidationError(f"scores must be 2-D, got shape {T.shape}")
    if H is not None and T.shape[1] != H:
        raise ValidationError(f"scores have {T.shape[1]} columns, expected {H}")
    if not np.all(np.isfinite(T)):
        raise ValidationError("scores contain non-finite values")
    return T


def build_grid(T_cal: np.ndarray, k: int) -> LVIntervalGrid:
    T = _scores(T_cal)
    if int(k) != k or k < 1:
        raise ValidationError(f"k must be a positive integer, got {k!r}")
    if T.shape[0] < 1:
        raise ValidationError("calibration scores are empty")
    k = int(k)
    lo = T.min(axis=0)
    hi = T.max(axis=0)
    frac = np.arange(k + 1) / k
    edges = lo[:, None] + frac[None, :] * (hi - lo)[:, None]
    edges[:, -1] = hi
    return LVIntervalGrid(edges=edges)


def assign_interval(grid: LVIntervalGrid, h: int, t):
    """Cell index of score(s) ``t`` on LV ``h`` (both 0-based).

    Cells are half-open ``[e_i, e_{i+1})`` except the last, which also holds
    the maximum. Scores below the minimum go to cell 0 and scores above the
    maximum to cell ``k - 1``. A zero-width LV has a single effective cell 0.
    """
    e = grid.edges[h]
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if e[-1] == e[0]:
        idx = np.zeros(t.shape, dtype=int)
    else:
        idx = np.searchsorted(e[1:-1], t, side="right")
    return int(idx[0]) if scalar else idx


def compute_residuals(y, y_hat) -> np.ndarray:
    y = np.asarray(y, dtype=float).reshape(-1)
    y_hat = np.asarray(y_hat, dtype=float).reshape(-1)
    if y.shape != y_hat.shape:
        raise ValidationError(f"length mismatch: {y.shape[0]} vs {y_hat.shape[0]}")
    return np.abs(y - y_hat)


@dataclass(frozen=True)
class QuantileTable:
    """Per-cell residual quantiles on a grid.

    ``q`` and ``counts`` are (H, k). ``fallback_from[h, i]`` is the cell whose
    quantile was borrowed when cell ``i`` of LV ``h`` had no calibration
    samples, else -1. ``sparse_cells`` lists ``(h, i, count)`` for cells with
    fewer than ``MIN_CELL_OCCUPANCY`` samples (0-based, diagnostic only).
    """

    grid: LVIntervalGrid
    q: np.ndarray
    counts: np.ndarray
    alpha: float
    rule: str
    fallback_from: np.ndarray
    sparse_cells: tuple = ()

    @property
    def n_lvs(self) -> int:
        return self.q.shape[0]

    @property
    def k(self) -> int:
        return self.q.shape[1]

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.edges.tolist(),
            "quantiles": self.q.tolist(),
            "counts": self.counts.tolist(),
            "fallback_from": self.fallback_from.tolist(),
            "alpha": self.alpha,
            "quantile_rule": self.rule,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QuantileTable":
        counts = np.asarray(d["counts"], dtype=int)
        return cls(
            grid=LVIntervalGrid(edges=np.asarray(d["grid"], dtype=float)),
            q=np.asarray(d["quantiles"], dtype=float),
            counts=counts,
            alpha=float(d["alpha"]),
            rule=str(d["quantile_rule"]),
            fallback_from=np.asarray(d["fallback_from"], dtype=int),
            sparse_cells=_sparse(counts),
        )


def _sparse(counts) -> tuple:
    H, k = counts.shape
    return tuple(
        (h, i, int(counts[h, i]))
        for h in range(H)
        for i in range(k)
        if counts[h, i] < MIN_CELL_OCCUPANCY
    )


def _nearest_nonempty(counts_h: np.ndarray, i: int) -> int:
    nonempty = np.flatnonzero(counts_h > 0)
    d = np.abs(nonempty - i)
    # argmin returns the first minimum, i.e. the lower index on ties
    return int(nonempty[np.argmin(d)])


def build_quantile_table(
    grid: LVIntervalGrid, T_cal: np.ndarray, r, alpha: float, rule: str = "higher"
) -> QuantileTable:
    T = _scores(T_cal, grid.n_lvs)
    r = np.asarray(r, dtype=float).reshape(-1)
    if r.shape[0] != T.shape[0]:
        raise ValidationError(f"{r.shape[0]} residuals for {T.shape[0]} score rows")
    if np.any(r < 0):
        raise ValidationError("residuals must be absolute (nonnegative)")
    alpha = check_alpha(alpha)
    if rule not in QUANTILE_RULES:
        raise ValidationError(f"unknown quantile rule {rule!r}")
    H, k = grid.n_lvs, grid.k
    cells = grid.assign_all(T)
    q = np.zeros((H, k))
    counts = np.zeros((H, k), dtype=int)
    fallback = np.full((H, k), -1, dtype=int)
    for h in range(H):
        counts[h] = np.bincount(cells[:, h], minlength=k)
        assert counts[h].sum() == T.shape[0]
        assert counts[h].any(), "grid built from these scores cannot have an empty LV"
        for i in range(k):
            if counts[h, i]:
                q[h, i] = empirical_quantile(r[cells[:, h] == i], alpha, rule)
        for i in np.flatnonzero(counts[h] == 0):
            j = _nearest_nonempty(counts[h], i)
            q[h, i] = q[h, j]
            fallback[h, i] = j
    return QuantileTable(
        grid=grid,
        q=q,
        counts=counts,
        alpha=alpha,
        rule=rule,
        fallback_from=fallback,
        sparse_cells=_sparse(counts),
    )


def weighted_quantile(table: QuantileTable, weights, t_row) -> float | np.ndarray:
    """Half-width ``sum_h w_h * q[h, cell_h(t)]`` for one score row or a batch."""
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape[0] != table.n_lvs:
        raise ValidationError(f"{w.shape[0]} weights for {table.n_lvs} LVs")
    single = np.ndim(t_row) == 1
    T = _scores(np.atleast_2d(t_row), table.n_lvs)
    cells = table.grid.assign_all(T)
    Q = table.q[np.arange(table.n_lvs)[None, :], cells]
    qj = Q @ w
    return float(qj[0]) if single else qj


@dataclass(frozen=True)
class PIResult:
    y_hat: float
    q: float
    lo: float
    hi: float
    clamped_lvs: tuple[int, ...] = ()
    fallback_lvs: tuple[int, ...] = ()

    @property
    def width(self) -> float:
        return self.hi - self.lo


def prediction_interval(y_hat: float, q_j: float) -> PIResult:
    if not q_j >= 0:
        raise ValidationError(f"half-width must be nonnegative, got {q_j!r}")
    return PIResult(y_hat=float(y_hat), q=float(q_j), lo=y_hat - q_j, hi=y_hat + q_j)


@dataclass(frozen=True)
class PIBatch(Sequence):
    """Vectorized prediction intervals; indexing yields :class:`PIResult`.

    ``clamped`` and ``fallback`` are (n, H) boolean masks.
    """

    y_hat: np.ndarray
    q: np.ndarray
    clamped: np.ndarray
    fallback: np.ndarray
    cells: np.ndarray = field(repr=False)

    @property
    def lo(self) -> np.ndarray:
        return self.y_hat - self.q

    @property
    def hi(self) -> np.ndarray:
        return self.y_hat + self.q

    @property
    def intervals(self) -> np.ndarray:
        return np.column_stack([self.lo, self.hi])

    def __len__(self) -> int:
        return self.y_hat.shape[0]

    def __getitem__(self, j):
        if isinstance(j, slice):
            return [self[i] for i in range(*j.indices(len(self)))]
        return PIResult(
            y_hat=float(self.y_hat[j]),
            q=float(self.q[j]),
            lo=float(self.lo[j]),
            hi=float(self.hi[j]),
            clamped_lvs=tuple(int(h) + 1 for h in np.flatnonzero(self.clamped[j])),
            fallback_lvs=tuple(int(h) + 1 for h in np.flatnonzero(self.fallback[j])),
        )


@dataclass(frozen=True)
class CalibratedModel:
    model: object
    table: QuantileTable
    weights: np.ndarray

    @property
    def alpha(self) -> float:
        return self.table.alpha

    @property
    def n_components(self) -> int:
        return self.table.n_lvs

    def predict_with_pi(self, X) -> PIBatch:
        return predict_with_pi(self, X)

    def to_dict(self) -> dict:
        doc = self.model.to_dict()
        doc["calibration"] = {**self.table.to_dict(), "weights": self.weights.tolist()}
        return doc


def calibrate(
    model,
    X_cal,
    y_cal,
    k: int,
    alpha: float = 0.05,
    H: int | None = None,
    rule: str = "higher",
) -> CalibratedModel:
    """Project the calibration set, grid its scores and tabulate residual quantiles."""
    if H is not None and H != model.n_components:
        raise ValidationError(
            f"H={H} does not match the fitted model's {model.n_components} components"
        )
    alpha = check_alpha(alpha)
    if alpha == 0.0:
        warnings.warn(
            "alpha=0: every cell quantile is the cell maximum", UserWarning, stacklevel=2
        )
    X_cal = np.asarray(X_cal, dtype=float)
    y_cal = np.asarray(y_cal, dtype=float).reshape(-1)
    if X_cal.ndim != 2 or X_cal.shape[0] == 0:
        raise ValidationError("calibration set is empty")
    if X_cal.shape[0] != y_cal.shape[0]:
        raise ValidationError(f"{X_cal.shape[0]} calibration rows but {y_cal.shape[0]} responses")
    T_cal = model.scores(X_cal)
    r = compute_residuals(y_cal, model.predict(X_cal))
    grid = build_grid(T_cal, k)
    table = build_quantile_table(grid, T_cal, r, alpha, rule)
    weights = explained_variance_weights(model.lv_variance)
    return CalibratedModel(model=model, table=table, weights=weights)


def recalibrate(cm: CalibratedModel, T_cal, r, k: int, alpha=None, rule=None) -> CalibratedModel:
    """New grid/table from precomputed calibration scores and residuals.

    Lets a sweep over ``k`` reuse one fitted model and one projection.
    """
    grid = build_grid(T_cal, k)
    table = build_quantile_table(
        grid,
        T_cal,
        r,
        cm.table.alpha if alpha is None else alpha,
        cm.table.rule if rule is None else rule,
    )
    return CalibratedModel(model=cm.model, table=table, weights=cm.weights)


def calibrated_from_dict(doc: dict) -> CalibratedModel:
    from .models import model_from_dict

    if "calibration" not in doc:
        raise NotCalibratedError(
            "model has no calibration table; run `lvpi calibrate` on it first"
        )
    c = doc["calibration"]
    return CalibratedModel(
        model=model_from_dict(doc),
        table=QuantileTable.from_dict(c),
        weights=np.asarray(c["weights"], dtype=float),
    )


def predict_with_pi(cm: CalibratedModel, X) -> PIBatch:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    y_hat = np.asarray(cm.model.predict(X), dtype=float)
    return intervals_from_scores(cm, cm.model.scores(X), y_hat)


def intervals_from_scores(cm: CalibratedModel, T, y_hat) -> PIBatch:
    table = cm.table
    T = _scores(T, table.n_lvs)
    cells = table.grid.assign_all(T)
    lv = np.arange(table.n_lvs)[None, :]
    q = table.q[lv, cells] @ cm.weights
    return PIBatch(
        y_hat=np.asarray(y_hat, dtype=float),
        q=q,
        clamped=table.grid.outside(T),
        fallback=table.fallback_from[lv, cells] >= 0,
        cells=cells,
    )
