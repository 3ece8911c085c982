"""Datasets, deterministic three-way splits and train-fitted standardization."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .exceptions import ValidationError
from .rng import stream


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Dataset:
    """Predictor matrix ``X`` (n x m) with response ``y`` (n,)."""

    X: np.ndarray
    y: np.ndarray
    feature_names: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise ValidationError(f"X must be 2-D, got shape {X.shape}")
        if y.ndim != 1:
            y = y.reshape(-1)
        if X.shape[0] != y.shape[0]:
            raise ValidationError(
                f"X has {X.shape[0]} rows but y has length {y.shape[0]}"
            )
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise ValidationError(f"X must have at least one row and column, got {X.shape}")
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
            raise ValidationError("X and y must contain only finite values")
        names = self.feature_names
        if names is not None:
            names = tuple(str(s) for s in names)
            if len(names) != X.shape[1]:
                raise ValidationError(
                    f"{len(names)} feature names given for {X.shape[1]} columns"
                )
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return self.n

    def subset(self, index: np.ndarray) -> "Dataset":
        index = np.asarray(index, dtype=int)
        return _unchecked_dataset(self.X[index], self.y[index], self.feature_names)


def _unchecked_dataset(X, y, names) -> Dataset:
    # Subsets of a validated Dataset may be empty (optional partitions).
    ds = object.__new__(Dataset)
    object.__setattr__(ds, "X", _frozen(X))
    object.__setattr__(ds, "y", _frozen(y))
    object.__setattr__(ds, "feature_names", names)
    return ds


@dataclass(frozen=True)
class SplitSpec:
    """Fractions for train / calibration / test and how rows are assigned.

    ``mode="random"`` permutes rows with a seeded generator before slicing;
    ``mode="contiguous"`` slices in the original row order, which keeps
    spatially ordered data (e.g. image scan lines) in disjoint regions.
    """

    frac_train: float = 0.4
    frac_cal: float = 0.4
    frac_test: float = 0.2
    mode: str = "random"
    seed: int = 0
    allow_empty: bool = False

    def __post_init__(self):
        fr = (self.frac_train, self.frac_cal, self.frac_test)
        if any(not (0.0 <= f <= 1.0) for f in fr):
            raise ValidationError(f"split fractions must lie in [0, 1], got {fr}")
        if abs(sum(fr) - 1.0) > 1e-9:
            raise ValidationError(f"split fractions must sum to 1, got {sum(fr)!r}")
        if self.mode not in ("random", "contiguous"):
            raise ValidationError(f"unknown split mode {self.mode!r}")
        if not (0 <= int(self.seed) < 2**64):
            raise ValidationError("seed must be a 64-bit unsigned integer")

    @property
    def fractions(self) -> tuple[float, float, float]:
        return (self.frac_train, self.frac_cal, self.frac_test)


@dataclass(frozen=True)
class SplitDataset:
    train: Dataset
    cal: Dataset
    test: Dataset
    train_index: np.ndarray
    cal_index: np.ndarray
    test_index: np.ndarray


def partition_sizes(n: int, fractions: Sequence[float]) -> tuple[int, int, int]:
    """Floor each share, then hand out the remainder train -> cal -> test.

    Only partitions with a nonzero fraction receive remainder rows.
    """
    sizes = [int(math.floor(f * n + 1e-9)) for f in fractions]
    remainder = n - sum(sizes)
    eligible = [i for i, f in enumerate(fractions) if f > 0]
    j = 0
    while remainder > 0 and eligible:
        sizes[eligible[j % len(eligible)]] += 1
        remainder -= 1
        j += 1
    return tuple(sizes)  # type: ignore[return-value]


def split_dataset(ds: Dataset, spec: SplitSpec) -> SplitDataset:
    n = ds.n
    sizes = partition_sizes(n, spec.fractions)
    names = ("train", "cal", "test")
    for name, f, s in zip(names, spec.fractions, sizes):
        if s == 0 and (f > 0 or not spec.allow_empty):
            raise ValidationError(
                f"{name} partition would be empty (n={n}, fractions={spec.fractions})"
            )
    if spec.mode == "random":
        order = stream(spec.seed, "split").permutation(n)
    else:
        order = np.arange(n)
    cuts = np.cumsum(sizes)
    idx = (order[: cuts[0]], order[cuts[0] : cuts[1]], order[cuts[1] :])
    idx = tuple(np.array(i, dtype=int) for i in idx)
    for i in idx:
        i.flags.writeable = False
    return SplitDataset(
        train=ds.subset(idx[0]),
        cal=ds.subset(idx[1]),
        test=ds.subset(idx[2]),
        train_index=idx[0],
        cal_index=idx[1],
        test_index=idx[2],
    )


@dataclass(frozen=True)
class StandardizationStats:
    mean: np.ndarray
    scale: np.ndarray
    centered: bool = True
    scaled: bool = True

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        scale = np.asarray(self.scale, dtype=float).reshape(-1)
        if mean.shape != scale.shape:
            raise ValidationError("mean and scale must have the same length")
        if np.any(scale <= 0):
            raise ValidationError("scale entries must be strictly positive")
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "scale", _frozen(scale))

    @property
    def m(self) -> int:
        return self.mean.shape[0]

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "centered": bool(self.centered),
            "scaled": bool(self.scaled),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StandardizationStats":
        return cls(
            mean=np.asarray(d["mean"], dtype=float),
            scale=np.asarray(d["scale"], dtype=float),
            centered=bool(d["centered"]),
            scaled=bool(d["scaled"]),
        )


def fit_standardizer(
    X_train: np.ndarray, centered: bool = True, scaled: bool = True
) -> StandardizationStats:
    """Column means and sample standard deviations (n-1 divisor).

    Constant columns get scale 1 so they map to zeros after centering.
    """
    X = np.asarray(X_train, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValidationError("X_train must be a nonempty 2-D array")
    m = X.shape[1]
    mean = X.mean(axis=0) if centered else np.zeros(m)
    if scaled:
        if X.shape[0] < 2:
            raise ValidationError("cannot scale with a single training row")
        scale = X.std(axis=0, ddof=1)
        scale = np.where(scale > 0, scale, 1.0)
    else:
        scale = np.ones(m)
    return StandardizationStats(mean=mean, scale=scale, centered=centered, scaled=scaled)


def apply_standardizer(stats: StandardizationStats, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != stats.m:
        raise ValidationError(
            f"expected {stats.m} columns, got {X.shape[1]}"
        )
    return (X - stats.mean) / stats.scale


def inverse_standardizer(stats: StandardizationStats, Xt: np.ndarray) -> np.ndarray:
    Xt = np.asarray(Xt, dtype=float)
    if Xt.ndim == 1:
        Xt = Xt.reshape(1, -1)
    if Xt.shape[1] != stats.m:
        raise ValidationError(f"expected {stats.m} columns, got {Xt.shape[1]}")
    return Xt * stats.scale + stats.mean


# --------------------------------------------------------------------------- CSV


def read_csv(path: str | Path, target: Optional[str] = None) -> Dataset:
    """Load a headed CSV; ``target`` names the response column (default: last)."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValidationError(f"{path}: file is empty") from None
        if len(header) < 2:
            raise ValidationError(f"{path}: need at least one feature and a target column")
        if target is None:
            t_col = len(header) - 1
        else:
            if target not in header:
                raise ValidationError(f"{path}: target column {target!r} not in header")
            t_col = header.index(target)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ValidationError(
                    f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}"
                )
            try:
                vals = [float(c) for c in row]
            except ValueError as exc:
                raise ValidationError(f"{path}: row {lineno}: {exc}") from None
            if not all(math.isfinite(v) for v in vals):
                raise ValidationError(f"{path}: row {lineno} contains a non-finite value")
            rows.append(vals)
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    A = np.asarray(rows, dtype=float)
    feat = [i for i in range(len(header)) if i != t_col]
    return Dataset(X=A[:, feat], y=A[:, t_col], feature_names=tuple(header[i] for i in feat))


def write_csv(path: str | Path, ds: Dataset, target: str = "y") -> None:
    names = ds.feature_names or tuple(f"x{i + 1}" for i in range(ds.m))
    write_table(path, list(names) + [target], np.column_stack([ds.X, ds.y]))


def write_table(path: str | Path, header: Sequence[str], data: np.ndarray) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in np.atleast_2d(data):
            w.writerow([repr(float(v)) for v in row])
