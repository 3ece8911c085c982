"""Fit any of the four latent-variable regressors by name, and JSON round-trips."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Protocol, Union

import numpy as np

from .exceptions import ValidationError
from .kernel import KernelModel, KernelSpec, train_kpcr, train_kpls
from .linear import PCRModel, PLSModel, train_pcr, train_pls

MODEL_KINDS = ("pcr", "pls", "kpcr", "kpls")


class LVRegressor(Protocol):
    """What calibration needs from a fitted model."""

    kind: str

    @property
    def n_components(self) -> int: ...

    @property
    def lv_variance(self) -> np.ndarray: ...

    def scores(self, X: np.ndarray) -> np.ndarray: ...

    def predict(self, X: np.ndarray) -> np.ndarray: ...

    def to_dict(self) -> dict: ...


Model = Union[PCRModel, PLSModel, KernelModel]


def fit_model(
    kind: str,
    X: np.ndarray,
    y: np.ndarray,
    H: int,
    scale: bool = True,
    kernel: KernelSpec | None = None,
) -> Model:
    if kind == "pcr":
        return train_pcr(X, y, H, scale=scale)
    if kind == "pls":
        return train_pls(X, y, H, scale=scale)
    if kind == "kpcr":
        return train_kpcr(X, y, H, spec=kernel, scale=scale)
    if kind == "kpls":
        return train_kpls(X, y, H, spec=kernel, scale=scale)
    raise ValidationError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


def model_from_dict(d: dict) -> Model:
    kind = d.get("model_kind")
    if kind == "pcr":
        return PCRModel.from_dict(d)
    if kind == "pls":
        return PLSModel.from_dict(d)
    if kind in ("kpcr", "kpls"):
        return KernelModel.from_dict(d)
    raise ValidationError(f"unknown model_kind {kind!r} in model document")


def save_json(path: str | Path, doc: dict) -> None:
    # json emits floats via repr(), i.e. shortest round-trip decimal form
    Path(path).write_text(json.dumps(doc, indent=1, allow_nan=False) + "\n", encoding="utf-8")


def load_json(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON ({exc})") from None
