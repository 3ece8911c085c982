"""RBF kernels, training-referenced centering, kernel PCR and kernel PLS."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from .data import StandardizationStats, apply_standardizer, fit_standardizer
from .exceptions import DegenerateComponentError, SingularityError, ValidationError
from .linear import FORMAT_VERSION, SINGULAR_RTOL, _as_matrix, _as_vector, _check_H

DEFAULT_JITTER = 1e-8


@dataclass(frozen=True)
class KernelSpec:
    """Kernel parameters.

    ``kind="rbf"`` uses the single width ``sigma``; ``kind="anisotropic_rbf"``
    uses one width per predictor in ``sigmas`` and the amplitude ``gamma2``.
    ``jitter`` is added to the diagonal of the training Gram matrix only.
    """

    kind: str = "rbf"
    sigma: float = 1.0
    jitter: float = DEFAULT_JITTER
    gamma2: float = 1.0
    sigmas: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if self.kind not in ("rbf", "anisotropic_rbf"):
            raise ValidationError(f"unknown kernel kind {self.kind!r}")
        if not self.jitter >= 0:
            raise ValidationError("jitter must be nonnegative")
        if self.kind == "rbf":
            if not self.sigma > 0:
                raise ValidationError(f"sigma must be positive, got {self.sigma!r}")
        else:
            if self.sigmas is None or len(self.sigmas) == 0:
                raise ValidationError("anisotropic kernel needs one sigma per predictor")
            object.__setattr__(self, "sigmas", tuple(float(s) for s in self.sigmas))
            if any(not s > 0 for s in self.sigmas):
                raise ValidationError("all anisotropic length-scales must be positive")
            if not self.gamma2 > 0:
                raise ValidationError("gamma2 must be positive")

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "jitter": float(self.jitter)}
        if self.kind == "rbf":
            d["sigma"] = float(self.sigma)
        else:
            d["gamma2"] = float(self.gamma2)
            d["sigmas"] = list(self.sigmas)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        if d["kind"] == "rbf":
            return cls(kind="rbf", sigma=d["sigma"], jitter=d["jitter"])
        return cls(
            kind=d["kind"], gamma2=d["gamma2"], sigmas=tuple(d["sigmas"]), jitter=d["jitter"]
        )


def kernel_matrix(
    X: np.ndarray, X_ref: np.ndarray, spec: KernelSpec, add_jitter: bool = False
) -> np.ndarray:
    """Gram block ``K[i, j] = k(X[i], X_ref[j])``.

    ``add_jitter`` adds ``spec.jitter`` on the diagonal and is only meaningful
    when ``X`` is the training set itself.
    """
    X = _as_matrix(X)
    X_ref = _as_matrix(X_ref, "X_ref")
    if X.shape[1] != X_ref.shape[1]:
        raise ValidationError(
            f"column mismatch: {X.shape[1]} vs reference {X_ref.shape[1]}"
        )
    if spec.kind == "rbf":
        K = np.exp(-cdist(X, X_ref, "sqeuclidean") / (2.0 * spec.sigma**2))
    else:
        s = np.asarray(spec.sigmas, dtype=float)
        if s.shape[0] != X.shape[1]:
            raise ValidationError(
                f"{s.shape[0]} length-scales given for {X.shape[1]} predictors"
            )
        K = spec.gamma2 * np.exp(-0.5 * cdist(X / s, X_ref / s, "sqeuclidean"))
    if add_jitter:
        if K.shape[0] != K.shape[1]:
            raise ValidationError("jitter only applies to a square training Gram matrix")
        K[np.diag_indices_from(K)] += spec.jitter
    return K


@dataclass(frozen=True)
class KernelCenterer:
    """Column means and grand mean of the training Gram matrix."""

    col_means: np.ndarray
    grand_mean: float

    @property
    def n_train(self) -> int:
        return self.col_means.shape[0]

    def center_train(self, K_train: np.ndarray) -> np.ndarray:
        K = np.asarray(K_train, dtype=float)
        self._check(K)
        if K.shape[0] != K.shape[1]:
            raise ValidationError("training kernel must be square")
        return K - self.col_means[None, :] - K.mean(axis=1)[:, None] + self.grand_mean

    def center_apply(self, K_new: np.ndarray) -> np.ndarray:
        K = np.atleast_2d(np.asarray(K_new, dtype=float))
        self._check(K)
        return K - self.col_means[None, :] - K.mean(axis=1)[:, None] + self.grand_mean

    def _check(self, K):
        if K.ndim != 2 or K.shape[1] != self.n_train:
            raise ValidationError(
                f"kernel block must have {self.n_train} columns, got shape {K.shape}"
            )


def fit_centerer(K_train: np.ndarray) -> KernelCenterer:
    K = np.asarray(K_train, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1] or K.shape[0] == 0:
        raise ValidationError(f"training kernel must be square, got shape {K.shape}")
    return KernelCenterer(col_means=K.mean(axis=0), grand_mean=float(K.mean()))


def _check_centered_gram(Kc) -> np.ndarray:
    Kc = _as_matrix(Kc, "K")
    if Kc.shape[0] != Kc.shape[1]:
        raise ValidationError(f"training kernel must be square, got shape {Kc.shape}")
    scale = max(np.abs(Kc).max(), 1.0)
    if np.abs(Kc - Kc.T).max() > 1e-8 * scale:
        raise ValidationError("centered training kernel is not symmetric")
    return Kc


# --------------------------------------------------------------------- K-PCR


@dataclass(frozen=True)
class KPCRFit:
    """Kernel-PCA loadings (n_tr x H), score variances and dual coefficients."""

    loadings: np.ndarray
    eigenvalues: np.ndarray
    b: np.ndarray
    y_mean: float


def fit_kpcr(Kc: np.ndarray, y: np.ndarray, H: int) -> KPCRFit:
    """PCA of the centered Gram matrix, then least squares on its scores.

    Scores are ``T = Kc P`` with ``P`` the leading eigenvectors; the returned
    ``b = P T^+ y`` lives in the dual (training-sample) space so that new
    predictions are ``Kc_new @ b``.
    """
    Kc = _check_centered_gram(Kc)
    n = Kc.shape[0]
    y = _as_vector(y, n)
    H = _check_H(H, n, "n_train")
    evals, evecs = np.linalg.eigh(0.5 * (Kc + Kc.T))
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]
    tol = n * np.finfo(float).eps * max(evals[0], 0.0)
    usable = int(np.sum(evals > tol))
    if H > usable:
        raise ValidationError(
            f"H={H} exceeds the number of positive kernel eigenvalues (usable rank {usable})"
        )
    P = evecs[:, :H]
    pivot = np.argmax(np.abs(P), axis=0)
    signs = np.sign(P[pivot, np.arange(H)])
    signs[signs == 0] = 1.0
    P = P * signs
    T = Kc @ P
    y_mean = float(y.mean())
    b_lv = np.linalg.pinv(T) @ (y - y_mean)
    lam = np.einsum("ij,ij->j", T, T) / max(n - 1, 1)
    return KPCRFit(loadings=P, eigenvalues=lam, b=P @ b_lv, y_mean=y_mean)


# --------------------------------------------------------------------- K-PLS


@dataclass(frozen=True)
class KPLSFit:
    """Output of the kernel PLS loop.

    ``T``/``U`` are the K-side and y-side score matrices (n_tr x H), ``b`` the
    dual coefficients and ``projection = U (T' Kc U)^-1`` the matrix mapping a
    centered kernel block to scores.
    """

    T: np.ndarray
    U: np.ndarray
    b: np.ndarray
    projection: np.ndarray
    captured_variance: np.ndarray
    y_mean: float


def fit_kpls(Kc: np.ndarray, y: np.ndarray, H: int) -> KPLSFit:
    Kc = _check_centered_gram(Kc)
    n = Kc.shape[0]
    y0 = _as_vector(y, n)
    H = _check_H(H, n, "n_train")
    y_mean = float(y0.mean())
    y0 = y0 - y_mean

    K = Kc.copy()
    yd = y0.copy()
    tol = SINGULAR_RTOL * max(np.linalg.norm(Kc) * np.linalg.norm(y0), np.finfo(float).tiny)
    T = np.zeros((n, H))
    U = np.zeros((n, H))
    captured = np.zeros(H)
    for h in range(H):
        t = K @ yd
        nt = np.linalg.norm(t)
        if nt <= tol:
            raise DegenerateComponentError(
                h + 1, f"K-side score vanishes at component h={h + 1}; cannot normalize"
            )
        t /= nt
        u = yd * (yd @ t)
        tK = t @ K
        # one-sided deflation, as in the training loop this implements
        K -= np.outer(t, tK)
        yd = yd - t * (t @ yd)
        T[:, h] = t
        U[:, h] = u
        captured[h] = tK @ tK

    M = T.T @ Kc @ U
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > 1.0 / np.finfo(float).eps:
        raise SingularityError(f"T'KU is singular (condition estimate {cond:.3g})")
    Minv = np.linalg.inv(M)
    b = U @ (Minv @ (T.T @ y0))
    return KPLSFit(
        T=T, U=U, b=b, projection=U @ Minv, captured_variance=captured, y_mean=y_mean
    )


# ----------------------------------------------------------- end-to-end models


@dataclass(frozen=True)
class KernelModel:
    """Fitted K-PCR or K-PLS model usable on raw predictor rows.

    ``lv_projection`` (n_tr x H) maps a centered kernel block to latent scores:
    the kernel-PCA loadings for K-PCR and ``U (T' Kc U)^-1`` for K-PLS.
    """

    kind: str
    X_train: np.ndarray
    spec: KernelSpec
    centerer: KernelCenterer
    standardizer: StandardizationStats
    lv_projection: np.ndarray
    b: np.ndarray
    lv_variance: np.ndarray
    y_mean: float
    train_scores: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n_components(self) -> int:
        return self.lv_projection.shape[1]

    def centered_kernel(self, X: np.ndarray) -> np.ndarray:
        Xt = apply_standardizer(self.standardizer, X)
        return self.centerer.center_apply(kernel_matrix(Xt, self.X_train, self.spec))

    def scores(self, X: np.ndarray) -> np.ndarray:
        return project_kernel_cal(self, self.centered_kernel(X))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return predict_kernel(self, X)

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "model_kind": self.kind,
            "standardizer": self.standardizer.to_dict(),
            "kernel": self.spec.to_dict(),
            "factors": {
                "X_train": self.X_train.tolist(),
                "centerer": {
                    "col_means": self.centerer.col_means.tolist(),
                    "grand_mean": self.centerer.grand_mean,
                },
                "lv_projection": self.lv_projection.tolist(),
            },
            "coefficients": {"b": self.b.tolist(), "y_mean": float(self.y_mean)},
            "explained_variance": self.lv_variance.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KernelModel":
        f = d["factors"]
        n = len(f["centerer"]["col_means"])
        return cls(
            kind=d["model_kind"],
            X_train=np.asarray(f["X_train"], dtype=float).reshape(n, -1),
            spec=KernelSpec.from_dict(d["kernel"]),
            centerer=KernelCenterer(
                col_means=np.asarray(f["centerer"]["col_means"], dtype=float),
                grand_mean=float(f["centerer"]["grand_mean"]),
            ),
            standardizer=StandardizationStats.from_dict(d["standardizer"]),
            lv_projection=np.asarray(f["lv_projection"], dtype=float).reshape(n, -1),
            b=np.asarray(d["coefficients"]["b"], dtype=float),
            lv_variance=np.asarray(d["explained_variance"], dtype=float),
            y_mean=float(d["coefficients"]["y_mean"]),
        )


def project_kernel_cal(model: KernelModel, Kc_new: np.ndarray) -> np.ndarray:
    """Latent scores of rows whose kernel block is already training-centered."""
    Kc_new = np.atleast_2d(np.asarray(Kc_new, dtype=float))
    if Kc_new.shape[1] != model.lv_projection.shape[0]:
        raise ValidationError(
            f"kernel block has {Kc_new.shape[1]} columns, model has "
            f"{model.lv_projection.shape[0]} training samples"
        )
    return Kc_new @ model.lv_projection


def predict_kernel(model: KernelModel, X_new: np.ndarray) -> np.ndarray:
    return model.centered_kernel(X_new) @ model.b + model.y_mean


def _prepare(X, y, spec, scale):
    X = _as_matrix(X)
    y = _as_vector(y, X.shape[0])
    stats = fit_standardizer(X, centered=True, scaled=scale)
    Xt = apply_standardizer(stats, X)
    K = kernel_matrix(Xt, Xt, spec, add_jitter=True)
    centerer = fit_centerer(K)
    return Xt, y, stats, centerer, centerer.center_train(K)


def train_kpcr(
    X: np.ndarray, y: np.ndarray, H: int, spec: KernelSpec | None = None, scale: bool = True
) -> KernelModel:
    spec = spec or KernelSpec()
    Xt, y, stats, centerer, Kc = _prepare(X, y, spec, scale)
    fit = fit_kpcr(Kc, y, H)
    return KernelModel(
        kind="kpcr",
        X_train=Xt,
        spec=spec,
        centerer=centerer,
        standardizer=stats,
        lv_projection=fit.loadings,
        b=fit.b,
        lv_variance=fit.eigenvalues,
        y_mean=fit.y_mean,
        train_scores=Kc @ fit.loadings,
    )


def train_kpls(
    X: np.ndarray, y: np.ndarray, H: int, spec: KernelSpec | None = None, scale: bool = True
) -> KernelModel:
    spec = spec or KernelSpec()
    Xt, y, stats, centerer, Kc = _prepare(X, y, spec, scale)
    fit = fit_kpls(Kc, y, H)
    return KernelModel(
        kind="kpls",
        X_train=Xt,
        spec=spec,
        centerer=centerer,
        standardizer=stats,
        lv_projection=fit.projection,
        b=fit.b,
        lv_variance=fit.captured_variance,
        y_mean=fit.y_mean,
        train_scores=fit.T,
    )
