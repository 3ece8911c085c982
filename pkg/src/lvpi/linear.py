"""Linear latent-variable regression: SVD-based PCA/PCR and NIPALS PLS1."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import StandardizationStats, apply_standardizer, fit_standardizer
from .exceptions import DegenerateComponentError, SingularityError, ValidationError

FORMAT_VERSION = 1

# Score columns with variance below this share of the total are treated as empty.
SINGULAR_RTOL = 1e-12


def _as_matrix(X, name="X") -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValidationError(f"{name} contains non-finite values")
    return X


def _as_vector(y, n, name="y") -> np.ndarray:
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape[0] != n:
        raise ValidationError(f"{name} has length {y.shape[0]}, expected {n}")
    if not np.all(np.isfinite(y)):
        raise ValidationError(f"{name} contains non-finite values")
    return y


def _check_H(H, upper, what):
    if int(H) != H or H < 1:
        raise ValidationError(f"number of components must be a positive integer, got {H!r}")
    if H > upper:
        raise ValidationError(f"H={H} exceeds {what} ({upper})")
    return int(H)


# ------------------------------------------------------------------------ PCA


@dataclass(frozen=True)
class PCAModel:
    """Orthonormal loadings ``P`` (m x H) and score variances ``eigenvalues``."""

    loadings: np.ndarray
    eigenvalues: np.ndarray

    @property
    def n_components(self) -> int:
        return self.loadings.shape[1]


def fit_pca(Xt: np.ndarray, H: int) -> PCAModel:
    """PCA of an already centered matrix via thin SVD.

    Each loading column is sign-flipped so that its largest-magnitude entry is
    positive; eigenvalues are ``s**2 / (n - 1)``.
    """
    Xt = _as_matrix(Xt)
    n, m = Xt.shape
    if n < 2:
        raise ValidationError("PCA needs at least two rows")
    H = _check_H(H, min(n, m), "min(n, m)")
    _, s, Vt = np.linalg.svd(Xt, full_matrices=False)
    P = Vt[:H].T.copy()
    pivot = np.argmax(np.abs(P), axis=0)
    signs = np.sign(P[pivot, np.arange(H)])
    signs[signs == 0] = 1.0
    P *= signs
    lam = s[:H] ** 2 / (n - 1)
    return PCAModel(loadings=P, eigenvalues=lam)


def project(model: PCAModel, Xt: np.ndarray) -> np.ndarray:
    Xt = _as_matrix(Xt)
    if Xt.shape[1] != model.loadings.shape[0]:
        raise ValidationError(
            f"expected {model.loadings.shape[0]} columns, got {Xt.shape[1]}"
        )
    return Xt @ model.loadings


def fit_pcr(T_train: np.ndarray, y_train: np.ndarray) -> np.ndarray:
    """Least squares on mutually orthogonal score columns.

    ``T'T`` is diagonal, so each coefficient is ``t_h'y / t_h't_h``.
    """
    T = _as_matrix(T_train, "T_train")
    y = _as_vector(y_train, T.shape[0], "y_train")
    d = np.einsum("ij,ij->j", T, T)
    total = d.sum()
    for h, dh in enumerate(d, start=1):
        if total <= 0 or dh <= SINGULAR_RTOL * total:
            raise SingularityError(f"score column h={h} has zero variance")
    return (T.T @ y) / d


@dataclass(frozen=True)
class PCRModel:
    pca: PCAModel
    b: np.ndarray
    standardizer: StandardizationStats
    y_mean: float = 0.0

    kind = "pcr"

    @property
    def n_components(self) -> int:
        return self.pca.n_components

    @property
    def lv_variance(self) -> np.ndarray:
        return self.pca.eigenvalues

    def scores(self, X: np.ndarray) -> np.ndarray:
        return project(self.pca, apply_standardizer(self.standardizer, X))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return predict_pcr(self, X)

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "model_kind": self.kind,
            "standardizer": self.standardizer.to_dict(),
            "factors": {"loadings": self.pca.loadings.tolist()},
            "coefficients": {"b": self.b.tolist(), "y_mean": float(self.y_mean)},
            "explained_variance": self.pca.eigenvalues.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PCRModel":
        pca = PCAModel(
            loadings=np.asarray(d["factors"]["loadings"], dtype=float).reshape(
                len(d["standardizer"]["mean"]), -1
            ),
            eigenvalues=np.asarray(d["explained_variance"], dtype=float),
        )
        return cls(
            pca=pca,
            b=np.asarray(d["coefficients"]["b"], dtype=float),
            standardizer=StandardizationStats.from_dict(d["standardizer"]),
            y_mean=float(d["coefficients"]["y_mean"]),
        )


def predict_pcr(model: PCRModel, X: np.ndarray) -> np.ndarray:
    return model.scores(X) @ model.b + model.y_mean


def train_pcr(X: np.ndarray, y: np.ndarray, H: int, scale: bool = True) -> PCRModel:
    """Standardize on ``X``, run PCA with ``H`` components and regress ``y``."""
    X = _as_matrix(X)
    y = _as_vector(y, X.shape[0])
    stats = fit_standardizer(X, centered=True, scaled=scale)
    Xt = apply_standardizer(stats, X)
    pca = fit_pca(Xt, H)
    y_mean = float(y.mean())
    b = fit_pcr(project(pca, Xt), y - y_mean)
    return PCRModel(pca=pca, b=b, standardizer=stats, y_mean=y_mean)


# ------------------------------------------------------------------------ PLS


@dataclass(frozen=True)
class PLSModel:
    """PLS1 factors.

    ``weights`` W, ``x_loadings`` P (both m x H) and ``y_loadings`` q (H,);
    ``b = W (P'W)^-1 q`` acts on standardized predictors.
    """

    weights: np.ndarray
    x_loadings: np.ndarray
    y_loadings: np.ndarray
    b: np.ndarray
    x_variance_per_lv: np.ndarray
    standardizer: StandardizationStats
    y_mean: float = 0.0

    kind = "pls"

    @property
    def n_components(self) -> int:
        return self.weights.shape[1]

    @property
    def lv_variance(self) -> np.ndarray:
        return self.x_variance_per_lv

    @property
    def rotation(self) -> np.ndarray:
        """Maps standardized rows straight to scores: ``R = W (P'W)^-1``."""
        return self.weights @ np.linalg.inv(self.x_loadings.T @ self.weights)

    def scores(self, X: np.ndarray) -> np.ndarray:
        return apply_standardizer(self.standardizer, X) @ self.rotation

    def predict(self, X: np.ndarray) -> np.ndarray:
        return predict_pls(self, X)

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "model_kind": self.kind,
            "standardizer": self.standardizer.to_dict(),
            "factors": {
                "weights": self.weights.tolist(),
                "x_loadings": self.x_loadings.tolist(),
                "y_loadings": self.y_loadings.tolist(),
            },
            "coefficients": {"b": self.b.tolist(), "y_mean": float(self.y_mean)},
            "explained_variance": self.x_variance_per_lv.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PLSModel":
        f = d["factors"]
        m = len(d["standardizer"]["mean"])
        return cls(
            weights=np.asarray(f["weights"], dtype=float).reshape(m, -1),
            x_loadings=np.asarray(f["x_loadings"], dtype=float).reshape(m, -1),
            y_loadings=np.asarray(f["y_loadings"], dtype=float),
            b=np.asarray(d["coefficients"]["b"], dtype=float),
            x_variance_per_lv=np.asarray(d["explained_variance"], dtype=float),
            standardizer=StandardizationStats.from_dict(d["standardizer"]),
            y_mean=float(d["coefficients"]["y_mean"]),
        )


def fit_pls(
    Xt: np.ndarray,
    y: np.ndarray,
    H: int,
    standardizer: StandardizationStats | None = None,
) -> PLSModel:
    """NIPALS for a single response.

    ``Xt`` must already be centered (and scaled, if wanted); ``y`` is centered
    here and its mean stored for prediction.
    """
    X = _as_matrix(Xt).copy()
    n, m = X.shape
    y = _as_vector(y, n).copy()
    H = _check_H(H, min(n - 1, m), "min(n - 1, m)")
    if standardizer is None:
        standardizer = StandardizationStats(
            mean=np.zeros(m), scale=np.ones(m), centered=False, scaled=False
        )
    y_mean = float(y.mean())
    y -= y_mean
    tol = SINGULAR_RTOL * max(np.linalg.norm(X) * np.linalg.norm(y), np.finfo(float).tiny)

    W = np.zeros((m, H))
    P = np.zeros((m, H))
    q = np.zeros(H)
    xvar = np.zeros(H)
    for h in range(H):
        w = X.T @ y
        nw = np.linalg.norm(w)
        if nw <= tol:
            raise DegenerateComponentError(
                h + 1, f"X'y vanishes at component h={h + 1}; y carries no more covariance with X"
            )
        w /= nw
        t = X @ w
        tt = t @ t
        p = X.T @ t / tt
        q[h] = (y @ t) / tt
        X -= np.outer(t, p)
        y -= t * q[h]
        W[:, h] = w
        P[:, h] = p
        xvar[h] = tt * (p @ p)
    b = W @ np.linalg.solve(P.T @ W, q)
    return PLSModel(
        weights=W,
        x_loadings=P,
        y_loadings=q,
        b=b,
        x_variance_per_lv=xvar,
        standardizer=standardizer,
        y_mean=y_mean,
    )


def predict_pls(model: PLSModel, X: np.ndarray) -> np.ndarray:
    Xt = apply_standardizer(model.standardizer, X)
    return Xt @ model.b + model.y_mean


def train_pls(X: np.ndarray, y: np.ndarray, H: int, scale: bool = True) -> PLSModel:
    X = _as_matrix(X)
    y = _as_vector(y, X.shape[0])
    stats = fit_standardizer(X, centered=True, scaled=scale)
    return fit_pls(apply_standardizer(stats, X), y, H, standardizer=stats)


# -------------------------------------------------------------------- weights


def explained_variance_weights(variances) -> np.ndarray:
    """Normalize per-LV explained variances into weights summing to one."""
    lam = np.asarray(variances, dtype=float).reshape(-1)
    if lam.size == 0:
        raise ValidationError("need at least one variance")
    if np.any(~np.isfinite(lam)) or np.any(lam < 0):
        raise ValidationError("variances must be finite and nonnegative")
    total = lam.sum()
    if total <= 0:
        raise ValidationError("variances sum to zero; weights undefined")
    return lam / total
