"""Centering, PCA whitening and FastICA with a quartic contrast.

Data matrices are column-per-sample: ``X`` has shape
``(n_features, n_samples)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import DataError, NumericalError

log = logging.getLogger(__name__)

DEFAULT_MAX_ICS = 500
RELATIVE_EIGEN_FLOOR = 1e-10
WHITENESS_TOL = 1e-6


@dataclass(frozen=True)
class QuarticContrast:
    """Contrast ``G(u) = scale * u**4 / 4``, so ``g(u) = scale * u**3``.

    ``scale=4`` is the plain ``u**4`` contrast.  The normalized fixed-point
    iterates do not depend on ``scale``.
    """

    scale: float = 1.0
    name = "quartic"

    def g(self, u):
        return self.scale * u**3

    def g_prime(self, u):
        return 3.0 * self.scale * u**2


QUARTIC = QuarticContrast()
CONTRASTS = {"quartic": QUARTIC}


def _check_matrix(X, name="X") -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DataError(f"{name} must be a 2-D (features x samples) matrix")
    if X.shape[1] < 2:
        raise DataError(f"{name} needs at least 2 samples, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise DataError(f"{name} contains non-finite entries")
    return X


def center(X):
    """Subtract the per-feature sample mean; returns ``(Xc, mean)``."""
    X = _check_matrix(X)
    m = X.mean(axis=1)
    return X - m[:, None], m


@dataclass(frozen=True, eq=False)
class WhiteningModel:
    mean: np.ndarray
    # (n_features, d), orthonormal columns
    eigvecs: np.ndarray
    # (d,), descending
    eigvals: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigvals.size

    @property
    def n_features(self) -> int:
        return self.mean.size

    @property
    def matrix(self) -> np.ndarray:
        """``D^-1/2 E^T``, shape ``(d, n_features)``."""
        return self.eigvecs.T / np.sqrt(self.eigvals)[:, None]

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[0] != self.n_features:
            raise DataError(f"expected {self.n_features} features, got {X.shape[0]}")
        Xc = X - (self.mean[:, None] if X.ndim == 2 else self.mean)
        return self.matrix @ Xc


def whiten(Xc, eigen_floor: float | None = None, max_dim: int | None = None, mean=None):
    """PCA-whiten centered data; returns ``(Z, model)``.

    Eigenpairs of the sample covariance ``Xc Xc^T / (n - 1)`` are taken from
    a thin SVD of ``Xc``, which never forms the ``n_features``-square
    covariance.  Eigenvalues ``<= eigen_floor`` are dropped (default: 1e-10
    times the largest), at most ``max_dim`` components are kept, and never
    more than ``n_samples - 1``.
    """
    Xc = _check_matrix(Xc, "Xc")
    n_features, n = Xc.shape
    if max_dim is not None and max_dim < 1:
        raise DataError("max_dim must be >= 1")

    U, s, _ = np.linalg.svd(Xc, full_matrices=False)
    eigvals = s**2 / (n - 1)
    if eigvals.size == 0 or eigvals[0] <= 0:
        raise NumericalError("covariance has rank 0")
    floor = RELATIVE_EIGEN_FLOOR * eigvals[0] if eigen_floor is None else eigen_floor
    d = int(np.count_nonzero(eigvals > floor))
    d = min(d, n - 1, max_dim if max_dim is not None else d)
    if d < 1:
        raise NumericalError("no covariance eigenvalue above the floor")

    E = U[:, :d]
    # fix signs so the largest-magnitude entry of each eigenvector is positive
    pivot = np.argmax(np.abs(E), axis=0)
    E = E * np.sign(E[pivot, np.arange(d)])
    model = WhiteningModel(
        np.zeros(n_features) if mean is None else np.asarray(mean, dtype=np.float64),
        E,
        eigvals[:d].copy(),
    )
    Z = model.matrix @ Xc
    return Z, model


def whitening_error(Z) -> float:
    """Frobenius norm of ``cov(Z) - I``."""
    Z = np.asarray(Z, dtype=np.float64)
    Zc = Z - Z.mean(axis=1, keepdims=True)
    C = Zc @ Zc.T / (Z.shape[1] - 1)
    return float(np.linalg.norm(C - np.eye(Z.shape[0])))


def _require_white(Z, tol=WHITENESS_TOL):
    err = whitening_error(Z)
    if err > tol * max(1, Z.shape[0]):
        raise DataError(f"input is not whitened (||cov - I||_F = {err:.3g})")


class OneUnitResult(NamedTuple):
    w: np.ndarray
    converged: bool
    n_iter: int


def fastica_one_unit(Z, seed=0, tol: float = 1e-10, max_iter: int = 1000, contrast=QUARTIC,
                     callback: Callable | None = None) -> OneUnitResult:
    """Estimate one independent direction by the fixed-point iteration.

    Each step sets ``w+ = E{z g(w^T z)} - E{g'(w^T z)} w`` and renormalizes.
    Convergence means ``|<w_new, w_old>| > 1 - tol``.
    """
    Z = _check_matrix(Z, "Z")
    _require_white(Z)
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(Z.shape[0])
    w /= np.linalg.norm(w)
    n = Z.shape[1]
    for it in range(1, max_iter + 1):
        u = w @ Z
        w_new = Z @ contrast.g(u) / n - contrast.g_prime(u).mean() * w
        norm = np.linalg.norm(w_new)
        if norm == 0 or not np.isfinite(norm):
            raise NumericalError("one-unit FastICA update vanished")
        w_new /= norm
        if callback is not None:
            callback(it, w_new)
        done = abs(w_new @ w) > 1.0 - tol
        w = w_new
        if done:
            return OneUnitResult(w, True, it)
    log.warning("one-unit FastICA did not converge in %d iterations", max_iter)
    return OneUnitResult(w, False, max_iter)


def symmetric_decorrelate(W) -> np.ndarray:
    """Return ``(W W^T)^{-1/2} W``, the nearest matrix with orthonormal rows."""
    W = np.asarray(W, dtype=np.float64)
    s, u = np.linalg.eigh(W @ W.T)
    if s.min() <= s.max() * 1e-14 or s.max() <= 0:
        raise NumericalError("matrix is rank-deficient; cannot orthogonalize")
    return (u / np.sqrt(s)) @ u.T @ W


class SymmetricResult(NamedTuple):
    W: np.ndarray
    converged: bool
    n_iter: int
    restarts: int


def fastica_symmetric(Z, n_ics: int, seed=0, tol: float = 1e-10, max_iter: int = 1000,
                      contrast=QUARTIC, callback: Callable | None = None,
                      max_restarts: int = 3) -> SymmetricResult:
    """Estimate ``n_ics`` directions in parallel with symmetric orthogonalization.

    Each sweep computes ``W+ = E{g(WZ) Z^T} - diag(E{g'(WZ)}) W`` and then
    ``W = (W+ W+^T)^{-1/2} W+``.  ``callback(sweep, W)`` sees the
    orthogonalized matrix after every sweep.  A singular ``W+`` restarts
    from a fresh random matrix, at most ``max_restarts`` times.
    """
    Z = _check_matrix(Z, "Z")
    d, n = Z.shape
    if not 1 <= n_ics <= d:
        raise DataError(f"n_ics={n_ics} must lie in [1, {d}] (whitened dimension)")
    _require_white(Z)
    rng = np.random.default_rng(seed)
    restarts = 0
    while True:
        W = symmetric_decorrelate(rng.standard_normal((n_ics, d)))
        try:
            for it in range(1, max_iter + 1):
                Y = W @ Z
                W_plus = contrast.g(Y) @ Z.T / n - contrast.g_prime(Y).mean(axis=1)[:, None] * W
                W_new = symmetric_decorrelate(W_plus)
                if callback is not None:
                    callback(it, W_new)
                lim = np.min(np.abs(np.einsum("ij,ij->i", W_new, W)))
                W = W_new
                if lim > 1.0 - tol:
                    return SymmetricResult(W, True, it, restarts)
        except NumericalError:
            restarts += 1
            log.warning("singular update in symmetric FastICA; restart %d", restarts)
            if restarts > max_restarts:
                raise
            continue
        log.warning("symmetric FastICA did not converge in %d sweeps", max_iter)
        return SymmetricResult(W, False, max_iter, restarts)


def quartic_score(u):
    """Score ``f'/f`` of the quartic density ``f(u) ~ exp(-u**4 / 4)``."""
    return -(u**3)


def infomax_step(W, Y, lr: float, score=quartic_score) -> np.ndarray:
    """One maximum-likelihood step ``W + lr * (I + E{score(y) y^T}) W``.

    ``Y`` holds the current outputs ``W Z`` column-per-sample; the
    expectation is the sample mean over columns.
    """
    W = np.asarray(W, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2 or W.ndim != 2 or Y.shape[0] != W.shape[0]:
        raise DataError(f"dimension mismatch: W {W.shape}, Y {Y.shape}")
    k = W.shape[0]
    grad = np.eye(k) + score(Y) @ Y.T / Y.shape[1]
    return W + lr * grad @ W


@dataclass(frozen=True, eq=False)
class IcaModel:
    whitening: WhiteningModel
    # (n_ics, d)
    unmixing: np.ndarray
    contrast: str = "quartic"

    @property
    def n_ics(self) -> int:
        return self.unmixing.shape[0]

    @property
    def n_features(self) -> int:
        return self.whitening.n_features


def project(x, model: IcaModel) -> np.ndarray:
    """Map a feature vector (or a column-per-sample matrix) to IC space."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != model.n_features:
        raise DataError(f"feature length {x.shape[0]} does not match model ({model.n_features})")
    return model.unmixing @ model.whitening.transform(x)


def fit_ica(X, n_ics: int | None = None, seed=0, tol: float = 1e-10, max_iter: int = 1000,
            eigen_floor: float | None = None, strict: bool = False):
    """Center, whiten and run symmetric FastICA on ``X``.

    With ``n_ics`` given, whitening keeps at most ``n_ics`` components.
    Returns ``(model, S)`` with ``S`` the training data in IC space.
    """
    Xc, m = center(X)
    Z, wm = whiten(Xc, eigen_floor=eigen_floor, max_dim=n_ics, mean=m)
    if n_ics is None:
        n_ics = min(DEFAULT_MAX_ICS, wm.dim)
    if n_ics > wm.dim:
        raise DataError(f"n_ics={n_ics} exceeds the whitened dimension d={wm.dim}")
    res = fastica_symmetric(Z, n_ics, seed=seed, tol=tol, max_iter=max_iter)
    if not res.converged and strict:
        raise NumericalError(f"FastICA did not converge in {max_iter} sweeps")
    model = IcaModel(wm, res.W)
    return model, res.W @ Z


def amari_index(P) -> float:
    """Normalized Amari index of a square product ``W A``; 0 means a scaled permutation."""
    P = np.abs(np.asarray(P, dtype=np.float64))
    n = P.shape[0]
    if P.ndim != 2 or P.shape[1] != n:
        raise ValueError("amari_index needs a square matrix")
    if n == 1:
        return 0.0
    rows = (P / P.max(axis=1, keepdims=True)).sum(axis=1) - 1.0
    cols = (P / P.max(axis=0, keepdims=True)).sum(axis=0) - 1.0
    return float((rows.sum() + cols.sum()) / (2.0 * n * (n - 1)))
