"""Multi-output kernel ridge regression with closed-form leave-one-out."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .core import DDRError
from .kernels import rbf_gram

JITTER_START = 1e-10
JITTER_MAX = 1e-6
SATURATION_TOL = 1e-12


@dataclass(frozen=True)
class KrrFit:
    X: np.ndarray
    coef: np.ndarray
    bandwidth: float
    ridge: float


def _regularized_cholesky(K: np.ndarray, ridge: float):
    """Cholesky of ``K + (n*ridge + jitter)*I``; returns ``(factor, jitter)``.

    Jitter starts at 0 and escalates x10 from 1e-10 to 1e-6 on failure.
    """
    n = K.shape[0]
    jitter = 0.0
    while True:
        try:
            A = K + (n * ridge + jitter) * np.eye(n)
            return cho_factor(A, lower=True, check_finite=False), jitter
        except LinAlgError:
            jitter = JITTER_START if jitter == 0.0 else jitter * 10
            if jitter > JITTER_MAX * (1 + 1e-9):
                raise DDRError("ill-conditioned system") from None


def _check(X, T, ridge, bandwidth):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    T = np.asarray(T, dtype=float)
    squeeze = T.ndim == 1
    if squeeze:
        T = T[:, None]
    if X.shape[0] != T.shape[0]:
        raise DDRError("dimension mismatch", "targets and covariates have different row counts")
    if not ridge > 0:
        raise DDRError("invalid ridge", "ridge must be positive")
    if not bandwidth > 0:
        raise DDRError("invalid bandwidth", "bandwidth must be positive")
    return X, T, squeeze


def krr_fit(X, T, ridge: float, bandwidth: float) -> KrrFit:
    """Solve ``(K + n*ridge*I) A = T`` with one factorization for all columns."""
    X, T, _ = _check(X, T, ridge, bandwidth)
    K = rbf_gram(X, X, bandwidth)
    factor, _ = _regularized_cholesky(K, ridge)
    coef = cho_solve(factor, T, check_finite=False)
    return KrrFit(X=X, coef=coef, bandwidth=float(bandwidth), ridge=float(ridge))


def krr_predict(fit: KrrFit, Xq) -> np.ndarray:
    Xq = np.asarray(Xq, dtype=float)
    if Xq.ndim == 1:
        # a flat vector is one query row, unless the model is univariate
        Xq = Xq[:, None] if fit.X.shape[1] == 1 else Xq[None, :]
    if Xq.shape[1] != fit.X.shape[1]:
        raise DDRError("dimension mismatch", f"query has {Xq.shape[1]} columns, model has {fit.X.shape[1]}")
    return rbf_gram(Xq, fit.X, fit.bandwidth) @ fit.coef


def loo_from_hat(fitted: np.ndarray, T: np.ndarray, leverage: np.ndarray) -> np.ndarray:
    """Leave-one-out predictions ``(fitted - H_ii T_i) / (1 - H_ii)``."""
    if np.any(leverage >= 1.0 - SATURATION_TOL):
        raise DDRError("leverage saturation")
    lev = leverage[:, None]
    return (fitted - lev * T) / (1.0 - lev)


def krr_loo(X, T, ridge: float, bandwidth: float) -> np.ndarray:
    """Exact leave-one-out predictions of every row from a single fit.

    Uses the hat matrix ``H = K (K + n*ridge*I)^{-1}``. Note the left-out
    models keep the penalty ``n*ridge`` of the full fit, which is what the
    identity computes; an explicit refit on ``n - 1`` rows matches it with
    ridge ``ridge * n / (n - 1)``.
    """
    X, T, squeeze = _check(X, T, ridge, bandwidth)
    n = X.shape[0]
    if n < 3:
        raise DDRError("too few samples", "leave-one-out needs at least 3 samples")
    K = rbf_gram(X, X, bandwidth)
    factor, jitter = _regularized_cholesky(K, ridge)
    # H = I - c*(K + c*I)^{-1} with c the total diagonal shift
    inv = cho_solve(factor, np.eye(n), check_finite=False)
    H = np.eye(n) - (n * ridge + jitter) * inv
    out = loo_from_hat(H @ T, T, np.diag(H).copy())
    return out[:, 0] if squeeze else out
