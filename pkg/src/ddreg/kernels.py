"""Gaussian delta transform, RBF Gram matrices and the median heuristic."""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .core import DDRError, DeltaMatrix, EvaluationGrid

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gaussian_delta(z, y, h: float):
    """Gaussian density with sd ``h`` evaluated at ``z - y`` (broadcasts)."""
    if not h > 0:
        raise DDRError("invalid h", "h must be positive")
    u = (np.asarray(z, dtype=float) - np.asarray(y, dtype=float)) / h
    return _INV_SQRT_2PI / h * np.exp(-0.5 * u * u)


def build_delta_matrix(outcome, grid: EvaluationGrid, h: float) -> DeltaMatrix:
    """Targets ``delta_h(z_k - y_i)`` as an (n, d) matrix."""
    y = np.asarray(outcome, dtype=float).ravel()
    return DeltaMatrix(gaussian_delta(grid.points[None, :], y[:, None], h), float(h))


class RbfKernel:
    """Gaussian RBF kernel ``exp(-|a - b|^2 / (2 bandwidth^2))``."""

    def __init__(self, bandwidth: float):
        if not bandwidth > 0:
            raise DDRError("invalid bandwidth", "bandwidth must be positive")
        self.bandwidth = float(bandwidth)

    def __call__(self, A, B=None):
        return rbf_gram(A, A if B is None else B, self.bandwidth)

    def __repr__(self):
        return f"RbfKernel(bandwidth={self.bandwidth!r})"


def _as_matrix(A):
    A = np.asarray(A, dtype=float)
    return A[:, None] if A.ndim == 1 else A


def rbf_gram(A, B, bandwidth: float) -> np.ndarray:
    A, B = _as_matrix(A), _as_matrix(B)
    if A.shape[1] != B.shape[1]:
        raise DDRError("dimension mismatch", f"column counts differ: {A.shape[1]} vs {B.shape[1]}")
    if not bandwidth > 0:
        raise DDRError("invalid bandwidth", "bandwidth must be positive")
    sq = cdist(A, B, "sqeuclidean")
    return np.exp(-sq / (2.0 * bandwidth * bandwidth))


def median_heuristic(X) -> float:
    """Median of all pairwise Euclidean distances between rows of ``X``."""
    X = _as_matrix(X)
    if X.shape[0] < 2:
        raise DDRError("degenerate covariates", "need at least 2 rows")
    dist = pdist(X)
    if not np.any(dist > 0):
        raise DDRError("degenerate covariates")
    return float(np.median(dist))
