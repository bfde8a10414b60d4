"""Hypothesis tests around the fitted densities.

Sup-CDF permutation test between two arms at a query point, the slope
equality z-test, an unconditional Gaussian KDE tuned by unbiased
cross-validation, and Welch's t-test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.integrate import cumulative_trapezoid
from scipy.spatial.distance import pdist

from .core import Dataset, DDRError, DdrModel, DensityEstimate, EvaluationGrid
from .ddr import normalize_rows, predict_arm, refit_arm

MIN_PERMUTATIONS = 19


def conditional_cdf(est: DensityEstimate) -> np.ndarray:
    """Cumulative trapezoidal integral of the density along its grid."""
    return cumulative_trapezoid(est.values, est.grid.points, initial=0.0)


def _cdf_at(est: DensityEstimate, z: np.ndarray) -> np.ndarray:
    # flat 0 / 1 continuation outside the grid
    cdf = conditional_cdf(est)
    return np.interp(z, est.grid.points, cdf, left=0.0, right=cdf[-1])


def sup_cdf_statistic(est1: DensityEstimate, est0: DensityEstimate) -> float:
    """``max_z [F1(z) - F0(z)]``; positive when arm 1 puts more mass at low outcomes.

    When the grids differ both CDFs are linearly interpolated onto the union
    of the two grids.
    """
    g1, g0 = est1.grid.points, est0.grid.points
    if g1.shape == g0.shape and np.array_equal(g1, g0):
        return float(np.max(conditional_cdf(est1) - conditional_cdf(est0)))
    z = np.union1d(g1, g0)
    return float(np.max(_cdf_at(est1, z) - _cdf_at(est0, z)))


@dataclass(frozen=True)
class PermutationTestResult:
    statistic: float
    p_value: float
    permutations: int
    seed: int
    permuted: np.ndarray
    arm1: str
    arm0: str

    def to_dict(self, include_permuted: bool = False) -> dict:
        out = {
            "statistic": self.statistic,
            "p_value": self.p_value,
            "B": self.permutations,
            "seed": self.seed,
            "arm1": self.arm1,
            "arm0": self.arm0,
        }
        if include_permuted:
            out["permuted"] = [float(s) for s in self.permuted]
        return out


def permutation_p_value(observed: float, permuted) -> float:
    permuted = np.asarray(permuted, dtype=float)
    return (1.0 + np.count_nonzero(permuted >= observed)) / (permuted.size + 1.0)


def permutation_test(dataset: Dataset, x, B: int, seed: int, model: DdrModel,
                     arm1=None, arm0=None) -> PermutationTestResult:
    """Permutation test of ``H0: sup_z [F1(z|x) - F0(z|x)] <= 0``.

    Treatment labels are shuffled; each arm is refit with the hyperparameters
    chosen on the observed labels, and the statistic recomputed at ``x``.
    Arms default to the sorted labels, with the second as arm 1.
    """
    if B < MIN_PERMUTATIONS:
        raise DDRError("insufficient permutations", "insufficient permutations for α = 0.05")
    if dataset.treatment is None:
        raise DDRError("invalid dataset", "permutation test needs treatment labels")
    labels = dataset.arms()
    if arm1 is None and arm0 is None:
        if len(labels) != 2:
            raise DDRError("invalid dataset", f"expected 2 arms, found {len(labels)}")
        arm0, arm1 = labels
    arm1, arm0 = str(arm1), str(arm0)
    for arm in (arm1, arm0):
        if arm not in model.arms:
            raise DDRError("unknown arm", f"unknown arm {arm!r}")
    x = np.asarray(x, dtype=float).reshape(1, -1)

    m1, m0 = model.arms[arm1], model.arms[arm0]
    observed = sup_cdf_statistic(predict_arm(m1, x)[0], predict_arm(m0, x)[0])

    keep = dataset.arm_mask(arm1) | dataset.arm_mask(arm0)
    X, y = dataset.X[keep], dataset.y[keep]
    is1 = np.array([str(t) == arm1 for t in dataset.treatment[keep]])
    permuted = np.empty(B)
    for b in range(B):
        rng = np.random.default_rng([int(seed), b])
        lab = rng.permutation(is1)
        f1 = refit_arm(X[lab], y[lab], m1.hyper, m1.grid.d)
        f0 = refit_arm(X[~lab], y[~lab], m0.hyper, m0.grid.d)
        permuted[b] = sup_cdf_statistic(predict_arm(f1, x)[0], predict_arm(f0, x)[0])
    return PermutationTestResult(observed, permutation_p_value(observed, permuted), B, int(seed),
                                 permuted, arm1, arm0)


def _ols_slope(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size or x.size < 3:
        raise DDRError("invalid sample", "each arm needs at least 3 (x, y) pairs")
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if not sxx > 0:
        raise DDRError("zero covariate variance")
    beta = float(xc @ (y - y.mean())) / sxx
    resid = y - y.mean() - beta * xc
    se = math.sqrt(float(resid @ resid) / (x.size - 2) / sxx)
    return beta, se


def slope_equality_test(x1, y1, x0, y0):
    """z-test of equal simple-regression slopes; one-sided ``p = Phi(z)``.

    Returns ``(z, p, (slope1, se1), (slope0, se0))``.
    """
    b1, s1 = _ols_slope(x1, y1)
    b0, s0 = _ols_slope(x0, y0)
    denom = math.hypot(s1, s0)
    if denom == 0.0:
        raise DDRError("degenerate standard error")
    z = (b1 - b0) / denom
    return z, float(stats.norm.cdf(z)), (b1, s1), (b0, s0)


@dataclass(frozen=True)
class KdeResult:
    density: DensityEstimate
    bandwidth: float
    candidates: np.ndarray
    ucv: np.ndarray


def ucv_score(sample, b: float) -> float:
    """Unbiased CV criterion ``int f_b^2 - (2/n) sum_i f_{b,-i}(y_i)`` for a Gaussian KDE."""
    y = np.asarray(sample, dtype=float)
    n = y.size
    d = pdist(y[:, None])
    # int f^2 = (1/n^2) sum_ij N(y_i - y_j; 0, 2b^2), diagonal terms included
    c2 = 1.0 / (2.0 * b * math.sqrt(math.pi))
    sq = (n * c2 + 2.0 * c2 * np.sum(np.exp(-d * d / (4.0 * b * b)))) / (n * n)
    c1 = 1.0 / (b * math.sqrt(2.0 * math.pi))
    loo = 2.0 * c1 * np.sum(np.exp(-d * d / (2.0 * b * b))) / (n * (n - 1))
    return float(sq - 2.0 * loo)


def kde_ucv(sample, grid: EvaluationGrid, n_candidates: int = 30) -> KdeResult:
    """Gaussian KDE with bandwidth chosen by unbiased cross-validation.

    Candidates are log-spaced over ``[0.05, 2]`` times the sample sd; the
    density is evaluated and renormalized on ``grid``.
    """
    y = np.asarray(sample, dtype=float).ravel()
    if y.size < 3:
        raise DDRError("degenerate sample", "KDE needs at least 3 observations")
    sd = float(np.std(y, ddof=1))
    if not sd > 0:
        raise DDRError("degenerate sample", "sample has zero variance")
    cands = np.geomspace(0.05, 2.0, n_candidates) * sd
    scores = np.array([ucv_score(y, b) for b in cands])
    b = float(cands[int(np.argmin(scores))])
    u = (grid.points[None, :] - y[:, None]) / b
    raw = np.exp(-0.5 * u * u).sum(axis=0) / (y.size * b * math.sqrt(2.0 * math.pi))
    rows, bad = normalize_rows(raw, grid)
    est = DensityEstimate(grid, rows[0], True, ("degenerate density, uniform fallback",) if bad[0] else ())
    return KdeResult(est, b, cands, scores)


def welch_t_test(sample1, sample0):
    """Welch's unequal-variance t statistic and two-sided p-value."""
    a = np.asarray(sample1, dtype=float)
    b = np.asarray(sample0, dtype=float)
    if a.size < 2 or b.size < 2:
        raise DDRError("invalid sample", "each sample needs at least 2 observations")
    va, vb = a.var(ddof=1) / a.size, b.var(ddof=1) / b.size
    se2 = va + vb
    if not se2 > 0:
        raise DDRError("zero variance", "both samples have zero variance")
    t = float((a.mean() - b.mean()) / math.sqrt(se2))
    df = se2 * se2 / (va * va / (a.size - 1) + vb * vb / (b.size - 1))
    return t, float(2.0 * stats.t.sf(abs(t), df))
