"""Dirac delta regression: fit, hyperparameter selection and prediction.

The outcome of each arm is z-scored, expanded into Gaussian delta targets on
an equispaced grid, and regressed on the covariates with kernel ridge
regression. Hyperparameters ``(h, ridge, sigma)`` are picked by exact
leave-one-out on the empirical MISE; the post-processing threshold ``eta`` is
picked the same way after clipping and renormalizing the LOO rows.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .core import (
    DEFAULT_D,
    ArmModel,
    Dataset,
    DDRError,
    DdrModel,
    DensityEstimate,
    EvaluationGrid,
    Hyperparameters,
    make_grid,
    standardize_outcome,
)
from .kernels import build_delta_matrix, median_heuristic
from .krr import krr_fit, krr_loo, krr_predict, loo_from_hat, KrrFit
from .loss import empirical_mise, trapezoid_auc

logger = logging.getLogger(__name__)

DEGENERATE_WARNING = "degenerate density, uniform fallback"


@dataclass(frozen=True)
class HyperparameterGrid:
    h_candidates: tuple[float, ...] = tuple(np.round(np.linspace(0.01, 0.5, 50), 12))
    ridge_candidates: tuple[float, ...] = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
    sigma_multipliers: tuple[float, ...] = (0.5, 0.8, 1.1, 1.7, 2.0)
    eta_candidate_count: int = 26

    def __post_init__(self):
        for name in ("h_candidates", "ridge_candidates", "sigma_multipliers"):
            vals = tuple(float(v) for v in getattr(self, name))
            if not vals or any(not v > 0 for v in vals):
                raise DDRError("invalid hyperparameter grid", f"{name} must be nonempty and positive")
            object.__setattr__(self, name, vals)
        if self.eta_candidate_count < 1:
            raise DDRError("invalid hyperparameter grid", "eta_candidate_count must be >= 1")

    def search_order(self):
        """Combinations in tie-break priority: larger h, ridge, sigma first."""
        for h in sorted(set(self.h_candidates), reverse=True):
            for ridge in sorted(set(self.ridge_candidates), reverse=True):
                for sm in sorted(set(self.sigma_multipliers), reverse=True):
                    yield h, ridge, sm


@dataclass
class FitReport:
    hyper: Hyperparameters | None = None
    cv_loss: dict = field(default_factory=dict)
    eta_curve: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    median_distance: float | None = None

    @property
    def cv_best(self) -> float:
        h = self.hyper
        return self.cv_loss[(h.h, h.ridge, h.sigma_multiplier)]

    @property
    def eta_best(self) -> float:
        return self.eta_curve[self.hyper.eta]

    def summary(self) -> dict:
        h = self.hyper
        return {
            "h": h.h,
            "ridge": h.ridge,
            "sigma_multiplier": h.sigma_multiplier,
            "eta": h.eta,
            "cv_loss": self.cv_best,
            "eta_loss": self.eta_best,
            "warnings": list(self.warnings),
        }


# ---------------------------------------------------------------------------
# post-processing


def normalize_rows(values, grid: EvaluationGrid):
    """Clip at zero and divide each row by its trapezoidal area.

    Rows whose clipped area is below 1e-12 become the uniform density on the
    grid range. Returns ``(normalized, degenerate_mask)``.
    """
    V = np.maximum(np.atleast_2d(np.asarray(values, dtype=float)), 0.0)
    auc = trapezoid_auc(V, grid)
    bad = ~(auc >= 1e-12)
    out = np.empty_like(V)
    out[~bad] = V[~bad] / auc[~bad, None]
    out[bad] = 1.0 / (grid.hi - grid.lo)
    return out, bad


def sharpen_rows(values, grid: EvaluationGrid, eta: float):
    if not eta >= 0:
        raise DDRError("invalid eta", "eta must be nonnegative")
    return normalize_rows(np.asarray(values, dtype=float) - eta, grid)


def normalize_density(values, grid: EvaluationGrid) -> DensityEstimate:
    out, bad = normalize_rows(values, grid)
    return DensityEstimate(grid, out[0], True, (DEGENERATE_WARNING,) if bad[0] else ())


def sharpen_density(values, grid: EvaluationGrid, eta: float) -> DensityEstimate:
    """Subtract ``eta``, clip at zero, renormalize."""
    out, bad = sharpen_rows(values, grid, eta)
    return DensityEstimate(grid, out[0], True, (DEGENERATE_WARNING,) if bad[0] else ())


def postprocess(raw, grid: EvaluationGrid, eta: float):
    """Normalize, then sharpen; returns ``(rows, n_degenerate)``."""
    first, bad1 = normalize_rows(raw, grid)
    out, bad2 = sharpen_rows(first, grid, eta)
    return out, int(np.count_nonzero(bad1 | bad2))


# ---------------------------------------------------------------------------
# selection


def _check_inputs(X, y):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.shape[0]:
        raise DDRError("dimension mismatch", "outcome and covariates differ in length")
    if y.shape[0] < 3:
        raise DDRError("too few samples", "need at least 3 samples per arm")
    return X, y


def select_hyperparameters(X, outcome_std, grid: EvaluationGrid, hpgrid: HyperparameterGrid | None = None):
    """Leave-one-out grid search of ``(h, ridge, sigma_multiplier)``.

    Each combination is scored with :func:`empirical_mise` on the raw LOO
    estimates. Returns ``(Hyperparameters with eta=0, FitReport)``.
    """
    hpgrid = hpgrid or HyperparameterGrid()
    X, y = _check_inputs(X, outcome_std)
    n = y.size
    report = FitReport()
    med = median_heuristic(X)
    report.median_distance = med
    sqdist = squareform(pdist(X, "sqeuclidean"))

    hs = sorted(set(hpgrid.h_candidates), reverse=True)
    ridges = sorted(set(hpgrid.ridge_candidates), reverse=True)
    sigmas = sorted(set(hpgrid.sigma_multipliers), reverse=True)
    targets = {h: build_delta_matrix(y, grid, h).values for h in hs}

    losses: dict = {}
    saturated = 0
    for sm in sigmas:
        bw = sm * med
        K = np.exp(-sqdist / (2.0 * bw * bw))
        evals, U = np.linalg.eigh(K)
        evals = np.maximum(evals, 0.0)
        U2 = U * U
        for h in hs:
            T = targets[h]
            UtT = U.T @ T
            for ridge in ridges:
                shrink = evals / (evals + n * ridge)
                fitted = U @ (shrink[:, None] * UtT)
                leverage = U2 @ shrink
                try:
                    loo = loo_from_hat(fitted, T, leverage)
                except DDRError:
                    saturated += 1
                    continue
                loss = empirical_mise(loo, y, grid)
                if np.isfinite(loss):
                    losses[(h, ridge, sm)] = loss

    # deterministic reduction in tie-break order
    best_key, best_loss = None, np.inf
    for key in hpgrid.search_order():
        if key in losses and losses[key] < best_loss:
            best_key, best_loss = key, losses[key]
    if best_key is None:
        raise DDRError("no viable hyperparameters")
    if saturated:
        report.warnings.append(f"{saturated} combination(s) skipped: leverage saturation")
    report.cv_loss = {key: losses[key] for key in hpgrid.search_order() if key in losses}
    h, ridge, sm = best_key
    report.hyper = Hyperparameters(h=h, ridge=ridge, sigma_multiplier=sm, eta=0.0)
    logger.debug("selected h=%g ridge=%g sigma=%g loss=%.6g", h, ridge, sm, best_loss)
    return report.hyper, report


def eta_candidates(loo: np.ndarray, count: int) -> np.ndarray:
    if count == 1:
        return np.zeros(1)
    return np.linspace(0.0, 0.5 * float(np.max(loo)), count)


def select_eta(X, outcome_std, grid: EvaluationGrid, hyper: Hyperparameters,
               hpgrid: HyperparameterGrid | None = None, report: FitReport | None = None) -> float:
    """Pick the sharpening threshold by the empirical MISE of post-processed LOO rows.

    Ties go to the smaller threshold. Fills ``report.eta_curve`` when given.
    """
    hpgrid = hpgrid or HyperparameterGrid()
    X, y = _check_inputs(X, outcome_std)
    T = build_delta_matrix(y, grid, hyper.h).values
    bw = hyper.sigma_multiplier * median_heuristic(X)
    loo = krr_loo(X, T, hyper.ridge, bw)
    curve = {}
    best_eta, best_loss, degenerate = 0.0, np.inf, 0
    for eta in eta_candidates(loo, hpgrid.eta_candidate_count):
        rows, nbad = postprocess(loo, grid, float(eta))
        loss = empirical_mise(rows, y, grid)
        curve[float(eta)] = loss
        if loss < best_loss:
            best_eta, best_loss, degenerate = float(eta), loss, nbad
    if report is not None:
        report.eta_curve = curve
        if degenerate:
            report.warnings.append(f"{degenerate} LOO row(s) fell back to uniform at the selected eta")
    return best_eta


# ---------------------------------------------------------------------------
# pipeline


def fit_arm(X, y, d: int = DEFAULT_D, hpgrid: HyperparameterGrid | None = None):
    """Fit a single arm; returns ``(ArmModel, FitReport)``."""
    hpgrid = hpgrid or HyperparameterGrid()
    X, y = _check_inputs(X, y)
    y_std, loc, scale = standardize_outcome(y)
    grid = make_grid(y_std, d)
    hyper, report = select_hyperparameters(X, y_std, grid, hpgrid)
    bw = hyper.sigma_multiplier * report.median_distance
    T = build_delta_matrix(y_std, grid, hyper.h).values
    fit = krr_fit(X, T, hyper.ridge, bw)
    eta = select_eta(X, y_std, grid, hyper, hpgrid, report)
    hyper = Hyperparameters(hyper.h, hyper.ridge, hyper.sigma_multiplier, eta)
    report.hyper = hyper
    arm = ArmModel(X=X, coef=fit.coef, hyper=hyper, bandwidth=bw, location=loc, scale=scale, grid=grid)
    return arm, report


def ddr_fit(dataset: Dataset, d: int = DEFAULT_D, hpgrid: HyperparameterGrid | None = None) -> DdrModel:
    """Fit one conditional density model per treatment arm."""
    arms, reports = {}, {}
    for label in dataset.arms():
        X, y = dataset.subset(label)
        if y.size < 3:
            raise DDRError("arm too small", f"arm {label!r} has {y.size} samples, need at least 3")
        arms[label], reports[label] = fit_arm(X, y, d, hpgrid)
        logger.info("arm %s: %s", label, reports[label].summary())
    return DdrModel(arms=arms, covariate_names=dataset.covariate_names, reports=reports)


def refit_arm(X, y, hyper: Hyperparameters, d: int) -> ArmModel:
    """Refit an arm with hyperparameters held fixed (used by permutation tests)."""
    X, y = _check_inputs(X, y)
    y_std, loc, scale = standardize_outcome(y)
    grid = make_grid(y_std, d)
    bw = hyper.sigma_multiplier * median_heuristic(X)
    T = build_delta_matrix(y_std, grid, hyper.h).values
    fit = krr_fit(X, T, hyper.ridge, bw)
    return ArmModel(X=X, coef=fit.coef, hyper=hyper, bandwidth=bw, location=loc, scale=scale, grid=grid)


def predict_arm(arm: ArmModel, Xq, standardized: bool = False) -> list[DensityEstimate]:
    fit = KrrFit(X=arm.X, coef=arm.coef, bandwidth=arm.bandwidth, ridge=arm.hyper.ridge)
    raw = krr_predict(fit, Xq)
    first, bad1 = normalize_rows(raw, arm.grid)
    rows, bad2 = sharpen_rows(first, arm.grid, arm.hyper.eta)
    bad = bad1 | bad2
    if standardized:
        grid = arm.grid
    else:
        grid = arm.grid.affine(arm.scale, arm.location)
        rows = rows / arm.scale
    return [
        DensityEstimate(grid, row, True, (DEGENERATE_WARNING,) if b else ())
        for row, b in zip(rows, bad)
    ]


def ddr_predict(model: DdrModel, arm, Xq, standardized: bool = False) -> list[DensityEstimate]:
    """Conditional densities of ``arm`` at each query row, in outcome units.

    With ``standardized=True`` the densities stay on the arm's z-scored scale.
    """
    key = str(arm)
    if key not in model.arms:
        raise DDRError("unknown arm", f"unknown arm {arm!r}; model has {sorted(model.arms)}")
    return predict_arm(model.arms[key], Xq, standardized)
