"""Shared data model: datasets, evaluation grids, hyperparameters and densities."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_D = 500
DEFAULT_ARM = "all"


class DDRError(ValueError):
    """Error raised by the package, carrying a short machine-readable code."""

    def __init__(self, code: str, message: str | None = None):
        self.code = code
        self.message = message or code
        super().__init__(self.message)

    def __str__(self):
        return self.message


@dataclass(frozen=True)
class Dataset:
    """Covariates ``X`` (n, p), outcome ``y`` (n,) and optional treatment labels."""

    X: np.ndarray
    y: np.ndarray
    treatment: np.ndarray | None = None
    covariate_names: tuple[str, ...] | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.y, dtype=float).ravel()
        if X.ndim != 2:
            raise DDRError("invalid dataset", "covariates must be a 2-D matrix")
        if X.shape[0] != y.shape[0]:
            raise DDRError("invalid dataset", "outcome length does not match covariate rows")
        if y.shape[0] < 2:
            raise DDRError("invalid dataset", "need at least 2 samples")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DDRError("invalid dataset", "non-finite values in dataset")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if self.treatment is not None:
            t = np.asarray(self.treatment)
            if t.shape != (y.shape[0],):
                raise DDRError("invalid dataset", "treatment length does not match outcome")
            labels, counts = np.unique(t, return_counts=True)
            small = [str(lab) for lab, c in zip(labels, counts) if c < 2]
            if small:
                raise DDRError("invalid dataset", f"arm(s) with fewer than 2 samples: {', '.join(small)}")
            object.__setattr__(self, "treatment", t)
        if self.covariate_names is not None:
            names = tuple(str(c) for c in self.covariate_names)
            if len(names) != X.shape[1]:
                raise DDRError("invalid dataset", "covariate names do not match column count")
            object.__setattr__(self, "covariate_names", names)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def arms(self) -> list[str]:
        """Arm labels as strings, sorted; the implicit arm when untreated."""
        if self.treatment is None:
            return [DEFAULT_ARM]
        return sorted({str(t) for t in self.treatment})

    def arm_mask(self, arm) -> np.ndarray:
        if self.treatment is None:
            if str(arm) != DEFAULT_ARM:
                raise DDRError("unknown arm", f"unknown arm {arm!r}")
            return np.ones(self.n, dtype=bool)
        return np.array([str(t) == str(arm) for t in self.treatment])

    def subset(self, arm) -> tuple[np.ndarray, np.ndarray]:
        mask = self.arm_mask(arm)
        return self.X[mask], self.y[mask]


@dataclass(frozen=True)
class EvaluationGrid:
    """Equispaced outcome grid."""

    points: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.points, dtype=float).ravel()
        if z.size < 3:
            raise DDRError("invalid grid", "grid needs at least 3 points")
        steps = np.diff(z)
        spacing = (z[-1] - z[0]) / (z.size - 1)
        # absolute rounding of linspace grows with |z|, so allow a few ulps on top
        tol = 1e-12 * spacing + 8 * np.finfo(float).eps * np.max(np.abs(z))
        if not spacing > 0 or np.max(np.abs(steps - spacing)) >= tol:
            raise DDRError("invalid grid", "grid points must be strictly increasing and equispaced")
        z.setflags(write=False)
        object.__setattr__(self, "points", z)

    @property
    def d(self) -> int:
        return self.points.size

    @property
    def spacing(self) -> float:
        return float((self.points[-1] - self.points[0]) / (self.points.size - 1))

    @property
    def lo(self) -> float:
        return float(self.points[0])

    @property
    def hi(self) -> float:
        return float(self.points[-1])

    def affine(self, scale: float, shift: float) -> "EvaluationGrid":
        """Grid mapped through ``z -> scale * z + shift`` (scale > 0)."""
        return EvaluationGrid(self.points * scale + shift)


@dataclass(frozen=True)
class Hyperparameters:
    h: float
    ridge: float
    sigma_multiplier: float
    eta: float = 0.0

    def __post_init__(self):
        if not self.h > 0:
            raise DDRError("invalid hyperparameters", "h must be positive")
        if not self.ridge > 0:
            raise DDRError("invalid hyperparameters", "ridge must be positive")
        if not self.sigma_multiplier > 0:
            raise DDRError("invalid hyperparameters", "sigma_multiplier must be positive")
        if not self.eta >= 0:
            raise DDRError("invalid hyperparameters", "eta must be nonnegative")


@dataclass(frozen=True)
class DeltaMatrix:
    values: np.ndarray
    h: float


@dataclass(frozen=True)
class DensityEstimate:
    """Density values on a grid; evaluated off-grid by linear interpolation."""

    grid: EvaluationGrid
    values: np.ndarray
    normalized: bool = False
    warnings: tuple[str, ...] = ()

    def __call__(self, z):
        from .loss import interp_density

        return interp_density(self.values, self.grid, z)

    def auc(self) -> float:
        from .loss import trapezoid_auc

        return trapezoid_auc(self.values, self.grid)


@dataclass(frozen=True)
class ArmModel:
    """Everything needed to predict densities for one treatment arm."""

    X: np.ndarray
    coef: np.ndarray
    hyper: Hyperparameters
    bandwidth: float
    location: float
    scale: float
    grid: EvaluationGrid

    def __post_init__(self):
        # a fixed memory layout keeps predictions bit-identical after a reload
        object.__setattr__(self, "X", np.ascontiguousarray(self.X, dtype=float))
        object.__setattr__(self, "coef", np.ascontiguousarray(self.coef, dtype=float))
        if not self.scale > 0:
            raise DDRError("integrity", "outcome scale must be positive")
        if self.coef.shape != (self.X.shape[0], self.grid.d):
            raise DDRError(
                "integrity",
                f"coefficient shape {self.coef.shape} does not match "
                f"{self.X.shape[0]} samples x {self.grid.d} grid points",
            )


@dataclass(frozen=True)
class DdrModel:
    arms: dict[str, ArmModel]
    covariate_names: tuple[str, ...] | None = None
    reports: dict = field(default_factory=dict, compare=False, repr=False)


def make_grid(outcome, d: int = DEFAULT_D) -> EvaluationGrid:
    """``d`` equispaced points spanning the observed outcome range."""
    y = np.asarray(outcome, dtype=float).ravel()
    if d < 3:
        raise DDRError("invalid grid", "d must be at least 3")
    lo, hi = float(np.min(y)), float(np.max(y))
    if not hi > lo:
        raise DDRError("zero outcome range")
    return EvaluationGrid(np.linspace(lo, hi, int(d)))


def standardize_outcome(outcome):
    """Z-score the outcome with the sample (n - 1) standard deviation.

    Returns
    -------
    (standardized, location, scale)
    """
    y = np.asarray(outcome, dtype=float).ravel()
    if y.size < 2:
        raise DDRError("degenerate outcome")
    m = float(np.mean(y))
    s = float(np.std(y, ddof=1))
    if not s > 0:
        raise DDRError("degenerate outcome")
    return (y - m) / s, m, s


def unstandardize_outcome(z, location: float, scale: float):
    return np.asarray(z, dtype=float) * scale + location
