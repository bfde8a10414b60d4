"""Conditional density estimation by regressing Gaussian delta targets on covariates."""

from .core import (
    DDRError,
    Dataset,
    DdrModel,
    DensityEstimate,
    EvaluationGrid,
    Hyperparameters,
    make_grid,
    standardize_outcome,
)
from .ddr import HyperparameterGrid, FitReport, ddr_fit, ddr_predict

__all__ = [
    "DDRError",
    "Dataset",
    "DdrModel",
    "DensityEstimate",
    "EvaluationGrid",
    "FitReport",
    "Hyperparameters",
    "HyperparameterGrid",
    "ddr_fit",
    "ddr_predict",
    "make_grid",
    "standardize_outcome",
]

__version__ = "0.1.0"
