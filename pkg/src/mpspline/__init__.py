"""Robust penalized spline estimation for scalar-on-function regression."""
from .basis import BSplineBasis, PenaltyMatrix, basis_of_dimension, eval_basis, eval_basis_deriv, make_basis, penalty_matrix
from .design import (
    DesignMatrices,
    FunctionalDataset,
    gamma_n_seminorm_sq,
    inner_products,
    load_dataset,
    write_dataset,
)
from .model import FittedModel, fit_functional
from .robust import FitResult, RobustLoss, ScaleEstimate, irls_fit, make_loss
from .select import SelectionResult, aicc, gcv, select_lambda

__version__ = "0.1.0"

__all__ = [
    "BSplineBasis",
    "DesignMatrices",
    "FitResult",
    "FittedModel",
    "FunctionalDataset",
    "PenaltyMatrix",
    "RobustLoss",
    "ScaleEstimate",
    "SelectionResult",
    "aicc",
    "basis_of_dimension",
    "eval_basis",
    "eval_basis_deriv",
    "fit_functional",
    "gamma_n_seminorm_sq",
    "gcv",
    "inner_products",
    "irls_fit",
    "load_dataset",
    "make_basis",
    "make_loss",
    "penalty_matrix",
    "select_lambda",
    "write_dataset",
]
