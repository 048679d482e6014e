from .irls import (
    FitResult,
    estimating_equations,
    hat_trace,
    irls_fit,
    penalized_objective,
    standardized_residuals,
)
from .loss import RobustLoss, bisquare, huber, loss_eval, make_loss, square
from .scale import (
    ScaleEstimate,
    chi_bisquare,
    consistency_constant,
    initial_scale,
    m_scale,
    mad_scale,
    s_estimate,
)

__all__ = [
    "FitResult",
    "RobustLoss",
    "ScaleEstimate",
    "bisquare",
    "chi_bisquare",
    "consistency_constant",
    "estimating_equations",
    "hat_trace",
    "huber",
    "initial_scale",
    "irls_fit",
    "loss_eval",
    "m_scale",
    "mad_scale",
    "make_loss",
    "penalized_objective",
    "s_estimate",
    "square",
    "standardized_residuals",
]
