"""End-to-end fitting of the M-type penalized spline functional regression."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .basis import BSplineBasis, basis_of_dimension
from .design import FunctionalDataset, inner_products, spline_design
from .exceptions import GridMismatchError
from .robust.irls import FitResult, irls_fit, standardized_residuals
from .robust.loss import RobustLoss, make_loss
from .robust.scale import ScaleEstimate, initial_scale, mad_scale
from .select import DEFAULT_BOUNDS, DEFAULT_STARTS, SelectionResult, select_lambda

__all__ = ["FittedModel", "fit_functional", "FORMAT_VERSION"]

FORMAT_VERSION = 1


@dataclass(frozen=True)
class FittedModel:
    basis: BSplineBasis
    q: int
    fit: FitResult
    grid: np.ndarray
    criterion: str | None = None
    selection: SelectionResult | None = None
    mean_curve: np.ndarray | None = None
    # scale used to standardize residuals in diagnostics; equals fit.sigma for robust losses
    diagnostic_scale: float | None = None

    @property
    def intercept(self) -> float:
        return self.fit.intercept

    @property
    def coefficients(self) -> np.ndarray:
        return self.fit.coefficients

    @property
    def lam(self) -> float:
        return self.fit.lam

    def beta(self, t) -> np.ndarray:
        """Estimated coefficient function at ``t``."""
        return self.basis(self.fit.coefficients, t)

    def _design(self, data: FunctionalDataset) -> np.ndarray:
        g = np.asarray(data.grid)
        if g.shape != self.grid.shape or not np.allclose(g, self.grid, rtol=0, atol=1e-12):
            raise GridMismatchError(
                f"predictor grid ({g.size} points) differs from the training grid ({self.grid.size} points)"
            )
        if self.mean_curve is not None:
            data = FunctionalDataset(data.grid, data.curves - self.mean_curve)
        return spline_design(data, self.basis)

    def predict(self, data: FunctionalDataset) -> np.ndarray:
        """Plug-in predictions alpha + int X_i beta_hat."""
        return self.fit.intercept + self._design(data) @ self.fit.coefficients

    def standardized_residuals(self) -> np.ndarray:
        if self.diagnostic_scale is None or self.diagnostic_scale == self.fit.sigma.sigma:
            return standardized_residuals(self.fit)
        return self.fit.residuals / self.diagnostic_scale

    def to_dict(self) -> dict:
        fit = self.fit
        out = {
            "format_version": FORMAT_VERSION,
            "alpha": fit.intercept,
            "coefficients": fit.coefficients.tolist(),
            "order": self.basis.order,
            "penalty_order": self.q,
            "interior_knots": self.basis.interior_knots.tolist(),
            "knots": self.basis.full_knots.tolist(),
            "lambda": fit.lam,
            "sigma": fit.sigma.to_dict(),
            "diagnostic_scale": self.diagnostic_scale,
            "edf": fit.edf,
            "loss": fit.loss.to_dict(),
            "criterion": self.criterion,
            "converged": fit.converged,
            "iterations": fit.iterations,
            "objective": fit.objective,
            "grid": self.grid.tolist(),
            "centered": self.mean_curve is not None,
            "mean_curve": None if self.mean_curve is None else self.mean_curve.tolist(),
        }
        if self.selection is not None:
            out["selection"] = {
                "criterion_value": self.selection.criterion_value,
                "at_boundary": self.selection.at_boundary,
                "evaluations": self.selection.n_evaluations,
            }
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "FittedModel":
        version = d.get("format_version")
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported model format_version {version!r} (expected {FORMAT_VERSION})")
        basis = BSplineBasis(int(d["order"]), np.asarray(d["interior_knots"], dtype=np.float64))
        coef = np.asarray(d["coefficients"], dtype=np.float64)
        if coef.size != basis.dimension:
            raise ValueError(f"model has {coef.size} coefficients for a basis of dimension {basis.dimension}")
        sig = d["sigma"]
        loss = RobustLoss(d["loss"]["family"], d["loss"]["tuning"])
        fit = FitResult(
            intercept=float(d["alpha"]),
            coefficients=coef,
            lam=float(d["lambda"]),
            sigma=ScaleEstimate(sig["sigma"], sig["method"], sig.get("breakdown", 0.5)),
            edf=float(d["edf"]),
            residuals=np.zeros(0),
            weights=np.zeros(0),
            iterations=int(d["iterations"]),
            converged=bool(d["converged"]),
            objective=float(d["objective"]),
            loss=loss,
        )
        mean_curve = d.get("mean_curve")
        return cls(
            basis=basis,
            q=int(d["penalty_order"]),
            fit=fit,
            grid=np.asarray(d["grid"], dtype=np.float64),
            criterion=d.get("criterion"),
            mean_curve=None if mean_curve is None else np.asarray(mean_curve, dtype=np.float64),
            diagnostic_scale=d.get("diagnostic_scale"),
        )


def fit_functional(
    data: FunctionalDataset,
    loss: str | RobustLoss = "huber",
    c: float | None = None,
    p: int = 4,
    q: int = 2,
    basis_dim: int = 40,
    criterion: str | None = None,
    lam: float | None = None,
    bounds: tuple[float, float] = DEFAULT_BOUNDS,
    starts: Sequence[float] = DEFAULT_STARTS,
    b: float = 0.5,
    n_subsamples: int = 50,
    rng=0,
    center: bool = False,
    tol: float = 1e-8,
    max_iter: int = 200,
    minimum_norm: bool = False,
) -> FittedModel:
    """Fit a penalized spline estimator of the coefficient function.

    Parameters
    ----------
    data : FunctionalDataset
        Curves and responses.
    loss : str or RobustLoss
        ``"huber"``, ``"bisquare"`` or ``"square"``; ``c`` overrides the
        default tuning constant.
    p, q, basis_dim : int
        Spline order, penalty derivative order and basis dimension (equispaced
        interior knots).
    criterion : {"aicc", "gcv"}, optional
        Defaults to GCV for the square loss and AICc otherwise.
    lam : float, optional
        Fixed smoothing parameter; skips selection.
    rng : int or Generator
        Drives the S-estimator subsampling.
    minimum_norm : bool
        Take minimum-norm solutions when the curves leave an unpenalized
        direction unidentified, instead of failing.

    Returns
    -------
    FittedModel
    """
    if data.responses is None:
        raise ValueError("dataset has no responses")
    loss_obj = loss if isinstance(loss, RobustLoss) else make_loss(loss, c)
    if criterion is None:
        criterion = "gcv" if loss_obj.family == "square" else "aicc"
    basis = basis_of_dimension(basis_dim, p)
    mean_curve = data.curves.mean(axis=0) if center else None
    work = data.centered() if center else data
    design = inner_products(work, basis, q)
    y = work.responses

    if loss_obj.family == "square":
        # the square-loss fit does not depend on the scale
        sigma, start = ScaleEstimate(1.0, "fixed"), None
    else:
        sigma, start = initial_scale(work, basis, b=b, rng=rng, n_subsamples=n_subsamples)

    selection = None
    if lam is not None:
        fit = irls_fit(design.Z, design.Dq_star, y, float(lam), loss_obj, sigma, start=start, tol=tol,
                       max_iter=max_iter, penalty_root=design.penalty_root, minimum_norm=minimum_norm)
    else:
        selection = select_lambda(design, y, loss_obj, sigma, criterion=criterion, bounds=bounds,
                                  starts=starts, start_gamma=start, tol=tol, max_iter=max_iter,
                                  minimum_norm=minimum_norm)
        fit = selection.fit

    if loss_obj.family == "square":
        diag = mad_scale(fit.residuals)
        diag = diag if diag > 0 else None
    else:
        diag = sigma.sigma
    return FittedModel(
        basis=basis,
        q=q,
        fit=fit,
        grid=np.array(data.grid),
        criterion=None if lam is not None else criterion,
        selection=selection,
        mean_curve=mean_curve,
        diagnostic_scale=diag,
    )
