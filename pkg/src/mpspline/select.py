"""Smoothing-parameter selection: robust corrected AIC or GCV, minimized by Nelder-Mead.

The search variable is u = log10(lam). Each criterion evaluation runs a
warm-started IRLS fit, so the criterion is a function of the fitted model
only; the preliminary scale is held fixed across lam.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np
from scipy import optimize

from .design import DesignMatrices
from .exceptions import (
    MPSplineError,
    OversmoothingGuardError,
    SelectionFailureError,
)
from .robust.irls import FitResult, irls_fit
from .robust.loss import RobustLoss
from .robust.scale import ScaleEstimate

__all__ = [
    "DEFAULT_BOUNDS",
    "DEFAULT_SCAN",
    "DEFAULT_STARTS",
    "SelectionResult",
    "aicc",
    "aicc_value",
    "classical_aicc",
    "gcv",
    "gcv_value",
    "select_lambda",
    "nelder_mead_1d",
]

DEFAULT_BOUNDS = (1e-8, 1e4)
DEFAULT_STARTS = (-6.0, -3.0, 0.0)
# coarse log10(lam) scan; the search also starts from its best point because
# the criterion can have a second basin that no default start reaches
DEFAULT_SCAN = tuple(float(u) for u in range(-8, 5))
# finite stand-in for "criterion undefined"; keeps simplex arithmetic free of inf - inf
_UNDEFINED = 1e300

Criterion = Union[str, Callable[[FitResult], float]]


def aicc_value(sigma2: float, trace: float, n: int) -> float:
    """log(sigma2) + 1 + 2 (trace + 1) / (n - trace - 2)."""
    if trace >= n - 2:
        raise OversmoothingGuardError(
            f"effective degrees of freedom {trace:.4g} >= n - 2 = {n - 2}; AICc undefined"
        )
    if not sigma2 > 0:
        raise OversmoothingGuardError("loss-based scale is zero; AICc undefined")
    return math.log(sigma2) + 1.0 + 2.0 * (trace + 1.0) / (n - trace - 2.0)


def aicc(fit: FitResult, n: int | None = None) -> float:
    """Robust AICc with sigma^2(lam) = n^-1 sum rho(r_i / s), s the preliminary scale."""
    n = fit.n if n is None else n
    s = fit.sigma.sigma
    sigma2 = float(np.mean(fit.loss.rho(fit.residuals / s)))
    return aicc_value(sigma2, fit.edf, n)


def classical_aicc(fit: FitResult, n: int | None = None) -> float:
    """Hurvich-Simonoff-Tsai AICc with the residual mean square."""
    n = fit.n if n is None else n
    return aicc_value(float(np.mean(fit.residuals**2)), fit.edf, n)


def gcv_value(rss: float, trace: float, n: int) -> float:
    if trace >= n:
        raise OversmoothingGuardError(f"effective degrees of freedom {trace:.4g} >= n = {n}; GCV undefined")
    return n * rss / (n - trace) ** 2


def gcv(fit: FitResult, n: int | None = None) -> float:
    n = fit.n if n is None else n
    return gcv_value(float(fit.residuals @ fit.residuals), fit.edf, n)


_CRITERIA = {"aicc": aicc, "gcv": gcv}


@dataclass(frozen=True)
class SelectionResult:
    lambda_opt: float
    criterion_value: float
    trace_path: tuple
    fit: FitResult
    at_boundary: bool = False
    n_evaluations: int = 0
    criterion: str = "aicc"


def nelder_mead_1d(
    f: Callable[[float], float],
    start: float,
    bounds: tuple[float, float],
    step: float = 1.0,
    xatol: float = 1e-4,
    maxiter: int = 500,
) -> tuple[float, float]:
    """Minimize a scalar function of one variable by Nelder-Mead within bounds.

    Trial points outside ``bounds`` get an undefined value, so reflections
    across a bound are rejected and the simplex contracts inside instead of
    collapsing onto the bound. The search ends when the two simplex vertices
    are closer than ``xatol``.
    """
    lo, hi = bounds
    start = min(max(start, lo), hi)
    other = start + step if start + step <= hi else start - step

    def g(x):
        u = float(x[0])
        return f(u) if lo <= u <= hi else _UNDEFINED

    res = optimize.minimize(
        g,
        x0=[start],
        method="Nelder-Mead",
        options={
            "initial_simplex": [[start], [other]],
            "xatol": xatol,
            "fatol": np.inf,
            "maxiter": maxiter,
            "maxfev": 4 * maxiter,
        },
    )
    return float(res.x[0]), float(res.fun)


def select_lambda(
    design: DesignMatrices,
    y,
    loss: RobustLoss,
    sigma: ScaleEstimate,
    criterion: Criterion = "aicc",
    bounds: tuple[float, float] = DEFAULT_BOUNDS,
    starts: Sequence[float] = DEFAULT_STARTS,
    start_gamma=None,
    tol: float = 1e-8,
    max_iter: int = 200,
    xatol: float = 1e-4,
    minimum_norm: bool = False,
    scan: Sequence[float] = DEFAULT_SCAN,
) -> SelectionResult:
    """Choose the smoothing parameter minimizing ``criterion``.

    ``starts`` are initial values of log10(lam). ``criterion`` is ``"aicc"``,
    ``"gcv"`` or a callable mapping a :class:`FitResult` to a number.
    The criterion is first evaluated at the log10(lam) values in ``scan``
    (clipped to the bounds) and Nelder-Mead additionally starts from the best
    of them. The best evaluated point overall is returned.
    Criterion failures (guard, singular system, divergence) count as +inf.
    ``minimum_norm`` is passed to :func:`irls_fit`.
    """
    lo, hi = bounds
    if not 0 < lo < hi:
        raise ValueError(f"bounds must satisfy 0 < lo < hi, got {bounds}")
    crit_fn = _CRITERIA[criterion] if isinstance(criterion, str) else criterion
    crit_name = criterion if isinstance(criterion, str) else getattr(criterion, "__name__", "custom")
    y = np.asarray(y, dtype=np.float64)
    ulo, uhi = math.log10(lo), math.log10(hi)

    path: list[tuple[float, float]] = []
    best: tuple[float, float, FitResult] | None = None

    def make_objective():
        state = {"gamma": None if start_gamma is None else np.asarray(start_gamma, dtype=np.float64)}

        def objective(u: float) -> float:
            nonlocal best
            lam = 10.0**u
            try:
                fit = irls_fit(design.Z, design.Dq_star, y, lam, loss, sigma,
                               start=state["gamma"], tol=tol, max_iter=max_iter,
                               penalty_root=design.penalty_root, minimum_norm=minimum_norm)
                value = float(crit_fn(fit))
            except MPSplineError:
                path.append((lam, math.inf))
                return _UNDEFINED
            if not math.isfinite(value):
                path.append((lam, math.inf))
                return _UNDEFINED
            state["gamma"] = fit.gamma
            path.append((lam, value))
            if best is None or value < best[1]:
                best = (u, value, fit)
            return value

        return objective

    all_starts = [float(u) for u in starts]
    if len(scan):
        # one warm-started sweep in increasing lam
        scan_objective = make_objective()
        values = [(scan_objective(u), u) for u in sorted({min(max(float(u), ulo), uhi) for u in scan})]
        value, u = min(values)
        if value < _UNDEFINED:
            all_starts.append(u)
    for u0 in all_starts:
        nelder_mead_1d(make_objective(), u0, (ulo, uhi), xatol=xatol)

    if best is None:
        raise SelectionFailureError("no smoothing parameter gave a finite criterion value")
    u_opt, value, fit = best
    edge = 1e-3
    return SelectionResult(
        lambda_opt=fit.lam,
        criterion_value=value,
        trace_path=tuple(path),
        fit=fit,
        at_boundary=bool(u_opt - ulo < edge or uhi - u_opt < edge),
        n_evaluations=len(path),
        criterion=crit_name,
    )
