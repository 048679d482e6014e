"""Penalized M-estimation by iteratively reweighted least squares.

With gamma = (alpha, beta), design Z = [1, X] and penalty D* = diag(0, D_q),
the fit minimizes

    L(gamma) = n^-1 sum_i s^2 rho(r_i / s) + lam * gamma' D* gamma,
    r_i = Y_i - z_i' gamma,

for a fixed preliminary scale s. Its stationarity conditions are

    -n^-1 sum_i s psi(r_i / s) z_i + 2 lam D* gamma = 0,

and since s psi(r / s) = w(r / s) r they read

    (n^-1 Z' W Z + 2 lam D*) gamma = n^-1 Z' W Y,   W = diag(w(r_i / s)).

Multiplying the plain rho(r / s) objective by s^2 only rescales lam, so the
family of fits over lam >= 0 is the same; the s^2 factor is what keeps the
weighted system free of s (and makes square loss reduce to ordinary
penalized least squares whatever s is).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from ..exceptions import DivergenceError, SingularSystemError
from .loss import RobustLoss
from .scale import ScaleEstimate

__all__ = [
    "FitResult",
    "penalized_objective",
    "estimating_equations",
    "irls_fit",
    "hat_trace",
    "standardized_residuals",
]


@dataclass(frozen=True)
class FitResult:
    intercept: float
    coefficients: np.ndarray
    lam: float
    sigma: ScaleEstimate
    edf: float
    residuals: np.ndarray
    weights: np.ndarray
    iterations: int
    converged: bool
    objective: float
    loss: RobustLoss
    objective_path: tuple = field(default=(), repr=False)

    @property
    def gamma(self) -> np.ndarray:
        return np.concatenate([[self.intercept], self.coefficients])

    @property
    def n(self) -> int:
        return self.residuals.size


def _penalty_root(Dq_star: np.ndarray) -> np.ndarray:
    """Square matrix R with R'R = D* (D* symmetric positive semidefinite)."""
    e, V = np.linalg.eigh(Dq_star)
    return np.sqrt(np.clip(e, 0.0, None))[:, None] * V.T


# singular values below this fraction of the largest are treated as zero
# by the minimum-norm solver
_RCOND = 1e-10


def _stack(Z, R, w, lam):
    sw = np.sqrt(w / Z.shape[0])
    return np.vstack([Z * sw[:, None], np.sqrt(2.0 * lam) * R]), sw


def _augmented_qr(Z, R, w, lam):
    """Pivoted QR of [sqrt(w / n) Z; sqrt(2 lam) R].

    Solving the penalized weighted normal equations through this factorization
    squares the condition number far less than forming Z'WZ + 2 n lam D*.
    """
    m = Z.shape[1]
    A, sw = _stack(Z, R, w, lam)
    Q, Rq, piv = linalg.qr(A, mode="economic", pivoting=True)
    d = np.abs(np.diag(Rq))
    if not d[-1] > m * np.finfo(float).eps * d[0]:
        raise SingularSystemError(
            f"penalized normal equations are singular (pivot ratio {d[-1] / d[0] if d[0] else 0.0:.3g})"
        )
    return Q, Rq, piv, sw


def _solve_weighted(Z, R, y, w, lam, minimum_norm=False) -> np.ndarray:
    """gamma solving (n^-1 Z'WZ + 2 lam D*) gamma = n^-1 Z'W y.

    With ``minimum_norm`` a singular system yields its minimum-norm solution
    instead of an error.
    """
    n = Z.shape[0]
    try:
        Q, Rq, piv, sw = _augmented_qr(Z, R, w, lam)
    except SingularSystemError:
        if not minimum_norm:
            raise
        A, sw = _stack(Z, R, w, lam)
        b = np.concatenate([sw * y, np.zeros(A.shape[0] - n)])
        return np.linalg.lstsq(A, b, rcond=_RCOND)[0]
    gamma = np.empty(Z.shape[1])
    gamma[piv] = linalg.solve_triangular(Rq, Q[:n].T @ (sw * y))
    return gamma


def _sigma(sigma) -> float:
    return sigma.sigma if isinstance(sigma, ScaleEstimate) else float(sigma)


def penalized_objective(Z, Dq_star, y, gamma, lam, loss: RobustLoss, sigma, penalty_root=None) -> float:
    """n^-1 sum s^2 rho(r_i / s) + lam gamma' D* gamma.

    With ``penalty_root`` (R with R'R = D*) the penalty is summed as |R gamma|^2,
    which avoids the cancellation in gamma' D* gamma for smooth coefficients.
    """
    s = _sigma(sigma)
    r = y - Z @ gamma
    if penalty_root is None:
        pen = gamma @ Dq_star @ gamma
    else:
        rg = penalty_root @ gamma
        pen = rg @ rg
    return float(s * s * np.mean(loss.rho(r / s)) + lam * pen)


def estimating_equations(Z, Dq_star, y, gamma, lam, loss: RobustLoss, sigma, penalty_root=None) -> np.ndarray:
    """Gradient of :func:`penalized_objective`; zero at a stationary point."""
    s = _sigma(sigma)
    r = y - Z @ gamma
    n = y.size
    Dg = Dq_star @ gamma if penalty_root is None else penalty_root.T @ (penalty_root @ gamma)
    return -(Z.T @ (s * loss.psi(r / s))) / n + 2.0 * lam * Dg


def irls_fit(
    Z,
    Dq_star,
    y,
    lam: float,
    loss: RobustLoss,
    sigma: ScaleEstimate,
    start=None,
    tol: float = 1e-8,
    max_iter: int = 200,
    penalty_root=None,
    minimum_norm: bool = False,
) -> FitResult:
    """Fit a penalized M-estimator for one value of the smoothing parameter.

    Each iteration solves the weighted normal equations with weights from the
    current residuals. A step that would increase the objective is halved
    until it does not, so the recorded objective sequence never increases.
    Iteration stops when the relative l2 change of gamma is below ``tol``.

    ``penalty_root`` is an optional R with R'R = Dq_star; the solver works
    with the stacked system [sqrt(W / n) Z; sqrt(2 lam) R], so an exact root
    is more accurate than the one derived from ``Dq_star`` by default.

    A singular system raises :class:`SingularSystemError` unless
    ``minimum_norm`` is set, in which case each step takes the minimum-norm
    solution. That happens when the curves cannot separate some unpenalized
    direction; fitted values are unaffected by the choice of solution.
    """
    Z = np.asarray(Z, dtype=np.float64)
    Dq_star = np.asarray(Dq_star, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if lam < 0 or not np.isfinite(lam):
        raise ValueError(f"smoothing parameter must be finite and >= 0, got {lam}")
    s = _sigma(sigma)
    if not s > 0:
        raise ValueError("scale must be positive")
    if not isinstance(sigma, ScaleEstimate):
        sigma = ScaleEstimate(s, "fixed")

    R = _penalty_root(Dq_star) if penalty_root is None else np.asarray(penalty_root, dtype=np.float64)

    def objective(g):
        return penalized_objective(Z, Dq_star, y, g, lam, loss, s, R)

    if loss.family == "square":
        gamma = _solve_weighted(Z, R, y, np.ones_like(y), lam, minimum_norm)
        obj = objective(gamma)
        if not np.isfinite(obj):
            raise DivergenceError("objective is not finite")
        return _result(Z, R, y, gamma, lam, loss, sigma, 1, True, (obj,), minimum_norm)

    if start is None:
        gamma = _solve_weighted(Z, R, y, np.ones_like(y), lam, minimum_norm)
    else:
        gamma = np.array(start, dtype=np.float64)
    obj = objective(gamma)
    if not np.isfinite(obj):
        raise DivergenceError("objective at the starting point is not finite")
    path = [obj]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        w = loss.weight((y - Z @ gamma) / s)
        proposal = _solve_weighted(Z, R, y, w, lam, minimum_norm)
        step = proposal - gamma
        change = np.linalg.norm(step) / max(np.linalg.norm(gamma), 1e-300)
        new_obj = objective(proposal)
        if not np.isfinite(new_obj):
            raise DivergenceError(f"objective became non-finite at iteration {it}")
        if new_obj > obj and change < np.sqrt(tol):
            # round-off level increase next to the optimum; halving cannot help
            converged = True
            break
        t = 1.0
        while new_obj > obj and t > 2.0**-30:
            t *= 0.5
            proposal = gamma + t * step
            new_obj = objective(proposal)
        if new_obj > obj:
            # no descent along the IRLS direction although the step is not small
            break
        gamma, obj = proposal, new_obj
        path.append(obj)
        if change < tol:
            converged = True
            break
    if converged and loss.family == "huber":
        gamma, obj = _newton_polish(Z, R, Dq_star, y, gamma, obj, lam, loss, s, objective, path)
    return _result(Z, R, y, gamma, lam, loss, sigma, it, converged, tuple(path), minimum_norm)


def _newton_polish(Z, R, Dq_star, y, gamma, obj, lam, loss, s, objective, path, max_steps=10):
    """Newton steps on the converged huber fit.

    IRLS converges linearly, so its relative-change test can stop with a
    gradient well above round-off when the penalty is heavy. The huber
    objective is quadratic once the set of residuals inside the cutoff is
    fixed, so a Newton step on that set is exact. Steps that raise the
    objective or fail to shrink the gradient are rejected.
    """
    n = y.size
    grad = estimating_equations(Z, Dq_star, y, gamma, lam, loss, s, R)
    for _ in range(max_steps):
        gnorm = np.linalg.norm(grad)
        if gnorm == 0.0:
            break
        inside = (np.abs((y - Z @ gamma) / s) <= loss.tuning).astype(np.float64)
        try:
            Q, Rq, piv, _ = _augmented_qr(Z, R, inside, lam)
        except SingularSystemError:
            break
        # (A'A) step = -grad with A = Q Rq P'
        z = linalg.solve_triangular(Rq, -grad[piv], trans="T")
        step = np.empty_like(gamma)
        step[piv] = linalg.solve_triangular(Rq, z)
        cand = gamma + step
        cand_obj = objective(cand)
        cand_grad = estimating_equations(Z, Dq_star, y, cand, lam, loss, s, R)
        if not (cand_obj <= obj and np.linalg.norm(cand_grad) < gnorm):
            break
        gamma, obj, grad = cand, cand_obj, cand_grad
        path.append(obj)
    return gamma, obj


def _result(Z, R, y, gamma, lam, loss, sigma, iterations, converged, path, minimum_norm=False) -> FitResult:
    s = sigma.sigma
    resid = y - (gamma[0] + Z[:, 1:] @ gamma[1:])
    w = loss.weight(resid / s)
    return FitResult(
        intercept=float(gamma[0]),
        coefficients=gamma[1:].copy(),
        lam=float(lam),
        sigma=sigma,
        edf=_trace_from_root(Z, R, w, lam, minimum_norm),
        residuals=resid,
        weights=w,
        iterations=int(iterations),
        converged=bool(converged),
        objective=float(path[-1]),
        loss=loss,
        objective_path=tuple(path),
    )


def _trace_from_root(Z, R, w, lam, minimum_norm=False) -> float:
    # H is similar to Q1 Q1' with Q1 the data rows of the augmented QR factor
    n = Z.shape[0]
    try:
        Q, _, _, _ = _augmented_qr(Z, R, w, lam)
    except SingularSystemError:
        if not minimum_norm:
            raise
        # pseudo-inverse smoother: orthonormal basis of the retained range
        U, sv, _ = np.linalg.svd(_stack(Z, R, w, lam)[0], full_matrices=False)
        Q = U[:, sv > _RCOND * sv[0]]
    return float(np.sum(Q[:n] ** 2))


def hat_trace(Z, Dq_star, W, lam: float, penalty_root=None, minimum_norm: bool = False) -> float:
    """Trace of H = Z (Z'WZ + 2 n lam D*)^-1 Z'W.

    ``W`` is the vector of final IRLS weights (or a diagonal matrix);
    ``penalty_root`` is as in :func:`irls_fit`.
    """
    Z = np.asarray(Z, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    w = np.diag(W) if W.ndim == 2 else W
    R = _penalty_root(np.asarray(Dq_star, dtype=np.float64)) if penalty_root is None else penalty_root
    return _trace_from_root(Z, np.asarray(R, dtype=np.float64), w, lam, minimum_norm)


def standardized_residuals(fit: FitResult) -> np.ndarray:
    return fit.residuals / fit.sigma.sigma
