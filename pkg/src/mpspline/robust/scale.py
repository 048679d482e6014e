"""Preliminary robust scale: M-scale of residuals from an unpenalized S-estimator.

The chi function is Tukey's bisquare rho rescaled so that chi(inf) = 1, with
its tuning constant calibrated so that E chi(Z) = b for standard Gaussian Z.
That makes the M-scale consistent for the standard deviation at the normal
model and gives breakdown point min(b, 1 - b).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import optimize, special, stats

from ..exceptions import DegenerateScaleError

__all__ = [
    "ScaleEstimate",
    "chi_bisquare",
    "consistency_constant",
    "mad_scale",
    "m_scale",
    "s_estimate",
    "initial_scale",
]

_MAD_NORMAL = stats.norm.ppf(0.75)


@dataclass(frozen=True)
class ScaleEstimate:
    sigma: float
    method: str = "m_scale"
    breakdown: float = 0.5

    def __post_init__(self):
        s = float(self.sigma)
        if not (np.isfinite(s) and s > 0):
            raise DegenerateScaleError(f"scale must be finite and positive, got {self.sigma!r}")
        if self.method not in ("mad", "m_scale", "fixed"):
            raise ValueError(f"unknown scale method {self.method!r}")
        object.__setattr__(self, "sigma", s)

    def to_dict(self) -> dict:
        return {"sigma": self.sigma, "method": self.method, "breakdown": self.breakdown}


def chi_bisquare(u, c: float):
    u = np.asarray(u, dtype=np.float64)
    with np.errstate(over="ignore"):  # huge ratios saturate at chi = 1
        v = 1.0 - np.minimum(u * u / (c * c), 1.0)
    return 1.0 - v * v * v


def _bisquare_weight(u, c: float):
    a = np.minimum(np.abs(u) / c, 1.0)
    return (1.0 - a * a) ** 2


@lru_cache(maxsize=32)
def consistency_constant(b: float = 0.5) -> float:
    """Tuning constant c with E chi_c(Z) = b under Z ~ N(0, 1)."""
    if not 0.0 < b <= 0.5:
        raise ValueError(f"breakdown target must lie in (0, 0.5], got {b}")

    def expected(c):
        # chi_c(z) = 3 u - 3 u^2 + u^3 with u = z^2 / c^2 on |z| < c, and
        # E[Z^(2k); |Z| < c] = (2k - 1)!! * P(k + 1/2, c^2 / 2)
        h = 0.5 * c * c
        m1 = special.gammainc(1.5, h)
        m2 = 3.0 * special.gammainc(2.5, h)
        m3 = 15.0 * special.gammainc(3.5, h)
        inside = 3.0 * m1 / c**2 - 3.0 * m2 / c**4 + m3 / c**6
        return inside + 2.0 * stats.norm.sf(c)

    return float(optimize.brentq(lambda c: expected(c) - b, 0.05, 50.0, xtol=1e-14))


def mad_scale(r) -> float:
    """Normalised median absolute deviation about the median."""
    r = np.asarray(r, dtype=np.float64)
    return float(np.median(np.abs(r - np.median(r))) / _MAD_NORMAL)


def m_scale(
    r,
    b: float = 0.5,
    c: float | None = None,
    tol: float = 1e-12,
    max_iter: int = 1000,
    s0: float | None = None,
) -> float:
    """Solve mean(chi(r / s)) = b for s by fixed-point iteration.

    Starts from ``s0`` if given, else from the normalised MAD about zero.
    Returns 0.0 when the residuals are (almost all) exactly zero.
    """
    r = np.asarray(r, dtype=np.float64).ravel()
    if c is None:
        c = consistency_constant(b)
    s = float(s0) if s0 else float(np.median(np.abs(r)) / _MAD_NORMAL)
    if s == 0.0:
        s = float(np.max(np.abs(r), initial=0.0))
        if s == 0.0:
            return 0.0
    def g(v):
        return v * np.sqrt(np.mean(chi_bisquare(r / v, c)) / b)

    # fixed-point map accelerated with Steffensen (Aitken delta-squared) steps
    for _ in range(max_iter):
        s1 = g(s)
        if s1 == 0.0:
            return 0.0
        if abs(s1 - s) <= tol * s:
            return float(s1)
        s2 = g(s1)
        if abs(s2 - s1) <= tol * s1:
            return float(s2)
        den = s2 - 2.0 * s1 + s
        s_new = s - (s1 - s) ** 2 / den if den != 0.0 else s2
        s = s_new if (s_new > 0.0 and np.isfinite(s_new)) else s2
    return float(s)


def _wls(Z, y, w):
    sw = np.sqrt(w)
    coef, _, rank, _ = np.linalg.lstsq(Z * sw[:, None], y * sw, rcond=None)
    return coef if rank == Z.shape[1] else None


def _i_steps(Z, y, coef, b, c, steps, tol=1e-10, s=None):
    """Scale-reducing reweighting steps of the S-estimator; returns (coef, scale)."""
    if s is None:
        s = m_scale(y - Z @ coef, b, c)
    for _ in range(steps):
        if s == 0.0:
            break
        new = _wls(Z, y, _bisquare_weight((y - Z @ coef) / s, c))
        if new is None:
            break
        s_new = m_scale(y - Z @ new, b, c, s0=s)
        if s_new > s:
            break
        done = s - s_new <= tol * s
        coef, s = new, s_new
        if done:
            break
    return coef, s


def s_estimate(
    Z,
    y,
    b: float = 0.5,
    n_subsamples: int = 50,
    rng: np.random.Generator | int | None = 0,
    n_keep: int = 5,
    initial_steps: int = 2,
    max_steps: int = 100,
    df_correction: bool = True,
):
    """Regression S-estimate by random elemental subsets plus refinement.

    Each of ``n_subsamples`` exact fits to a random subset of ``Z.shape[1]``
    rows is improved by ``initial_steps`` reweighting steps; the ``n_keep``
    best are iterated to convergence and the one with the smallest M-scale
    wins. With ``df_correction`` the reported scale of the winner solves
    ``(n - m)^-1 sum chi(r_i / s) = b`` instead, which removes most of the
    downward small-sample bias when ``m / n`` is not small.

    Returns
    -------
    (sigma, coef) : tuple[float, ndarray]
    """
    Z = np.asarray(Z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, m = Z.shape
    if n <= m:
        raise ValueError(f"S-estimation needs more observations ({n}) than columns ({m})")
    rng = np.random.default_rng(rng)
    c = consistency_constant(b)

    candidates = []
    attempts = 0
    while len(candidates) < n_subsamples and attempts < 20 * n_subsamples:
        attempts += 1
        idx = rng.choice(n, size=m, replace=False)
        coef, _, rank, sv = np.linalg.lstsq(Z[idx], y[idx], rcond=None)
        if rank < m or sv[-1] <= 1e-12 * sv[0]:
            continue
        candidates.append(_i_steps(Z, y, coef, b, c, initial_steps))
    if not candidates:
        raise ValueError("could not draw a nonsingular elemental subset")

    candidates.sort(key=lambda cs: cs[1])
    best_coef, best_s = None, np.inf
    for coef, s in candidates[:n_keep]:
        coef, s = _i_steps(Z, y, coef, b, c, max_steps, s=s)
        if s < best_s:
            best_coef, best_s = coef, s
    if df_correction and best_s > 0.0:
        # small-sample correction: (n - m)^-1 sum chi(r / s) = b
        best_s = m_scale(y - Z @ best_coef, b * (n - m) / n, c, s0=best_s)
    return float(best_s), best_coef


def initial_scale(data, basis, b: float = 0.5, rng=0, n_subsamples: int = 50, reduced_dim: int = 10):
    """Robust preliminary scale and IRLS warm start for a functional regression.

    An unpenalized regression spline of dimension ``min(reduced_dim, K + p)``
    (same order as ``basis``) is fitted by S-estimation, restricted to the
    numerical column space of its design. The coefficient
    function is re-expressed in ``basis`` by least squares.

    Returns
    -------
    (ScaleEstimate, ndarray)
        The scale and the warm start ``(alpha, beta_1, ..., beta_{K+p})``.
    """
    from ..basis import make_basis
    from ..design import spline_design

    if data.responses is None:
        raise ValueError("dataset has no responses")
    y = data.responses
    p = basis.order
    dim0 = min(reduced_dim, basis.dimension)
    small = make_basis(p, max(dim0 - p, 0))
    X0 = spline_design(data, small)
    # curves spanning few directions make X0 rank deficient; regress on its
    # column space and map back to the minimum-norm spline coefficients
    _, sv, vt = np.linalg.svd(X0, full_matrices=False)
    V = vt[: int(np.sum(sv > 1e-8 * sv[0]))].T
    Z0 = np.hstack([np.ones((data.n, 1)), X0 @ V])
    sigma, coef = s_estimate(Z0, y, b=b, n_subsamples=n_subsamples, rng=rng)
    coef = np.concatenate([[coef[0]], V @ coef[1:]])
    if not sigma > 1e-10 * float(np.max(np.abs(y))):
        raise DegenerateScaleError(
            "robust residual scale is zero: the responses are fitted exactly by the initial regression"
        )
    if small == basis:
        beta = coef[1:]
    else:
        beta = basis.project(lambda t: small(coef[1:], t))
    return ScaleEstimate(sigma, "m_scale", b), np.concatenate([[coef[0]], beta])

