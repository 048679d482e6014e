"""Clamped B-spline bases on [0, 1] and their derivative penalty matrices.

A basis of order ``p`` (degree ``p - 1``) with ``K`` interior knots has
dimension ``K + p``. Boundary knots are replicated ``p`` times, so every basis
function vanishes outside its knot span and the first/last functions
interpolate the endpoints.

Evaluation uses the Cox--de Boor recursion; derivatives are obtained by raising
lower-order B-splines with the derivative recurrence

    B'_{i,k}(t) = (k - 1) * [ B_{i,k-1}(t) / (T_{i+k-1} - T_i)
                              - B_{i+1,k-1}(t) / (T_{i+k} - T_{i+1}) ]

so no finite differencing is involved.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from .exceptions import (
    DerivativeOrderError,
    InvalidKnotsError,
    InvalidOrderError,
    OutOfDomainError,
    PenaltyOrderError,
)

__all__ = [
    "BSplineBasis",
    "PenaltyMatrix",
    "make_basis",
    "basis_of_dimension",
    "eval_basis",
    "eval_basis_deriv",
    "penalty_matrix",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def _safe_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """num / den with the B-spline convention 0/0 = 0 (den == 0 gives 0)."""
    out = np.zeros(np.broadcast_shapes(num.shape, den.shape))
    nz = np.broadcast_to(den != 0, out.shape)
    np.divide(num, den, out=out, where=nz)
    return out


@dataclass(frozen=True)
class BSplineBasis:
    """Clamped B-spline basis of a given order on [0, 1].

    Attributes
    ----------
    order : int
        Spline order ``p`` (polynomial degree ``p - 1``).
    interior_knots : ndarray
        Strictly increasing knots inside (0, 1).
    full_knots : ndarray
        Extended knot vector: ``p`` zeros, the interior knots, ``p`` ones.
    """

    order: int
    interior_knots: np.ndarray
    full_knots: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        p = self.order
        if isinstance(p, bool) or not isinstance(p, (int, np.integer)) or p < 1:
            raise InvalidOrderError(f"spline order must be an integer >= 1, got {p!r}")
        knots = np.asarray(self.interior_knots, dtype=np.float64).ravel()
        if knots.size:
            if not np.all(np.isfinite(knots)):
                raise InvalidKnotsError("interior knots must be finite")
            if knots[0] <= 0.0 or knots[-1] >= 1.0:
                raise InvalidKnotsError("interior knots must lie in the open interval (0, 1)")
            if np.any(np.diff(knots) <= 0.0):
                raise InvalidKnotsError("interior knots must be strictly increasing")
        object.__setattr__(self, "order", int(p))
        object.__setattr__(self, "interior_knots", _frozen(knots))
        full = np.concatenate([np.zeros(p), knots, np.ones(p)])
        object.__setattr__(self, "full_knots", _frozen(full))

    @property
    def num_interior_knots(self) -> int:
        return int(self.interior_knots.size)

    @property
    def dimension(self) -> int:
        return self.num_interior_knots + self.order

    @property
    def breakpoints(self) -> np.ndarray:
        """Distinct knots 0 = u_0 < u_1 < ... < u_{K+1} = 1."""
        return np.concatenate([[0.0], self.interior_knots, [1.0]])

    def __eq__(self, other):
        if not isinstance(other, BSplineBasis):
            return NotImplemented
        return self.order == other.order and np.array_equal(
            self.interior_knots, other.interior_knots
        )

    def __hash__(self):
        return hash((self.order, self.interior_knots.tobytes()))

    def evaluate(self, t, deriv: int = 0) -> np.ndarray:
        """Evaluate all basis functions (or a derivative of them) at ``t``.

        Parameters
        ----------
        t : float or array_like
            Points in [0, 1].
        deriv : int
            Derivative order, ``0 <= deriv < order``.

        Returns
        -------
        ndarray
            Shape ``(dimension,)`` for scalar ``t``, else ``(len(t), dimension)``.
        """
        scalar = np.ndim(t) == 0
        x = np.atleast_1d(np.asarray(t, dtype=np.float64)).ravel()
        if not np.all((x >= 0.0) & (x <= 1.0)):
            raise OutOfDomainError("evaluation points must lie in [0, 1]")
        if isinstance(deriv, bool) or int(deriv) != deriv or deriv < 0:
            raise DerivativeOrderError(f"derivative order must be a nonnegative integer, got {deriv!r}")
        deriv = int(deriv)
        if deriv >= self.order:
            raise DerivativeOrderError(
                f"derivative order {deriv} must be below the spline order {self.order}"
            )
        out = self._collocation(x, deriv)
        return out[0] if scalar else out

    def _collocation(self, x: np.ndarray, deriv: int) -> np.ndarray:
        T = self.full_knots
        p = self.order
        n_int = T.size - 1
        # t = 1 belongs to the last non-degenerate interval (right-closed)
        last = p - 1 + self.num_interior_knots
        mu = np.clip(np.searchsorted(T, x, side="right") - 1, p - 1, last)

        N = np.zeros((x.size, n_int))
        N[np.arange(x.size), mu] = 1.0
        xc = x[:, None]
        for k in range(2, p - deriv + 1):
            m = n_int - k + 1
            i = np.arange(m)
            left = _safe_ratio(xc - T[i], T[i + k - 1] - T[i])
            right = _safe_ratio(T[i + k] - xc, T[i + k] - T[i + 1])
            N = left * N[:, :m] + right * N[:, 1 : m + 1]
        for k in range(p - deriv + 1, p + 1):
            m = n_int - k + 1
            i = np.arange(m)
            a = _safe_ratio(np.full(m, k - 1.0), T[i + k - 1] - T[i])
            b = _safe_ratio(np.full(m, k - 1.0), T[i + k] - T[i + 1])
            N = a * N[:, :m] - b * N[:, 1 : m + 1]
        return N

    def integrals(self) -> np.ndarray:
        """Exact integrals over [0, 1] of every basis function: (T_{i+p} - T_i) / p."""
        T, p = self.full_knots, self.order
        return (T[p:] - T[:-p])[: self.dimension] / p

    def greville(self) -> np.ndarray:
        """Greville abscissae (knot averages); valid interpolation sites."""
        T, p = self.full_knots, self.order
        if p == 1:
            return 0.5 * (T[:-1] + T[1:])[: self.dimension]
        win = np.lib.stride_tricks.sliding_window_view(T[1:-1], p - 1)
        return win.mean(axis=1)[: self.dimension]

    def interpolate(self, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """Coefficients of the spline interpolating ``f`` at the Greville abscissae."""
        g = self.greville()
        return np.linalg.solve(self.evaluate(g), np.asarray(f(g), dtype=np.float64))

    def project(self, f: Callable[[np.ndarray], np.ndarray], n_points: int = 401) -> np.ndarray:
        """Least-squares coefficients approximating ``f`` on a dense uniform grid."""
        t = np.linspace(0.0, 1.0, max(n_points, 4 * self.dimension))
        coef, *_ = np.linalg.lstsq(self.evaluate(t), np.asarray(f(t), dtype=np.float64), rcond=None)
        return coef

    def __call__(self, coefficients, t) -> np.ndarray:
        """Evaluate the spline sum_j c_j B_j(t)."""
        return self.evaluate(t) @ np.asarray(coefficients, dtype=np.float64)


@dataclass(frozen=True)
class PenaltyMatrix:
    """Gram matrix of q-th derivatives, ``D[i, j] = int B_i^(q) B_j^(q)``.

    ``root`` is the weighted derivative collocation matrix ``G`` with
    ``entries = G.T @ G``; :meth:`quad_form` evaluates ``c' D c`` as
    ``||G c||^2``, which avoids the cancellation of the dense product.
    """

    order_of_derivative: int
    entries: np.ndarray
    bandwidth: int
    root: np.ndarray = field(repr=False)

    def quad_form(self, c) -> float:
        v = self.root @ np.asarray(c, dtype=np.float64)
        return float(v @ v)

    @property
    def shape(self):
        return self.entries.shape

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


def make_basis(
    order: int,
    num_interior_knots: int | None = None,
    knots: Sequence[float] | str = "equispaced",
) -> BSplineBasis:
    """Build a clamped B-spline basis.

    ``knots`` is either ``"equispaced"`` (then ``num_interior_knots`` is
    required) or an explicit list of interior knots.
    """
    if isinstance(order, bool) or not isinstance(order, (int, np.integer)) or order < 1:
        raise InvalidOrderError(f"spline order must be an integer >= 1, got {order!r}")
    if isinstance(knots, str):
        if knots != "equispaced":
            raise InvalidKnotsError(f"unknown knot rule {knots!r}")
        if num_interior_knots is None or int(num_interior_knots) != num_interior_knots or num_interior_knots < 0:
            raise InvalidKnotsError(
                f"number of interior knots must be a nonnegative integer, got {num_interior_knots!r}"
            )
        K = int(num_interior_knots)
        interior = np.linspace(0.0, 1.0, K + 2)[1:-1]
    else:
        interior = np.asarray(knots, dtype=np.float64).ravel()
        if num_interior_knots is not None and interior.size != num_interior_knots:
            raise InvalidKnotsError(
                f"{interior.size} knots given but num_interior_knots={num_interior_knots}"
            )
    return BSplineBasis(int(order), interior)


def basis_of_dimension(dimension: int, order: int = 4) -> BSplineBasis:
    """Equispaced basis with ``dimension`` functions (``dimension - order`` interior knots)."""
    if dimension < order:
        raise InvalidKnotsError(f"basis dimension {dimension} is smaller than the order {order}")
    return make_basis(order, dimension - order)


def eval_basis(basis: BSplineBasis, t) -> np.ndarray:
    return basis.evaluate(t)


def eval_basis_deriv(basis: BSplineBasis, t, d: int) -> np.ndarray:
    return basis.evaluate(t, deriv=d)


def penalty_matrix(basis: BSplineBasis, q: int) -> PenaltyMatrix:
    """Exact q-th derivative penalty of ``basis``.

    The integrand on each knot interval is a polynomial of degree
    ``2 (p - 1 - q)``, integrated exactly by ``p - q`` Gauss--Legendre nodes.
    """
    p = basis.order
    if isinstance(q, bool) or int(q) != q or q < 1 or q >= p:
        raise PenaltyOrderError(f"penalty order must satisfy 1 <= q < p={p}, got {q!r}")
    q = int(q)
    n_nodes = -(-(2 * (p - 1 - q) + 1) // 2)
    z, w = leggauss(n_nodes)
    u = basis.breakpoints
    half = 0.5 * np.diff(u)
    mid = 0.5 * (u[:-1] + u[1:])
    nodes = (mid[:, None] + half[:, None] * z[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    root = np.sqrt(weights)[:, None] * basis.evaluate(nodes, deriv=q)
    D = root.T @ root
    D = 0.5 * (D + D.T)
    # entries outside the band are structurally zero
    i, j = np.indices(D.shape)
    D[np.abs(i - j) >= p] = 0.0
    return PenaltyMatrix(q, _frozen(D), p - 1, _frozen(root))
