"""Discretized functional predictors and the regression design built from them."""
from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass
from typing import Callable, TextIO, Union

import numpy as np

from .basis import BSplineBasis, penalty_matrix
from .exceptions import (
    DatasetError,
    EmptyInputError,
    GridMismatchError,
    InsufficientResolutionError,
    ParseError,
    RowCountMismatchError,
)

__all__ = [
    "FunctionalDataset",
    "DesignMatrices",
    "trapezoid_weights",
    "spline_design",
    "inner_products",
    "gamma_n_seminorm_sq",
    "load_dataset",
    "write_dataset",
]

Source = Union[str, os.PathLike, TextIO]


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FunctionalDataset:
    """``n`` curves sampled on a shared grid, with optional scalar responses.

    ``curves[i, j]`` is X_i(grid[j]).
    """

    grid: np.ndarray
    curves: np.ndarray
    responses: np.ndarray | None = None

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=np.float64).ravel()
        curves = np.asarray(self.curves, dtype=np.float64)
        if curves.ndim == 1:
            curves = curves[None, :]
        if grid.size < 2:
            raise DatasetError("the grid needs at least two points")
        if np.any(np.diff(grid) <= 0):
            raise DatasetError("grid must be strictly increasing")
        if grid[0] < 0.0 or grid[-1] > 1.0:
            raise DatasetError("grid must lie within [0, 1]")
        if curves.ndim != 2 or curves.shape[1] != grid.size:
            raise DatasetError(
                f"curves have shape {curves.shape}, expected (n, {grid.size})"
            )
        if not np.all(np.isfinite(curves)):
            raise DatasetError("curves contain non-finite values")
        object.__setattr__(self, "grid", _readonly(grid))
        object.__setattr__(self, "curves", _readonly(curves))
        if self.responses is not None:
            y = np.asarray(self.responses, dtype=np.float64).ravel()
            if y.size != curves.shape[0]:
                raise RowCountMismatchError(
                    f"{curves.shape[0]} curves but {y.size} responses"
                )
            if not np.all(np.isfinite(y)):
                raise DatasetError("responses contain non-finite values")
            object.__setattr__(self, "responses", _readonly(y))

    @property
    def n(self) -> int:
        return self.curves.shape[0]

    @property
    def k(self) -> int:
        return self.grid.size

    def with_responses(self, y) -> "FunctionalDataset":
        return FunctionalDataset(self.grid, self.curves, y)

    def subset(self, idx) -> "FunctionalDataset":
        y = None if self.responses is None else self.responses[idx]
        return FunctionalDataset(self.grid, self.curves[idx], y)

    def centered(self) -> "FunctionalDataset":
        """Copy with the pointwise sample-mean curve subtracted."""
        return FunctionalDataset(self.grid, self.curves - self.curves.mean(axis=0), self.responses)


@dataclass(frozen=True)
class DesignMatrices:
    """X[i, j] = <B_j, X_i>; Z = [1, X]; Dq_star = diag(0, D_q).

    ``penalty_root`` is a matrix R with R'R = Dq_star (the quadrature root of
    D_q behind a zero intercept column), used by the solvers.
    """

    X: np.ndarray
    Z: np.ndarray
    Dq_star: np.ndarray
    q: int
    penalty_root: np.ndarray | None = None


def trapezoid_weights(grid) -> np.ndarray:
    """Weights w with sum_j w_j f(grid_j) the composite trapezoid rule."""
    grid = np.asarray(grid, dtype=np.float64)
    h = np.diff(grid)
    w = np.zeros_like(grid)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w


def _check_resolution(grid: np.ndarray, basis: BSplineBasis) -> None:
    T, p = basis.full_knots, basis.order
    lo = np.searchsorted(grid, T[: basis.dimension], side="left")
    hi = np.searchsorted(grid, T[p : p + basis.dimension], side="right")
    counts = hi - lo
    bad = np.flatnonzero(counts < 2)
    if bad.size:
        j = int(bad[0])
        raise InsufficientResolutionError(
            f"basis function {j} (support [{T[j]:.4g}, {T[j + p]:.4g}]) overlaps "
            f"{int(counts[j])} grid point(s); need at least 2"
        )


def spline_design(data: FunctionalDataset, basis: BSplineBasis) -> np.ndarray:
    """Matrix of trapezoid-rule inner products <B_j, X_i>, shape (n, K + p)."""
    _check_resolution(data.grid, basis)
    W = trapezoid_weights(data.grid)[:, None] * basis.evaluate(data.grid)
    return data.curves @ W


def inner_products(
    data: FunctionalDataset, basis: BSplineBasis, q: int = 2, center: bool = False
) -> DesignMatrices:
    """Assemble the spline design by trapezoid quadrature on the data grid."""
    if center:
        data = data.centered()
    X = spline_design(data, basis)
    Z = np.hstack([np.ones((data.n, 1)), X])
    pen = penalty_matrix(basis, q)
    Dq_star = np.zeros((basis.dimension + 1, basis.dimension + 1))
    Dq_star[1:, 1:] = pen.entries
    root = np.hstack([np.zeros((pen.root.shape[0], 1)), pen.root])
    return DesignMatrices(X=X, Z=Z, Dq_star=Dq_star, q=int(q), penalty_root=root)


def gamma_n_seminorm_sq(
    data: FunctionalDataset, f: np.ndarray | Callable, grid=None
) -> float:
    """Empirical semi-norm n^-1 sum_i (int X_i f)^2 with trapezoid integrals.

    ``f`` is either sampled on ``data.grid`` or a callable evaluated there. If
    ``grid`` is given it must coincide with the data grid.
    """
    if grid is not None:
        grid = np.asarray(grid, dtype=np.float64)
        if grid.shape != data.grid.shape or not np.allclose(grid, data.grid, rtol=0, atol=1e-12):
            raise GridMismatchError("function grid differs from the data grid")
    vals = f(data.grid) if callable(f) else f
    vals = np.asarray(vals, dtype=np.float64).ravel()
    if vals.size != data.k:
        raise GridMismatchError(f"function has {vals.size} samples, grid has {data.k}")
    proj = data.curves @ (trapezoid_weights(data.grid) * vals)
    return float(np.mean(proj**2))


# --- CSV ingestion -----------------------------------------------------------

def _open(source: Source):
    if hasattr(source, "read"):
        return source, False, getattr(source, "name", None)
    return open(source, newline=""), True, os.fspath(source)


def _read_rows(source: Source):
    fh, owned, name = _open(source)
    try:
        rows = [(i, r) for i, r in enumerate(csv.reader(fh), start=1)]
    finally:
        if owned:
            fh.close()
    rows = [(i, [c.strip() for c in r]) for i, r in rows if r and any(c.strip() for c in r)]
    return rows, name


def _parse_float(cell: str, line: int, name) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise ParseError(f"non-numeric field {cell!r}", line=line, source=name) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite field {cell!r}", line=line, source=name)
    return v


def _parse_table(rows, name, width: int) -> np.ndarray:
    out = np.empty((len(rows), width))
    for r, (line, cells) in enumerate(rows):
        if len(cells) != width:
            raise ParseError(
                f"expected {width} fields, found {len(cells)}", line=line, source=name
            )
        out[r] = [_parse_float(c, line, name) for c in cells]
    return out


def load_dataset(predictors: Source, responses: Source | None = None) -> FunctionalDataset:
    """Read curves (and responses) from CSV.

    The predictor file has a header of grid values followed by one curve per
    row. Responses come either from a separate single-column file headed ``y``
    or, when ``responses`` is None and the first header cell is ``y``, from
    the leading column of the predictor file. Without either, the dataset has
    no responses.
    """
    rows, name = _read_rows(predictors)
    if not rows:
        raise EmptyInputError(f"{name or 'predictor input'}: no data")
    hline, header = rows[0]
    combined = bool(header) and header[0].lower() == "y"
    grid_cells = header[1:] if combined else header
    grid = np.array([_parse_float(c, hline, name) for c in grid_cells])
    body = rows[1:]
    if not body:
        raise EmptyInputError(f"{name or 'predictor input'}: header but no curves")
    table = _parse_table(body, name, len(header))
    y = None
    if combined:
        y, curves = table[:, 0], table[:, 1:]
    else:
        curves = table
    if responses is not None:
        if combined:
            raise DatasetError("responses given twice (combined file and response file)")
        rrows, rname = _read_rows(responses)
        if not rrows:
            raise EmptyInputError(f"{rname or 'response input'}: no data")
        rline, rhead = rrows[0]
        if len(rhead) != 1 or rhead[0].lower() != "y":
            raise ParseError("response header must be the single column 'y'", line=rline, source=rname)
        y = _parse_table(rrows[1:], rname, 1)[:, 0]
        if y.size != curves.shape[0]:
            raise RowCountMismatchError(
                f"{rname or 'response input'} has {y.size} rows but there are "
                f"{curves.shape[0]} curves"
            )
    try:
        return FunctionalDataset(grid, curves, y)
    except DatasetError as exc:
        raise DatasetError(f"{name or 'predictor input'}: {exc}") from exc


def _fmt(v: float) -> str:
    return repr(float(v))


def write_dataset(
    data: FunctionalDataset, predictors: Source, responses: Source | None = None, combined: bool = False
) -> None:
    """Write ``data`` in the CSV layout understood by :func:`load_dataset`.

    Values use ``repr`` so a write/read round trip is lossless.
    """
    if combined and data.responses is None:
        raise DatasetError("combined output needs responses")

    def dump(target: Source, rows):
        fh, owned, _ = (target, False, None) if hasattr(target, "write") else (open(target, "w", newline=""), True, None)
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerows(rows)
        finally:
            if owned:
                fh.close()

    head = [_fmt(g) for g in data.grid]
    if combined:
        rows = [["y"] + head] + [
            [_fmt(y)] + [_fmt(v) for v in row] for y, row in zip(data.responses, data.curves)
        ]
        dump(predictors, rows)
        return
    dump(predictors, [head] + [[_fmt(v) for v in row] for row in data.curves])
    if responses is not None:
        if data.responses is None:
            raise DatasetError("dataset has no responses to write")
        dump(responses, [["y"]] + [[_fmt(y)] for y in data.responses])


def dataset_from_text(text: str, responses: str | None = None) -> FunctionalDataset:
    """Convenience wrapper around :func:`load_dataset` for in-memory CSV text."""
    return load_dataset(io.StringIO(text), None if responses is None else io.StringIO(responses))
