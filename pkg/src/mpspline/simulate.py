"""Monte Carlo study: random predictor curves, coefficient functions, error laws.

Curves are truncated series X(t) = sum_{j<=n_terms} g_j Z_j phi_j(t) from one
of two families:

``well_spaced``
    g_j = sqrt(2) / ((j - 1/2) pi), Z_j ~ N(0, 1), phi_j(t) = sin((j - 1/2) pi t).
``closely_spaced``
    g_1 = 1, g_j = 0.2 (-1)^(j+1) (1 - 0.0001 j) for 2 <= j <= 4,
    g_j = 0.2 (-1)^(j+1) [(5 floor(j/5))^(-3/4) - 0.0001 (j mod 5)] for j >= 5,
    Z_j ~ U[-sqrt 3, sqrt 3], phi_1 = 1 and phi_j(t) = sqrt(2) cos(2 pi t)
    (``phi_variant="verbatim"``) or sqrt(2) cos(j pi t) (``"frequency_j"``).
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .design import FunctionalDataset, gamma_n_seminorm_sq, trapezoid_weights
from .exceptions import ConfigError, HarnessError, MPSplineError

__all__ = [
    "PROCESSES",
    "BETAS",
    "ERRORS",
    "SimulationConfig",
    "MCReport",
    "series_coefficients",
    "gen_curves",
    "beta_eval",
    "gen_errors",
    "gen_responses",
    "replication_rng",
    "run_replication",
    "run_monte_carlo",
]

PROCESSES = ("well_spaced", "closely_spaced")
BETAS = ("b1", "b2", "b3", "b4")
ERRORS = ("gaussian", "t3", "mix_gaussian", "slash")
PHI_VARIANTS = ("verbatim", "frequency_j")


@dataclass(frozen=True)
class SimulationConfig:
    process: str = "well_spaced"
    beta_id: str = "b1"
    error: str = "gaussian"
    n: int = 100
    grid_size: int = 100
    n_terms: int = 50
    replications: int = 200
    seed: int = 20240101
    phi_variant: str = "verbatim"
    loss: str = "huber"
    c: float | None = None
    p: int = 4
    q: int = 2
    basis_dim: int = 40
    criterion: str | None = None
    # samples of a custom coefficient function on the grid (beta_id="custom")
    beta_values: tuple | None = None

    def __post_init__(self):
        if self.process not in PROCESSES:
            raise ConfigError(f"unknown process {self.process!r}; expected one of {PROCESSES}")
        if self.beta_id not in BETAS + ("custom",):
            raise ConfigError(f"unknown beta_id {self.beta_id!r}; expected one of {BETAS} or 'custom'")
        if self.error not in ERRORS:
            raise ConfigError(f"unknown error law {self.error!r}; expected one of {ERRORS}")
        if self.phi_variant not in PHI_VARIANTS:
            raise ConfigError(f"unknown phi_variant {self.phi_variant!r}")
        if self.n < 10:
            raise ConfigError("n must be at least 10")
        if self.grid_size < 20:
            raise ConfigError("grid_size must be at least 20")
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")
        if self.n_terms < 1:
            raise ConfigError("n_terms must be at least 1")
        if self.beta_id == "custom":
            if self.beta_values is None or len(self.beta_values) != self.grid_size:
                raise ConfigError("custom beta needs grid_size samples in beta_values")
            object.__setattr__(self, "beta_values", tuple(float(v) for v in self.beta_values))
        if self.criterion is not None and self.criterion not in ("aicc", "gcv"):
            raise ConfigError(f"unknown criterion {self.criterion!r}")

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.grid_size)

    @property
    def scenario(self) -> str:
        return f"{self.process}/{self.beta_id}/{self.error}"

    def replace(self, **changes) -> "SimulationConfig":
        d = asdict(self)
        d.update(changes)
        return SimulationConfig(**d)


def series_coefficients(process: str, n_terms: int = 50) -> np.ndarray:
    j = np.arange(1, n_terms + 1, dtype=np.float64)
    if process == "well_spaced":
        return np.sqrt(2.0) / ((j - 0.5) * np.pi)
    if process == "closely_spaced":
        sign = np.where(j % 2 == 1, 1.0, -1.0)  # (-1)^(j+1)
        g = np.empty_like(j)
        g[0] = 1.0
        mid = (j >= 2) & (j <= 4)
        g[mid] = 0.2 * sign[mid] * (1.0 - 0.0001 * j[mid])
        hi = j >= 5
        block = 5.0 * np.floor(j[hi] / 5.0)
        g[hi] = 0.2 * sign[hi] * (block ** -0.75 - 0.0001 * (j[hi] % 5))
        return g
    raise ConfigError(f"unknown process {process!r}")


def _basis_functions(process: str, n_terms: int, t: np.ndarray, phi_variant: str) -> np.ndarray:
    j = np.arange(1, n_terms + 1, dtype=np.float64)[:, None]
    if process == "well_spaced":
        return np.sin((j - 0.5) * np.pi * t[None, :])
    phi = np.empty((n_terms, t.size))
    phi[0] = 1.0
    if phi_variant == "verbatim":
        phi[1:] = np.sqrt(2.0) * np.cos(2.0 * np.pi * t)[None, :]
    else:
        phi[1:] = np.sqrt(2.0) * np.cos(j[1:] * np.pi * t[None, :])
    return phi


def gen_curves(config: SimulationConfig, rng: np.random.Generator, n: int | None = None) -> FunctionalDataset:
    """Draw ``n`` (default ``config.n``) predictor curves on the configured grid."""
    n = config.n if n is None else n
    t = config.grid
    g = series_coefficients(config.process, config.n_terms)
    if config.process == "well_spaced":
        Z = rng.standard_normal((n, config.n_terms))
    else:
        Z = rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), size=(n, config.n_terms))
    phi = _basis_functions(config.process, config.n_terms, t, config.phi_variant)
    return FunctionalDataset(t, (Z * g) @ phi)


def _gauss(x, mu, sd):
    return np.exp(-0.5 * ((x - mu) / sd) ** 2) / (sd * math.sqrt(2.0 * math.pi))


def beta_eval(beta_id: str, x):
    """Value of a test coefficient function at ``x`` in [0, 1]."""
    x = np.asarray(x, dtype=np.float64)
    if beta_id == "b1":
        out = np.cos(2.0 * np.pi * x)
    elif beta_id == "b2":
        out = -_gauss(x, 0.2, 0.03) + 3.0 * _gauss(x, 0.5, 0.4) + _gauss(x, 0.75, 0.05)
    elif beta_id == "b3":
        out = 1.0 / (1.0 + np.exp(-20.0 * (x - 0.5)))
    elif beta_id == "b4":
        out = 1.0 / (0.1 + x) + 8.0 * np.exp(-400.0 * (x - 0.5) ** 2)
    else:
        raise ConfigError(f"unknown beta_id {beta_id!r}")
    return float(out) if out.ndim == 0 else out


def _beta_on_grid(config: SimulationConfig) -> np.ndarray:
    if config.beta_id == "custom":
        return np.asarray(config.beta_values, dtype=np.float64)
    return beta_eval(config.beta_id, config.grid)


def gen_errors(error: str, n: int, rng: np.random.Generator) -> np.ndarray:
    if error == "gaussian":
        return rng.standard_normal(n)
    if error == "t3":
        return rng.standard_t(3, size=n)
    if error == "mix_gaussian":
        shifted = rng.random(n) >= 0.9
        return rng.standard_normal(n) + 10.0 * shifted
    if error == "slash":
        z = rng.standard_normal(n)
        u = rng.random(n)
        # Generator.random is on [0, 1); map to (0, 1)
        return z / (1.0 - u)
    raise ConfigError(f"unknown error law {error!r}")


def gen_responses(
    predictors: FunctionalDataset,
    beta,
    error: str | None,
    rng: np.random.Generator | None = None,
) -> FunctionalDataset:
    """Responses Y_i = int X_i beta + eps_i (no intercept), trapezoid integral.

    ``beta`` is a beta id, a callable, or samples on the predictor grid;
    ``error=None`` gives noise-free responses.
    """
    grid = predictors.grid
    if isinstance(beta, str):
        bvals = beta_eval(beta, grid)
    elif callable(beta):
        bvals = np.asarray(beta(grid), dtype=np.float64)
    else:
        bvals = np.asarray(beta, dtype=np.float64)
    signal = predictors.curves @ (trapezoid_weights(grid) * bvals)
    eps = np.zeros(predictors.n) if error is None else gen_errors(error, predictors.n, rng)
    return predictors.with_responses(signal + eps)


def replication_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for replication ``index``; schedule independent."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def run_replication(config: SimulationConfig, index: int) -> dict:
    """Simulate one data set, fit it and score the slope estimate.

    Returns a dict with ``index``, ``mse``, ``lam``, ``edf`` and ``error``
    (``None`` on success, else a message).
    """
    from .model import fit_functional

    rng = replication_rng(config.seed, index)
    predictors = gen_curves(config, rng)
    bvals = _beta_on_grid(config)
    data = gen_responses(predictors, bvals, config.error, rng)
    try:
        model = fit_functional(
            data,
            loss=config.loss,
            c=config.c,
            p=config.p,
            q=config.q,
            basis_dim=config.basis_dim,
            criterion=config.criterion,
            rng=rng,
            # some curve processes cannot identify every unpenalized direction
            minimum_norm=True,
        )
        mse = gamma_n_seminorm_sq(data, model.beta(data.grid) - bvals)
    except (MPSplineError, ValueError, np.linalg.LinAlgError, FloatingPointError) as exc:
        return {"index": index, "mse": math.nan, "lam": math.nan, "edf": math.nan,
                "error": f"{type(exc).__name__}: {exc}"}
    if not math.isfinite(mse):
        return {"index": index, "mse": math.nan, "lam": math.nan, "edf": math.nan, "error": "non-finite MSE"}
    return {"index": index, "mse": mse, "lam": model.lam, "edf": model.fit.edf, "error": None}


@dataclass(frozen=True)
class MCReport:
    """Outcome of a Monte Carlo run.

    Per-replication arrays hold the successful replications only, in index
    order; ``failures`` maps failed replication indices to messages.
    """

    config: SimulationConfig
    indices: tuple
    mse: tuple
    lam: tuple
    edf: tuple
    failures: tuple = ()

    @property
    def mean_mse(self) -> float:
        return float(np.mean(self.mse)) if self.mse else math.nan

    @property
    def median_mse(self) -> float:
        return float(np.median(self.mse)) if self.mse else math.nan

    @property
    def n_failed(self) -> int:
        return len(self.failures)

    def to_dict(self) -> dict:
        return {
            "scenario": self.config.scenario,
            "config": asdict(self.config),
            "mean_mse": self.mean_mse,
            "median_mse": self.median_mse,
            "replications": self.config.replications,
            "failed": self.n_failed,
            "failures": [{"index": i, "error": e} for i, e in self.failures],
            "per_replication": [
                {"index": i, "mse": m, "lambda": l, "edf": e}
                for i, m, l, e in zip(self.indices, self.mse, self.lam, self.edf)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "mse", "lambda", "edf"])
        for row in zip(self.indices, self.mse, self.lam, self.edf):
            w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
        return buf.getvalue()


def run_monte_carlo(config: SimulationConfig, n_jobs: int = 1, max_failure_rate: float = 0.05) -> MCReport:
    """Run ``config.replications`` independent replications.

    Results do not depend on ``n_jobs``: every replication draws from its own
    stream. Failed fits are excluded and listed; more than
    ``max_failure_rate`` of them raises :class:`HarnessError`.
    """
    indices = range(config.replications)
    if n_jobs > 1 and config.replications > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            rows = list(pool.map(run_replication, [config] * config.replications, indices))
    else:
        rows = [run_replication(config, i) for i in indices]
    ok = [r for r in rows if r["error"] is None]
    failures = tuple((r["index"], r["error"]) for r in rows if r["error"] is not None)
    if len(failures) > max_failure_rate * config.replications:
        raise HarnessError(
            f"{len(failures)} of {config.replications} replications failed in {config.scenario}; "
            f"first: {failures[0][1]}"
        )
    return MCReport(
        config=config,
        indices=tuple(r["index"] for r in ok),
        mse=tuple(r["mse"] for r in ok),
        lam=tuple(r["lam"] for r in ok),
        edf=tuple(r["edf"] for r in ok),
        failures=failures,
    )
