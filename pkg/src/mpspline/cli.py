"""Command-line front end: fit, predict, cross-validate, simulate, bench.

Every command is deterministic given its flags and ``--seed``. Failures are
reported on stderr as ``error: <kind>: <message>`` with a nonzero exit code
(2 for usage and input problems, 1 for numerical or harness failures).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .design import FunctionalDataset, load_dataset
from .exceptions import ConfigError, DatasetError, MPSplineError
from .model import FittedModel, fit_functional
from .robust.loss import DEFAULT_TUNING
from .simulate import BETAS, ERRORS, PHI_VARIANTS, PROCESSES, SimulationConfig, run_monte_carlo

__all__ = [
    "CVResult",
    "build_parser",
    "cmd_bench",
    "cmd_cv",
    "cmd_fit",
    "cmd_predict",
    "cmd_simulate",
    "cross_validate",
    "fold_assignment",
    "main",
    "trimmed_rmspe",
]

BETA_POINTS = 200
DEFAULT_FLAG_THRESHOLD = 2.5


# --- cross-validation ----------------------------------------------------------

def fold_assignment(n: int, folds: int, seed: int) -> np.ndarray:
    """Fold label of each observation: seeded shuffle, then contiguous blocks."""
    if folds < 2:
        raise ConfigError(f"need at least 2 folds, got {folds}")
    if n < 2 * folds:
        raise ConfigError(f"{n} observations cannot fill {folds} folds with at least 2 each")
    perm = np.random.default_rng(np.random.SeedSequence(seed)).permutation(n)
    labels = np.empty(n, dtype=np.int64)
    for f, block in enumerate(np.array_split(perm, folds)):
        labels[block] = f
    return labels


def _check_trim(trim: float) -> None:
    if not 0.0 <= trim < 0.5:
        raise ConfigError(f"trim must lie in [0, 0.5), got {trim}")


def trimmed_rmspe(errors, trim: float) -> float:
    """Root mean of squared errors after dropping the ceil(trim * n) largest."""
    _check_trim(trim)
    se = np.asarray(errors, dtype=np.float64) ** 2
    drop = math.ceil(trim * se.size)
    if drop == 0:
        # same summation order as the untrimmed statistic
        return float(np.sqrt(np.mean(se)))
    return float(np.sqrt(np.mean(np.sort(se)[: se.size - drop])))


@dataclass(frozen=True)
class CVResult:
    folds: np.ndarray
    predictions: np.ndarray
    responses: np.ndarray
    trim: float

    @property
    def errors(self) -> np.ndarray:
        return self.responses - self.predictions

    @property
    def rmspe(self) -> float:
        return trimmed_rmspe(self.errors, 0.0)

    @property
    def rmspe_trimmed(self) -> float:
        return trimmed_rmspe(self.errors, self.trim)


def cross_validate(data: FunctionalDataset, folds: int = 5, trim: float = 0.1, seed: int = 0, **fit_kwargs) -> CVResult:
    """k-fold prediction errors; scale and smoothing are re-estimated per fold."""
    if data.responses is None:
        raise DatasetError("cross-validation needs responses")
    _check_trim(trim)
    labels = fold_assignment(data.n, folds, seed)
    pred = np.empty(data.n)
    for f in range(folds):
        test = np.flatnonzero(labels == f)
        train = np.flatnonzero(labels != f)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(f,)))
        model = fit_functional(data.subset(train), rng=rng, **fit_kwargs)
        pred[test] = model.predict(data.subset(test))
    return CVResult(labels, pred, np.array(data.responses), trim)


# --- output helpers ------------------------------------------------------------

def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=True) + "\n"


def _check_distinct(inputs: Sequence[str | None], outputs: Sequence[str | None]) -> None:
    ins = {os.path.realpath(p) for p in inputs if p and p != "-"}
    seen = set()
    for p in outputs:
        if not p or p == "-":
            continue
        rp = os.path.realpath(p)
        if rp in ins:
            raise ConfigError(f"output path {p} would overwrite an input")
        if rp in seen:
            raise ConfigError(f"output path {p} is given twice")
        seen.add(rp)


def _fit_kwargs(args) -> dict:
    return {
        "loss": args.loss,
        "c": args.c,
        "p": args.p,
        "q": args.q,
        "basis_dim": args.basis_dim,
        "criterion": args.criterion,
        "lam": args.lam,
        "minimum_norm": args.minimum_norm,
    }


# --- commands ------------------------------------------------------------------

def cmd_fit(args) -> int:
    _check_distinct([args.data, args.responses], [args.model, args.beta])
    data = load_dataset(args.data, args.responses)
    model = fit_functional(data, rng=np.random.default_rng(np.random.SeedSequence(args.seed)), **_fit_kwargs(args))
    doc = model.to_dict()
    std = model.standardized_residuals()
    fitted = data.responses - model.fit.residuals
    doc["diagnostics"] = {
        "fitted": fitted.tolist(),
        "standardized_residuals": std.tolist(),
        "flag_threshold": args.flag_threshold,
        "flagged": np.flatnonzero(np.abs(std) > args.flag_threshold).tolist(),
    }
    _write_text(args.model, _json_text(doc))
    t = np.linspace(0.0, 1.0, BETA_POINTS)
    _write_text(args.beta, _csv_text(["t", "beta"], zip(t, model.beta(t))))
    return 0


def _load_model(path: str) -> FittedModel:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{path}: not a model file ({exc})") from None
    try:
        return FittedModel.from_dict(doc)
    except (KeyError, TypeError) as exc:
        raise DatasetError(f"{path}: malformed model file (missing or bad field {exc})") from None


def cmd_predict(args) -> int:
    _check_distinct([args.model, args.data], [args.out])
    model = _load_model(args.model)
    data = load_dataset(args.data)
    yhat = model.predict(data)
    if args.format == "json":
        _write_text(args.out, _json_text({"predictions": yhat.tolist()}))
    else:
        _write_text(args.out, _csv_text(["yhat"], ([v] for v in yhat)))
    return 0


def cmd_cv(args) -> int:
    _check_distinct([args.data, args.responses], [args.out, args.predictions])
    data = load_dataset(args.data, args.responses)
    res = cross_validate(data, folds=args.folds, trim=args.trim, seed=args.seed, **_fit_kwargs(args))
    summary = {"folds": args.folds, "trim": args.trim, "n": data.n,
               "rmspe": res.rmspe, "rmspe_trimmed": res.rmspe_trimmed}
    if args.format == "json":
        _write_text(args.out, _json_text(summary))
    else:
        _write_text(args.out, _csv_text(list(summary), [list(summary.values())]))
    if args.predictions:
        rows = zip(range(data.n), res.folds, res.responses, res.predictions)
        _write_text(args.predictions, _csv_text(["index", "fold", "y", "prediction"], rows))
    return 0


def _sim_config(args, **over) -> SimulationConfig:
    # bench supplies process, beta and error per scenario
    fields = dict(
        n=args.n, grid_size=args.grid_size,
        n_terms=args.n_terms, replications=args.replications, seed=args.seed, phi_variant=args.phi_variant,
        loss=args.loss, c=args.c, p=args.p, q=args.q, basis_dim=args.basis_dim, criterion=args.criterion,
    )
    fields.update(over)
    return SimulationConfig(**fields)


def cmd_simulate(args) -> int:
    cfg = _sim_config(args, process=args.process, beta_id=args.beta, error=args.error)
    report = run_monte_carlo(cfg, n_jobs=args.jobs)
    _write_text(args.out, report.to_json() + "\n" if args.format == "json" else report.to_csv())
    return 0


def cmd_bench(args) -> int:
    rows = []
    for process in args.processes:
        for beta in args.betas:
            for error in args.errors:
                for loss in args.losses:
                    cfg = _sim_config(args, process=process, beta_id=beta, error=error, loss=loss)
                    rep = run_monte_carlo(cfg, n_jobs=args.jobs)
                    rows.append([cfg.scenario, loss, rep.mean_mse, rep.median_mse, rep.n_failed])
    header = ["scenario", "loss", "mean", "median", "failed"]
    if args.format == "json":
        _write_text(args.out, _json_text([dict(zip(header, r)) for r in rows]))
    else:
        _write_text(args.out, _csv_text(header, rows))
    return 0


# --- parser --------------------------------------------------------------------

def _positive_float(s: str) -> float:
    v = float(s)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {s}")
    return v


def _add_estimator(p: argparse.ArgumentParser, loss_default: str = "huber", data_fit: bool = False) -> None:
    g = p.add_argument_group("estimator")
    g.add_argument("--loss", choices=sorted(DEFAULT_TUNING), default=loss_default)
    g.add_argument("--c", type=_positive_float, default=None, help="tuning constant (family default if omitted)")
    g.add_argument("--p", type=int, default=4, help="spline order")
    g.add_argument("--q", type=int, default=2, help="penalized derivative order")
    g.add_argument("--basis-dim", type=int, default=40)
    g.add_argument("--criterion", choices=["aicc", "gcv"], default=None,
                   help="default: gcv for square loss, aicc otherwise")
    g.add_argument("--seed", type=int, default=0)
    if not data_fit:
        # the simulation harness always selects lambda and allows minimum-norm solutions
        return
    g.add_argument("--lambda", dest="lam", type=_positive_float, default=None, help="fixed smoothing parameter")
    g.add_argument("--minimum-norm", action="store_true",
                   help="use minimum-norm solutions when the curves leave the fit unidentified")


def _add_simulation(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("simulation")
    g.add_argument("--n", type=int, default=100)
    g.add_argument("--grid-size", type=int, default=100)
    g.add_argument("--n-terms", type=int, default=50)
    g.add_argument("--replications", type=int, default=200)
    g.add_argument("--phi-variant", choices=PHI_VARIANTS, default="verbatim")
    g.add_argument("--jobs", type=int, default=1, help="worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mpspline", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a model to a CSV data set")
    p.add_argument("data", help="predictor CSV (or combined CSV with a leading y column)")
    p.add_argument("--responses", help="response CSV with header y")
    p.add_argument("--model", required=True, help="output model JSON")
    p.add_argument("--beta", required=True, help=f"output CSV of the coefficient function at {BETA_POINTS} points")
    p.add_argument("--flag-threshold", type=_positive_float, default=DEFAULT_FLAG_THRESHOLD)
    _add_estimator(p, data_fit=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict responses for new curves")
    p.add_argument("model", help="model JSON written by fit")
    p.add_argument("data", help="predictor CSV")
    p.add_argument("--out", default="-")
    p.add_argument("--format", choices=["json", "csv"], default="csv")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("cv", help="k-fold cross-validated prediction error")
    p.add_argument("data")
    p.add_argument("--responses")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--trim", type=float, default=0.1)
    p.add_argument("--out", default="-", help="summary output")
    p.add_argument("--predictions", help="per-observation CSV output")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    _add_estimator(p, data_fit=True)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("simulate", help="Monte Carlo run of one scenario")
    p.add_argument("--process", choices=PROCESSES, default="well_spaced")
    p.add_argument("--beta", choices=BETAS, default="b1")
    p.add_argument("--error", choices=ERRORS, default="gaussian")
    p.add_argument("--out", default="-")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    _add_estimator(p)
    _add_simulation(p)
    p.set_defaults(func=cmd_simulate, seed=20240101)

    p = sub.add_parser("bench", help="scenario grid, one row per scenario and loss")
    p.add_argument("--processes", nargs="+", choices=PROCESSES, default=["well_spaced"])
    p.add_argument("--betas", nargs="+", choices=BETAS, default=["b1"])
    p.add_argument("--errors", nargs="+", choices=ERRORS, default=list(ERRORS))
    p.add_argument("--losses", nargs="+", choices=sorted(DEFAULT_TUNING), default=["square", "huber"])
    p.add_argument("--out", default="-")
    p.add_argument("--format", choices=["json", "csv"], default="csv")
    _add_estimator(p)
    _add_simulation(p)
    p.set_defaults(func=cmd_bench, seed=20240101)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DatasetError, ConfigError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (MPSplineError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
