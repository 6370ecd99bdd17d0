"""Command-line entry point: ``nonneg-gp --mode {fit,predict,benchmark}``.

Exit codes: 0 success, 2 bad input, 3 no feasible constrained fit.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import benchmark as bm
from .constrained import (
    DEFAULT_THETA0,
    ConstraintSpec,
    RestartPolicy,
    cdf_factor_for,
    minimize_constrained,
    minimize_unconstrained,
)
from .errors import DimensionMismatchError, NoFeasibleSolutionError
from .gp import TrainingSet, fit
from .kernel import Hyperparameters

log = logging.getLogger("nonneg_gp")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3

MODEL_FORMAT = "nonneg-gp-model/1"


class InputError(Exception):
    """Bad command-line input or malformed data file."""


def fmt(x) -> str:
    """Full round-trip precision (17 significant digits)."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _json_number(x):
    x = float(x)
    return x if math.isfinite(x) else None


# -- CSV input --------------------------------------------------------------

def read_points_csv(path, with_values: bool):
    """Read a headered CSV of coordinates, optionally followed by a value column.

    Returns ``(X, y)`` with ``y`` None when ``with_values`` is false.
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{path}: no such file")
    with path.open(newline="") as fh:
        rows = [row for row in csv.reader(fh) if any(cell.strip() for cell in row)]
    if not rows:
        raise InputError(f"{path}: empty file (a header row is required)")
    header, body = rows[0], rows[1:]
    if not body:
        raise InputError(f"{path}: header but no data rows")
    n_cols = len(header)
    min_cols = 2 if with_values else 1
    if n_cols < min_cols:
        raise InputError(f"{path}: need at least {min_cols} columns, header has {n_cols}")
    data = np.empty((len(body), n_cols))
    for i, row in enumerate(body, start=2):
        if len(row) != n_cols:
            raise InputError(f"{path}: row {i} has {len(row)} columns, expected {n_cols}")
        for j, cell in enumerate(row):
            try:
                value = float(cell)
            except ValueError:
                raise InputError(f"{path}: row {i}, column {j + 1} ({header[j]!r}): not a number: {cell!r}") from None
            if not math.isfinite(value):
                raise InputError(f"{path}: row {i}, column {j + 1} ({header[j]!r}): non-finite value")
            data[i - 2, j] = value
    if with_values:
        return data[:, :-1], data[:, -1]
    return data, None


def write_training_csv(path, training: TrainingSet):
    d = training.dim
    names = ["x"] if d == 1 else [f"x{k}" for k in range(d)]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names + ["y"])
        for x, y in zip(training.X, training.y):
            w.writerow([fmt(v) for v in x] + [fmt(y)])


# -- model files ------------------------------------------------------------

def model_to_dict(training, spec, result, constrained: bool) -> dict:
    return {
        "format": MODEL_FORMAT,
        "theta": {
            "log_l": result.theta.log_l,
            "log_sigma": result.theta.log_sigma,
            "log_sigma_n": result.theta.log_sigma_n,
        },
        "training": {"X": training.X.tolist(), "y": training.y.tolist()},
        "constraint_spec": {
            "points": spec.constraint_points.tolist(),
            "cdf_factor": spec.cdf_factor,
            "data_fit_eps": spec.data_fit_eps,
        },
        "constrained": constrained,
        "feasible": bool(result.feasible),
        "max_violation": _json_number(result.max_violation),
        "nll": _json_number(result.nll),
        "restarts_used": int(result.restarts_used),
    }


def load_model(path):
    """Return ``(FittedGP, model dict)`` from a model file."""
    try:
        model = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise InputError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON: {exc}") from None
    if model.get("format") != MODEL_FORMAT:
        raise InputError(f"{path}: not a model file (format {model.get('format')!r})")
    theta = Hyperparameters(**model["theta"])
    training = TrainingSet(model["training"]["X"], model["training"]["y"])
    return fit(training, theta), model


# -- commands ---------------------------------------------------------------

def _cdf_factor(args) -> float:
    return -2.0 if args.eta is None else cdf_factor_for(args.eta)


def _constraint_points(args, training, target):
    if args.constraints:
        pts, _ = read_points_csv(args.constraints, with_values=False)
        return pts
    if training.dim != 1:
        raise InputError("inputs with d > 1 need explicit --constraints PATH")
    if target is not None:
        domain = target.domain
        m = args.m or target.n_constraint_points
    else:
        domain = (float(training.X.min()), float(training.X.max()))
        m = args.m or 30
    return bm.equidistant(domain, m)[:, None]


def cmd_fit(args) -> int:
    target = bm.get_target(args.example) if args.example else None
    if args.data:
        X, y = read_points_csv(args.data, with_values=True)
        training = TrainingSet(X, y)
    elif target is not None:
        training = bm.make_training_set(target, args.seed)
    else:
        raise InputError("fit needs --data PATH or --example")
    spec = ConstraintSpec(_constraint_points(args, training, target), _cdf_factor(args), args.eps)
    if spec.constraint_points.shape[1] != training.dim:
        raise InputError("constraint points and training data differ in dimension")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    code = EXIT_OK
    if args.constrained:
        try:
            result = minimize_constrained(
                training, spec, DEFAULT_THETA0, RestartPolicy(args.max_restarts, args.seed)
            )
        except NoFeasibleSolutionError as exc:
            log.error("%s", exc)
            result = exc.best
            code = EXIT_INFEASIBLE
            if result is None:
                return code
    else:
        result = minimize_unconstrained(training, DEFAULT_THETA0, spec=spec)

    model = model_to_dict(training, spec, result, args.constrained)
    path = out / "model.json"
    path.write_text(json.dumps(model, indent=2) + "\n")
    print(f"wrote {path} (feasible={model['feasible']}, nll={fmt(result.nll)})")
    return code


def cmd_predict(args) -> int:
    if not args.model or not args.query:
        raise InputError("predict needs --model PATH and --query PATH")
    gp, _ = load_model(args.model)
    Xq, _ = read_points_csv(args.query, with_values=False)
    if Xq.shape[1] != gp.training.dim:
        raise InputError(f"query has {Xq.shape[1]} coordinates, model expects {gp.training.dim}")
    mean, var = gp.predict_many(Xq)
    std = np.sqrt(var)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "predictions.csv"
    d = Xq.shape[1]
    names = ["x"] if d == 1 else [f"x{k}" for k in range(d)]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names + ["mean", "std", "mean_minus_2std", "mean_plus_2std"])
        for x, mu, s in zip(Xq, mean, std):
            w.writerow([fmt(v) for v in x] + [fmt(mu), fmt(s), fmt(mu - 2 * s), fmt(mu + 2 * s)])
    print(f"wrote {path} ({len(Xq)} rows)")
    return EXIT_OK


def write_trials_csv(path, reports):
    names = [f.name for f in dataclasses.fields(bm.TrialReport)]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for r in reports:
            w.writerow([fmt(getattr(r, n)) for n in names])


def write_histogram_csv(path, hist):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_left", "bin_right", "mass", "density"])
        for lo, hi, mass, dens in zip(hist.edges[:-1], hist.edges[1:], hist.mass, hist.density):
            w.writerow([fmt(lo), fmt(hi), fmt(mass), fmt(dens)])


def cmd_benchmark(args) -> int:
    if not args.example:
        raise InputError("benchmark needs --example {1,2,3}")
    target = bm.get_target(args.example)
    config = bm.TrialConfig(
        target,
        n_constraint_points=args.m,
        n_test_points=args.test_points,
        seed=args.seed,
        cdf_factor=_cdf_factor(args),
        data_fit_eps=args.eps,
        max_restarts=args.max_restarts,
    )
    result = bm.run_experiment(config, args.trials, workers=args.jobs)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_trials_csv(out / "trials.csv", result.reports)
    for name, hist in result.histograms.items():
        write_histogram_csv(out / f"hist_{name}.csv", hist)
    (out / "summary.json").write_text(json.dumps(result.summary(), indent=2) + "\n")
    med = result.summary()["medians"]
    print(f"{target.id}: {len(result.reports)} trials, {result.n_infeasible} infeasible")
    for key, value in med.items():
        print(f"  median {key}: {value}")
    print(f"wrote {out}")
    return EXIT_OK


# -- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="nonneg-gp",
        description="Gaussian-process regression with probabilistic non-negativity constraints.",
    )
    p.add_argument("--mode", choices=("fit", "predict", "benchmark"), required=True)
    p.add_argument("--example", choices=("1", "2", "3"), help="benchmark target")
    p.add_argument("--data", help="training CSV: coordinate columns then an observation column")
    p.add_argument("--constraints", help="CSV of constraint points (required when d > 1)")
    p.add_argument("--model", help="model JSON written by --mode fit")
    p.add_argument("--query", help="CSV of query points for --mode predict")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--constrained", dest="constrained", action="store_true", default=True)
    group.add_argument("--unconstrained", dest="constrained", action="store_false")
    p.add_argument("--m", type=int, help="number of equidistant constraint points")
    p.add_argument("--test-points", type=int, default=1000)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eta", type=float, help="violation probability; default uses a CDF factor of exactly -2")
    p.add_argument("--eps", type=float, default=0.03, help="data-fit tolerance")
    p.add_argument("--max-restarts", type=int, default=20)
    p.add_argument("--jobs", type=int, default=1, help="parallel benchmark trials")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    commands = {"fit": cmd_fit, "predict": cmd_predict, "benchmark": cmd_benchmark}
    try:
        return commands[args.mode](args)
    except (InputError, DimensionMismatchError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
