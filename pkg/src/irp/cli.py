"""Command-line surface: fit, predict, simulate, df, benchmark.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical or
verification failure.  All randomness flows from --seed, which is mandatory
for the generator commands.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import analytics
from .dataset import build_order, load_csv, merge_duplicates
from .engine import (
    FitConfig,
    fit_path,
    model_at,
    path_from_json,
    path_to_json,
    predict_batch,
)
from .errors import IrpError, ParseError, TruncatedPathError, ValidationError
from .losses import fit_binary, fit_poisson
from .oracles import dykstra_project

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

_VERIFY_GUARD = 2000
_VERIFY_TOL = 1e-6


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="irp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit a path on a training CSV")
    fit.add_argument("--input", required=True)
    fit.add_argument("--output", required=True, help="path JSON output")
    fit.add_argument("--loss", choices=["l2", "binary", "poisson", "mm"], default="l2")
    fit.add_argument("--tol", type=float, default=1e-9)
    fit.add_argument("--max-iterations", type=int, default=None)
    fit.add_argument("--no-reduce", action="store_true")
    fit.add_argument("--verify", action="store_true")

    pred = sub.add_parser("predict", help="predict from a fitted path JSON")
    pred.add_argument("--model", required=True, help="path JSON from fit")
    pred.add_argument("--input", required=True, help="test CSV")
    pred.add_argument("--output", required=True, help="predictions CSV")
    pred.add_argument("--select", default="final")

    sim = sub.add_parser("simulate", help="write a simulated train/test pair")
    sim.add_argument("--model", required=True)
    sim.add_argument("--dim", type=int, required=True)
    sim.add_argument("--n-train", type=int, default=3000)
    sim.add_argument("--n-test", type=int, default=1000)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--output", required=True, help="output file prefix")

    df = sub.add_parser("df", help="Monte Carlo degrees-of-freedom curve")
    df.add_argument("--design", choices=["continuous", "ternary"], required=True)
    df.add_argument("--dim", type=int, required=True)
    df.add_argument("--n", type=int, default=200)
    df.add_argument("--reps", type=int, default=100)
    df.add_argument("--sigma", type=float, default=float(np.sqrt(10.0)))
    df.add_argument("--seed", type=int, default=None)
    df.add_argument("--output", required=True)

    bench = sub.add_parser("benchmark", help="simulation benchmark table")
    bench.add_argument("--models", required=True, help="comma-separated model ids")
    bench.add_argument("--dims", required=True, help="comma-separated dimensions")
    bench.add_argument("--n-train", type=int, default=3000)
    bench.add_argument("--n-test", type=int, default=1000)
    bench.add_argument("--reps", type=int, default=20)
    bench.add_argument("--seed", type=int, default=None)
    bench.add_argument("--output", required=True)
    return parser


def _apply_thread_cap():
    cap = os.environ.get("IRP_THREADS")
    if not cap:
        return
    try:
        n = max(1, int(cap))
    except ValueError:
        return
    try:
        import numba

        numba.set_num_threads(min(n, numba.get_num_threads()))
    except Exception:
        pass


def _summary_path(output: str) -> str:
    if output.endswith(".json"):
        return output[: -len(".json")] + ".summary.csv"
    return output + ".summary.csv"


def _model_id(raw: str):
    return int(raw) if raw.isdigit() else raw


def _load_test_matrix(path: str, d: int) -> np.ndarray:
    """Read test covariates; a trailing extra column (response) is tolerated."""
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row:
                continue
            try:
                values = [float(c) for c in row]
            except ValueError:
                if lineno == 1:
                    continue  # header
                raise ParseError("non-numeric cell", line=lineno) from None
            if len(values) not in (d, d + 1):
                raise ParseError(
                    f"expected {d} or {d + 1} columns, got {len(values)}", line=lineno
                )
            rows.append(values[:d])
    if not rows:
        raise ValidationError("test file contains no data rows")
    return np.asarray(rows)


def _load_validation(path: str, d: int):
    obs = load_csv(path)
    if not obs:
        raise ValidationError("validation file contains no data rows")
    x = np.asarray([o.covariates for o in obs])
    y = np.asarray([o.response for o in obs])
    if x.shape[1] != d:
        raise ValidationError(
            f"validation covariate dimension {x.shape[1]} != model dimension {d}"
        )
    return x, y


def _load_mm(path: str):
    """Reorder-interval CSV: header must name columns c and b; rest covariates."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [cell.strip() for cell in next(reader)]
        except StopIteration:
            raise ValidationError("mm file is empty") from None
        if "c" not in header or "b" not in header:
            raise ValidationError("mm loss requires header columns named c and b")
        ci, bi = header.index("c"), header.index("b")
        cov_cols = [i for i in range(len(header)) if i not in (ci, bi)]
        xs, cs, bs = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                values = [float(cell) for cell in row]
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
            xs.append([values[i] for i in cov_cols])
            cs.append(values[ci])
            bs.append(values[bi])
    if not xs:
        raise ValidationError("mm file contains no data rows")
    return np.asarray(xs), np.asarray(cs), np.asarray(bs)


def _cmd_fit(args) -> int:
    config = FitConfig(tol=args.tol, max_iterations=args.max_iterations)
    reduce_flag = False if args.no_reduce else None

    recovered = None
    if args.loss == "mm":
        xcov, c, b = _load_mm(args.input)
        if np.any(c <= 0) or np.any(b <= 0):
            raise ValidationError("mm loss requires positive c and b")
        dataset = analytics.merge_rows(xcov, -b / c, w=c)
        dag = build_order(dataset, reduce=reduce_flag)
        path = fit_path(dataset, dag, config)
        recovered = (-path.fits_at(path.length)) ** -0.5
    else:
        raw = load_csv(args.input)
        if not raw:
            raise ValidationError("training file contains no data rows")
        dataset = merge_duplicates(raw)
        dag = build_order(dataset, reduce=reduce_flag)
        if args.loss == "binary":
            path = fit_binary(dataset, dag, config)
        elif args.loss == "poisson":
            path = fit_poisson(dataset, dag, config)
        else:
            path = fit_path(dataset, dag, config)

    with open(args.output, "w", encoding="utf-8") as fh:
        path_to_json(path, fh)
    if recovered is not None:
        with open(args.output, "r+", encoding="utf-8") as fh:
            doc = json.load(fh)
            doc["recovered_fits"] = recovered.tolist()
            fh.seek(0)
            json.dump(doc, fh)
            fh.truncate()

    with open(_summary_path(args.output), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "cut_value", "rss", "groups"])
        writer.writerow([0, "", f"{path.rss0:.17g}", 1])
        for rec in path.records:
            writer.writerow(
                [rec.k, f"{rec.cut_value:.17g}", f"{rec.rss:.17g}", rec.k + 1]
            )

    if args.verify:
        if dataset.n > _VERIFY_GUARD:
            print(
                f"verify skipped: n={dataset.n} exceeds guard {_VERIFY_GUARD}",
                file=sys.stderr,
            )
        else:
            final = path.fits_at(path.length)
            result = dykstra_project(path.y, path.w, dag)
            scale = max(float(np.abs(result.fits).max()), 1.0)
            dev = float(np.abs(final - result.fits).max()) / scale
            print(f"verify: max relative deviation {dev:.3e}", file=sys.stderr)
            if not result.converged or dev > _VERIFY_TOL:
                return EXIT_NUMERIC
    return EXIT_OK


def _select_iteration(path, select: str, dataset) -> int:
    if select == "final":
        return path.length
    if select.startswith("k="):
        try:
            k = int(select[2:])
        except ValueError:
            raise _UsageError(f"bad --select value: {select}") from None
        if not 0 <= k <= path.length:
            raise ValidationError(f"iteration {k} out of range 0..{path.length}")
        return k
    if select.startswith("min-rmse:"):
        vx, vy = _load_validation(select[len("min-rmse:") :], dataset.d)
        report = analytics.evaluate_path(
            path, dataset, analytics.TestSet(x=vx, y=vy, truth=vy), max_models=10**9
        )
        print(f"selected iteration {report.min_iteration} (min RMSE)", file=sys.stderr)
        return report.min_iteration
    raise _UsageError(f"bad --select value: {select}")


def _cmd_predict(args) -> int:
    with open(args.model, "r", encoding="utf-8") as fh:
        path = path_from_json(fh)
    dataset = path.dataset
    xs = _load_test_matrix(args.input, dataset.d)
    k = _select_iteration(path, args.select, dataset)
    model = model_at(path, k)
    values, extrapolated = predict_batch(model, xs, dataset)
    with open(args.output, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "prediction", "extrapolated"])
        for i, (v, e) in enumerate(zip(values, extrapolated)):
            writer.writerow([i, f"{v:.17g}", int(e)])
    return EXIT_OK


def _require_seed(args):
    if args.seed is None:
        raise _UsageError("--seed is required for reproducible generation")


def _cmd_simulate(args) -> int:
    _require_seed(args)
    spec = analytics.SimulationSpec(
        model=_model_id(args.model),
        d=args.dim,
        n_train=args.n_train,
        n_test=args.n_test,
        seed=args.seed,
    )
    train, test = analytics.simulate(spec)
    cols = [f"x{j + 1}" for j in range(train.d)]
    with open(f"{args.output}_train.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols + ["y", "w"])
        for i in range(train.n):
            writer.writerow(
                [f"{v:.17g}" for v in train.x[i]]
                + [f"{train.y[i]:.17g}", f"{train.w[i]:.17g}"]
            )
    with open(f"{args.output}_test.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols + ["y"])
        for i in range(test.x.shape[0]):
            writer.writerow([f"{v:.17g}" for v in test.x[i]] + [f"{test.y[i]:.17g}"])
    return EXIT_OK


def _cmd_df(args) -> int:
    _require_seed(args)
    model = "df-continuous" if args.design == "continuous" else "df-ternary"
    sampler, truth, _ = analytics._model_def(model, args.dim)
    rng = np.random.default_rng(args.seed)
    design = sampler(rng, args.n)
    estimate = analytics.estimate_df(
        design, truth, sigma=args.sigma, reps=args.reps, seed=args.seed + 1
    )
    with open(args.output, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "df"])
        for k, value in enumerate(estimate.df):
            writer.writerow([k, f"{value:.17g}"])
    gap, se = estimate.consistency_gap()
    print(
        f"final df {estimate.final_df:.3f}, mean blocks {estimate.mean_blocks:.3f}, "
        f"gap {gap:.3f} (se {se:.3f})",
        file=sys.stderr,
    )
    return EXIT_OK


def _cmd_benchmark(args) -> int:
    _require_seed(args)
    models = [_model_id(tok) for tok in args.models.split(",") if tok]
    dims = [int(tok) for tok in args.dims.split(",") if tok]
    rows = analytics.run_benchmark(
        models,
        dims,
        n_train=args.n_train,
        n_test=args.n_test,
        reps=args.reps,
        seed=args.seed,
    )
    with open(args.output, "w", encoding="utf-8", newline="") as fh:
        if args.output.endswith(".json"):
            analytics.benchmark_to_json(rows, fh)
        else:
            analytics.benchmark_to_csv(rows, fh)
    return EXIT_OK


_COMMANDS = {
    "fit": _cmd_fit,
    "predict": _cmd_predict,
    "simulate": _cmd_simulate,
    "df": _cmd_df,
    "benchmark": _cmd_benchmark,
}


def main(argv=None) -> int:
    _apply_thread_cap()
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, ValidationError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TruncatedPathError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except IrpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
