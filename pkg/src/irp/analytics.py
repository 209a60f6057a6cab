"""Simulation generators, path evaluation, degrees-of-freedom Monte Carlo,
split-balance statistics, and the benchmark harness.

Everything here is deterministic given its seed: replication r always uses
seed + r, and reductions over replications are ordered, so serial and
parallel execution would agree bit for bit.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .dataset import DominanceDag, WeightedDataset, build_order
from .engine import FitConfig, IrpPath, fit_path, fit_path_arrays
from .errors import ValidationError

__all__ = [
    "SimulationSpec",
    "TestSet",
    "simulate",
    "PathReport",
    "evaluate_path",
    "DfEstimate",
    "estimate_df",
    "auc",
    "SplitBalance",
    "split_balance_stats",
    "BenchmarkRow",
    "run_benchmark",
    "benchmark_to_csv",
    "benchmark_to_json",
]

_TERNARY_SKEWED = (0.7, 0.2, 0.1)
_TERNARY_UNIFORM = (1 / 3, 1 / 3, 1 / 3)


def _sum_sq(x):
    return (x**2).sum(axis=1)


def _product(x):
    return x.prod(axis=1)


def _model_def(model, d):
    """(covariate sampler, truth function, noise sd) for a model id."""
    if model == 1:
        return (lambda rng, n: rng.uniform(0, 5, (n, d))), _sum_sq, 2.0 * d
    if model == 2:
        return (lambda rng, n: rng.uniform(0, 3, (n, d))), _product, float(d)
    if model == 3:
        return (
            (lambda rng, n: rng.uniform(0, 2, (n, d))),
            lambda x: 2.0 ** x.sum(axis=1),
            float(d),
        )
    if model == 4:
        return (
            (lambda rng, n: rng.choice(3, (n, d), p=_TERNARY_SKEWED).astype(float)),
            lambda x: x.sum(axis=1) ** 0.25,
            d / np.sqrt(10.0),
        )
    if model == 5:
        return (
            (lambda rng, n: rng.choice(3, (n, d), p=_TERNARY_UNIFORM).astype(float)),
            _product,
            float(d),
        )
    if model == "df-continuous":
        return (lambda rng, n: rng.uniform(1, 2, (n, d))), _sum_sq, np.sqrt(10.0)
    if model == "df-ternary":
        return (
            (lambda rng, n: rng.choice(3, (n, d), p=_TERNARY_UNIFORM).astype(float)),
            _sum_sq,
            np.sqrt(10.0),
        )
    raise ValidationError(f"unknown simulation model id: {model!r}")


@dataclass(frozen=True)
class SimulationSpec:
    """One simulated regression setup; fully determined by its fields."""

    model: int | str
    d: int
    n_train: int = 3000
    n_test: int = 1000
    seed: int = 0


@dataclass
class TestSet:
    x: np.ndarray
    y: np.ndarray
    truth: np.ndarray


def simulate(spec: SimulationSpec):
    """Draw a (merged train dataset, noisy test set) pair for a model spec."""
    sampler, truth, sd = _model_def(spec.model, spec.d)
    rng = np.random.default_rng(spec.seed)
    x_train = sampler(rng, spec.n_train)
    y_train = truth(x_train) + sd * rng.standard_normal(spec.n_train)
    x_test = sampler(rng, spec.n_test)
    y_test = truth(x_test) + sd * rng.standard_normal(spec.n_test)
    train = merge_rows(x_train, y_train)
    return train, TestSet(x=x_test, y=y_test, truth=truth(x_test))


def merge_rows(x: np.ndarray, y: np.ndarray, w: np.ndarray | None = None):
    """Array-level duplicate merge (same semantics as dataset.merge_duplicates)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.ones(y.size) if w is None else np.asarray(w, dtype=np.float64)
    ux, inverse = np.unique(x, axis=0, return_inverse=True)
    wsum = np.bincount(inverse, weights=w)
    ysum = np.bincount(inverse, weights=w * y)
    provenance: dict[int, list[int]] = {}
    for row, grp in enumerate(inverse):
        provenance.setdefault(int(grp), []).append(row)
    return WeightedDataset(x=ux, y=ysum / wsum, w=wsum, provenance=provenance)


class _SegmentedPredictor:
    """Batch midpoint-rule prediction against fixed test points.

    Precomputes, for every test point, the training indices it dominates and
    is dominated by, stored as concatenated segments so per-model evaluation
    is two gathers and two segmented reductions.
    """

    def __init__(self, train: WeightedDataset, test_x: np.ndarray, chunk: int = 256):
        test_x = np.asarray(test_x, dtype=np.float64)
        if test_x.ndim != 2 or test_x.shape[1] != train.d:
            raise ValidationError("test covariate dimension mismatch")
        self.gmean = float(train.w @ train.y / train.w.sum())
        below_parts, above_parts = [], []
        below_counts, above_counts = [], []
        for start in range(0, test_x.shape[0], chunk):
            xt = test_x[start : start + chunk]
            below = (train.x[None, :, :] <= xt[:, None, :]).all(axis=2)
            above = (train.x[None, :, :] >= xt[:, None, :]).all(axis=2)
            rows, cols = np.nonzero(below)
            below_parts.append(cols)
            below_counts.append(np.bincount(rows, minlength=xt.shape[0]))
            rows, cols = np.nonzero(above)
            above_parts.append(cols)
            above_counts.append(np.bincount(rows, minlength=xt.shape[0]))
        self.below_idx = np.concatenate(below_parts) if below_parts else np.empty(0, int)
        self.above_idx = np.concatenate(above_parts) if above_parts else np.empty(0, int)
        self.below_counts = np.concatenate(below_counts)
        self.above_counts = np.concatenate(above_counts)
        self.below_starts = np.concatenate([[0], np.cumsum(self.below_counts)[:-1]])
        self.above_starts = np.concatenate([[0], np.cumsum(self.above_counts)[:-1]])

    @staticmethod
    def _seg_reduce(values, starts, counts, ufunc, fill):
        out = np.full(counts.size, fill)
        if values.size == 0:
            return out
        idx = np.minimum(starts, values.size - 1)
        res = ufunc.reduceat(values, idx)
        nonempty = counts > 0
        out[nonempty] = res[nonempty]
        return out

    def predict(self, fits: np.ndarray):
        low = self._seg_reduce(
            fits[self.below_idx], self.below_starts, self.below_counts, np.maximum, -np.inf
        )
        high = self._seg_reduce(
            fits[self.above_idx], self.above_starts, self.above_counts, np.minimum, np.inf
        )
        has_l = self.below_counts > 0
        has_u = self.above_counts > 0
        pred = np.full(self.below_counts.size, self.gmean)
        both = has_l & has_u
        pred[both] = 0.5 * (low[both] + high[both])
        only_l = has_l & ~has_u
        pred[only_l] = low[only_l]
        only_u = has_u & ~has_l
        pred[only_u] = high[only_u]
        return pred, ~(has_l | has_u)


@dataclass
class PathReport:
    """Out-of-sample error along the path plus baselines."""

    iterations: np.ndarray
    rmse: np.ndarray
    min_rmse: float
    min_iteration: int
    final_rmse: float
    ls_rmse: float
    path_length: int


def _ls_rmse(train: WeightedDataset, test: TestSet) -> float:
    design = np.column_stack([np.ones(train.n), train.x])
    sw = np.sqrt(train.w)
    beta, *_ = np.linalg.lstsq(design * sw[:, None], train.y * sw, rcond=None)
    pred = np.column_stack([np.ones(test.x.shape[0]), test.x]) @ beta
    return float(np.sqrt(np.mean((test.y - pred) ** 2)))


def _checkpoints(length: int, max_models: int) -> np.ndarray:
    if length + 1 <= max_models:
        return np.arange(length + 1)
    return np.unique(np.round(np.linspace(0, length, max_models)).astype(int))


def evaluate_path(
    path: IrpPath,
    train: WeightedDataset,
    test: TestSet,
    predict_fn=None,
    max_models: int = 200,
) -> PathReport:
    """Test RMSE per model along the path, against a least-squares baseline.

    Long paths are evaluated on an iteration grid of at most ``max_models``
    points (endpoints always included); pass ``predict_fn(fits, test_x)`` to
    override the built-in segmented predictor.
    """
    if test.x.shape[0] == 0:
        raise ValidationError("test set is empty")
    ks = _checkpoints(path.length, max_models)
    wanted = set(ks.tolist())
    predictor = None if predict_fn is not None else _SegmentedPredictor(train, test.x)
    rmse = []
    for k, fits in path.iter_fits():
        if k not in wanted:
            continue
        if predict_fn is not None:
            pred = predict_fn(fits, test.x)
        else:
            pred, _ = predictor.predict(fits)
        rmse.append(float(np.sqrt(np.mean((test.y - pred) ** 2))))
    rmse = np.asarray(rmse)
    best = int(np.argmin(rmse))
    return PathReport(
        iterations=ks,
        rmse=rmse,
        min_rmse=float(rmse[best]),
        min_iteration=int(ks[best]),
        final_rmse=float(rmse[-1]),
        ls_rmse=_ls_rmse(train, test),
        path_length=path.length,
    )


@dataclass
class DfEstimate:
    """Monte Carlo degrees of freedom per iteration under a fixed design."""

    df: np.ndarray  # df_k for k = 0..Kmax
    reps: int
    x: np.ndarray
    sigma2: float
    block_counts: np.ndarray  # final block count per replication
    batch_diffs: np.ndarray = field(default=None)

    @property
    def final_df(self) -> float:
        return float(self.df[-1])

    @property
    def mean_blocks(self) -> float:
        return float(self.block_counts.mean())

    def consistency_gap(self):
        """(|final df - mean block count|, Monte Carlo standard error of the gap)."""
        gap = abs(self.final_df - self.mean_blocks)
        se = float(self.batch_diffs.std(ddof=1) / np.sqrt(self.batch_diffs.size))
        return gap, se


def estimate_df(
    design_x: np.ndarray,
    truth,
    sigma: float,
    reps: int,
    seed: int,
    config: FitConfig | None = None,
    batches: int = 10,
) -> DfEstimate:
    """Estimate the covariance-based degrees of freedom along the path.

    The design is fixed; each replication redraws responses, refits, and the
    per-observation covariance between response and fit is estimated across
    replications.  Replications whose path ended earlier keep their final fits
    for later iterations.
    """
    if reps < 2:
        raise ValidationError("df estimation needs at least 2 replications")
    design_x = np.asarray(design_x, dtype=np.float64)
    n0 = design_x.shape[0]
    mu_true = truth(design_x)
    ux, inverse = np.unique(design_x, axis=0, return_inverse=True)
    counts = np.bincount(inverse).astype(float)
    dag = build_order(
        WeightedDataset(x=ux, y=np.zeros(ux.shape[0]), w=counts), reduce=None
    )

    ys = np.empty((reps, n0))
    fit_lists = []
    block_counts = np.empty(reps, dtype=np.int64)
    for r in range(reps):
        rng = np.random.default_rng(seed + r)
        y_raw = mu_true + sigma * rng.standard_normal(n0)
        ys[r] = y_raw
        y_m = np.bincount(inverse, weights=y_raw) / counts
        path = fit_path_arrays(y_m, counts, dag, config)
        snaps = [fits[inverse].copy() for _, fits in path.iter_fits()]
        fit_lists.append(snaps)
        block_counts[r] = len(path.block_members)

    kmax = max(len(s) for s in fit_lists) - 1
    yhat = np.empty((reps, kmax + 1, n0))
    for r, snaps in enumerate(fit_lists):
        arr = np.stack(snaps)
        yhat[r, : arr.shape[0]] = arr
        yhat[r, arr.shape[0] :] = arr[-1]

    sigma2 = sigma**2

    def df_curve(rep_idx):
        yc = ys[rep_idx] - ys[rep_idx].mean(axis=0)
        hc = yhat[rep_idx] - yhat[rep_idx].mean(axis=0)
        cov = (yc[:, None, :] * hc).sum(axis=0) / (rep_idx.size - 1)
        return cov.sum(axis=1) / sigma2

    df = df_curve(np.arange(reps))

    nb = min(batches, reps // 2)
    bounds = np.linspace(0, reps, nb + 1).astype(int)
    diffs = np.empty(nb)
    for bidx in range(nb):
        sel = np.arange(bounds[bidx], bounds[bidx + 1])
        diffs[bidx] = df_curve(sel)[-1] - block_counts[sel].mean()
    return DfEstimate(
        df=df,
        reps=reps,
        x=design_x,
        sigma2=sigma2,
        block_counts=block_counts,
        batch_diffs=diffs,
    )


def auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Area under the ROC curve via the rank-sum formulation; ties count half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = labels == 1
    neg = labels == 0
    n1, n0 = int(pos.sum()), int(neg.sum())
    if n1 == 0 or n0 == 0:
        raise ValidationError("auc needs both classes present")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(scores.size)
    sorted_scores = scores[order]
    # average ranks over tie runs (1-based)
    boundaries = np.concatenate(
        [[0], np.nonzero(np.diff(sorted_scores))[0] + 1, [scores.size]]
    )
    for a, b in zip(boundaries[:-1], boundaries[1:]):
        ranks[order[a:b]] = 0.5 * (a + b + 1)
    return float((ranks[pos].sum() - n1 * (n1 + 1) / 2) / (n1 * n0))


@dataclass
class SplitBalance:
    """Per-iteration larger-side proportions and the work-bound constant."""

    p: np.ndarray
    p_max: float | None
    bound_factor: float | None


def split_balance_stats(path: IrpPath) -> SplitBalance:
    sizes = np.array(
        [[rec.a_members.size, rec.b_members.size] for rec in path.records]
    ).reshape(-1, 2)
    if sizes.shape[0] == 0:
        return SplitBalance(p=np.empty(0), p_max=None, bound_factor=None)
    p = sizes.max(axis=1) / sizes.sum(axis=1)
    p_max = float(p.max())
    return SplitBalance(p=p, p_max=p_max, bound_factor=float(1.0 / (1.0 - p_max**2)))


@dataclass
class BenchmarkRow:
    """One (model, dimension) cell of the benchmark table."""

    model: int | str
    d: int
    n_train: int
    n_test: int
    reps: int
    irp_min_rmse: float
    irp_min_rmse_spread: float | None
    isotonic_rmse: float
    isotonic_rmse_spread: float | None
    ls_rmse: float
    ls_rmse_spread: float | None
    irp_min_path: float
    path_length: float


def _spread(values: np.ndarray) -> float | None:
    if values.size < 2:
        return None
    return float(1.96 * values.std(ddof=1) / np.sqrt(values.size))


def run_benchmark(
    models,
    dims,
    n_train: int = 3000,
    n_test: int = 1000,
    reps: int = 20,
    seed: int = 0,
    config: FitConfig | None = None,
    max_models: int = 200,
) -> list[BenchmarkRow]:
    """Fit and score every (model, dimension) cell over seeded replications."""
    rows = []
    for model in models:
        for d in dims:
            mins, finals, lss, min_paths, lengths = [], [], [], [], []
            for r in range(reps):
                spec = SimulationSpec(
                    model=model, d=d, n_train=n_train, n_test=n_test, seed=seed + r
                )
                train, test = simulate(spec)
                dag = build_order(train)
                path = fit_path(train, dag, config)
                report = evaluate_path(path, train, test, max_models=max_models)
                mins.append(report.min_rmse)
                finals.append(report.final_rmse)
                lss.append(report.ls_rmse)
                min_paths.append(report.min_iteration)
                lengths.append(report.path_length)
            mins = np.asarray(mins)
            finals = np.asarray(finals)
            lss = np.asarray(lss)
            rows.append(
                BenchmarkRow(
                    model=model,
                    d=d,
                    n_train=n_train,
                    n_test=n_test,
                    reps=reps,
                    irp_min_rmse=float(mins.mean()),
                    irp_min_rmse_spread=_spread(mins),
                    isotonic_rmse=float(finals.mean()),
                    isotonic_rmse_spread=_spread(finals),
                    ls_rmse=float(lss.mean()),
                    ls_rmse_spread=_spread(lss),
                    irp_min_path=float(np.mean(min_paths)),
                    path_length=float(np.mean(lengths)),
                )
            )
    return rows


_BENCH_FIELDS = [
    "model",
    "d",
    "n_train",
    "n_test",
    "reps",
    "irp_min_rmse",
    "irp_min_rmse_spread",
    "isotonic_rmse",
    "isotonic_rmse_spread",
    "ls_rmse",
    "ls_rmse_spread",
    "irp_min_path",
    "path_length",
]


def _fmt(value):
    if isinstance(value, float):
        return f"{value:.17g}"
    return "" if value is None else str(value)


def benchmark_to_csv(rows: list[BenchmarkRow], fileobj) -> None:
    writer = csv.writer(fileobj)
    writer.writerow(_BENCH_FIELDS)
    for row in rows:
        writer.writerow([_fmt(getattr(row, f)) for f in _BENCH_FIELDS])


def benchmark_to_json(rows: list[BenchmarkRow], fileobj) -> None:
    json.dump([{f: getattr(row, f) for f in _BENCH_FIELDS} for row in rows], fileobj)
