"""Recursive optimal-cut partitioning: the regularization path of isotonic models.

The solver keeps one candidate split per active group, always executes the
candidate with the largest objective value, re-solves the cut problem on both
children, and retires groups whose optimal cut is trivial (blocks).  Every
executed split is recorded as a delta, so any intermediate model can be
materialized afterwards without refitting.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field

import numpy as np

from .dataset import DominanceDag, WeightedDataset
from .errors import TruncatedPathError, ValidationError
from .mincut import Cut, _optimal_cut_core

__all__ = [
    "FitConfig",
    "IsotonicModel",
    "SplitRecord",
    "IrpPath",
    "fit_path",
    "fit_path_arrays",
    "model_at",
    "predict",
    "predict_batch",
    "final_blocks",
    "path_to_json",
    "path_from_json",
]


@dataclass
class FitConfig:
    tol: float = 1e-9
    max_iterations: int | None = None  # None means n (the path cannot be longer)

    def __post_init__(self):
        if not self.tol > 0:
            raise ValidationError("tol must be positive")


@dataclass
class SplitRecord:
    """One executed split: group ``parent`` divided into lower A and upper B."""

    k: int
    cut_value: float
    parent: int
    a_id: int
    b_id: int
    a_members: np.ndarray
    b_members: np.ndarray
    rss: float  # training objective after this split


@dataclass
class IsotonicModel:
    """A partition of the observations with per-group weighted-mean fits."""

    partition: list[np.ndarray]
    fits: np.ndarray  # one value per group, aligned with partition
    k: int
    objective: float  # weighted residual sum of squares

    def fitted_values(self, n: int) -> np.ndarray:
        out = np.empty(n)
        for members, fit in zip(self.partition, self.fits):
            out[members] = fit
        return out


@dataclass
class IrpPath:
    """The ordered sequence of models produced by the partitioning run."""

    n: int
    y: np.ndarray
    w: np.ndarray
    tol: float
    fit0: float
    rss0: float
    records: list[SplitRecord]
    block_members: list[np.ndarray]
    block_fits: np.ndarray
    truncated: bool
    unresolved: list[np.ndarray] = field(default_factory=list)
    dataset: WeightedDataset | None = None

    @property
    def length(self) -> int:
        return len(self.records)

    def iter_fits(self):
        """Yield (k, per-observation fitted values) along the path.

        The same buffer is reused between iterations; copy it to keep it.
        """
        fits = np.full(self.n, self.fit0)
        yield 0, fits
        for rec in self.records:
            fits[rec.a_members] = _wmean(self.y, self.w, rec.a_members)
            fits[rec.b_members] = _wmean(self.y, self.w, rec.b_members)
            yield rec.k, fits

    def fits_at(self, k: int) -> np.ndarray:
        for kk, fits in self.iter_fits():
            if kk == k:
                return fits.copy()
        raise ValidationError(f"iteration {k} out of range 0..{self.length}")

    def model_at(self, k: int) -> IsotonicModel:
        return model_at(self, k)

    def final_blocks(self):
        return final_blocks(self)


def _wmean(y: np.ndarray, w: np.ndarray, members: np.ndarray) -> float:
    wm = w[members]
    return float(wm @ y[members] / wm.sum())


def fit_path_arrays(
    y: np.ndarray,
    w: np.ndarray,
    dag: DominanceDag,
    config: FitConfig | None = None,
) -> IrpPath:
    """Run the partitioning algorithm on plain response/weight arrays."""
    config = config or FitConfig()
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    n = y.size
    if n == 0:
        raise ValidationError("cannot fit an empty dataset")
    if dag.n != n:
        raise ValidationError("order DAG size does not match the dataset")
    if np.any(w <= 0):
        raise ValidationError("weights must be positive")
    max_iter = n if config.max_iterations is None else config.max_iterations

    fit0 = float(w @ y / w.sum())
    rss = float(w @ (y - fit0) ** 2)
    rss0 = rss

    eu_all, ev_all = dag.edges[:, 0], dag.edges[:, 1]
    local = np.full(n, -1, dtype=np.int64)
    mask = np.zeros(n, dtype=bool)

    def solve(members: np.ndarray, edges: np.ndarray) -> Cut:
        local[members] = np.arange(members.size)
        cut = _optimal_cut_core(
            members,
            local[edges[:, 0]],
            local[edges[:, 1]],
            y[members],
            w[members],
            config.tol,
        )
        return cut

    block_members: list[np.ndarray] = []
    records: list[SplitRecord] = []
    groups: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    cuts: dict[int, Cut] = {}
    heap: list[tuple[float, int, int]] = []
    counter = 0
    next_id = 1

    def admit(gid: int, members: np.ndarray, edges: np.ndarray):
        """Solve the group's cut; either retire it as a block or queue it."""
        nonlocal counter
        if members.size == 1:
            block_members.append(members)
            return
        cut = solve(members, edges)
        if cut.trivial:
            block_members.append(members)
            return
        groups[gid] = (members, edges)
        cuts[gid] = cut
        heapq.heappush(heap, (-cut.value, counter, gid))
        counter += 1

    root = np.arange(n, dtype=np.int64)
    admit(0, root, dag.edges)

    k = 0
    while heap and k < max_iter:
        _, _, gid = heapq.heappop(heap)
        members, edges = groups.pop(gid)
        cut = cuts.pop(gid)
        k += 1

        mu = _wmean(y, w, members)
        mu_a = _wmean(y, w, cut.a)
        mu_b = _wmean(y, w, cut.b)
        gain = float(w[cut.a].sum()) * (mu_a - mu) ** 2 + float(w[cut.b].sum()) * (
            mu_b - mu
        ) ** 2
        rss -= gain

        a_id, b_id = next_id, next_id + 1
        next_id += 2
        records.append(
            SplitRecord(
                k=k,
                cut_value=cut.value,
                parent=gid,
                a_id=a_id,
                b_id=b_id,
                a_members=cut.a,
                b_members=cut.b,
                rss=rss,
            )
        )
        for child_id, child in ((a_id, cut.a), (b_id, cut.b)):
            mask[child] = True
            sel = mask[edges[:, 0]] & mask[edges[:, 1]]
            mask[child] = False
            admit(child_id, child, edges[sel])

    truncated = bool(heap)
    unresolved = [groups[gid][0] for _, _, gid in sorted(heap)] if truncated else []
    blocks = sorted(block_members, key=lambda m: int(m.min()))
    block_fits = np.array([_wmean(y, w, m) for m in blocks]) if blocks else np.empty(0)
    return IrpPath(
        n=n,
        y=y.copy(),
        w=w.copy(),
        tol=config.tol,
        fit0=fit0,
        rss0=rss0,
        records=records,
        block_members=blocks,
        block_fits=block_fits,
        truncated=truncated,
        unresolved=unresolved,
    )


def fit_path(
    dataset: WeightedDataset,
    dag: DominanceDag,
    config: FitConfig | None = None,
) -> IrpPath:
    """Fit the full regularization path on a merged dataset."""
    path = fit_path_arrays(dataset.y, dataset.w, dag, config)
    path.dataset = dataset
    return path


def model_at(path: IrpPath, k: int) -> IsotonicModel:
    """Materialize the stored model after iteration ``k`` (0 = single group)."""
    if not 0 <= k <= path.length:
        raise ValidationError(f"iteration {k} out of range 0..{path.length}")
    parts: dict[int, np.ndarray] = {0: np.arange(path.n, dtype=np.int64)}
    rss = path.rss0
    for rec in path.records[:k]:
        del parts[rec.parent]
        parts[rec.a_id] = rec.a_members
        parts[rec.b_id] = rec.b_members
        rss = rec.rss
    partition = [parts[g] for g in sorted(parts)]
    fits = np.array([_wmean(path.y, path.w, m) for m in partition])
    return IsotonicModel(partition=partition, fits=fits, k=k, objective=rss)


def final_blocks(path: IrpPath):
    """Final block class and its fits; requires a complete (untruncated) path."""
    if path.truncated:
        raise TruncatedPathError(
            "path was truncated by max_iterations; rerun with a larger limit"
        )
    return path.block_members, path.block_fits


def predict(
    model: IsotonicModel,
    x: np.ndarray,
    dataset: WeightedDataset,
    dag: DominanceDag | None = None,
) -> float:
    """Midpoint-interpolation prediction at a single covariate vector.

    With L the largest fit over dominated training points and U the smallest
    over dominating ones: (L+U)/2 when both exist, the existing one otherwise,
    and the global training weighted mean when the point is incomparable to all
    training data.  ``dag`` is accepted for interface symmetry; dominance
    against a new point is evaluated directly on the covariates.
    """
    values, _ = predict_batch(model, np.asarray(x, dtype=np.float64)[None, :], dataset)
    return float(values[0])


def predict_batch(
    model: IsotonicModel,
    xs: np.ndarray,
    dataset: WeightedDataset,
):
    """Vectorized predict; returns (values, extrapolated) arrays.

    ``extrapolated`` marks points incomparable to every training observation,
    which fall back to the global training weighted mean.
    """
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[1] != dataset.d:
        raise ValidationError(
            f"covariate dimension mismatch: got {xs.shape}, expected (*, {dataset.d})"
        )
    fits = model.fitted_values(dataset.n)
    gmean = float(dataset.w @ dataset.y / dataset.w.sum())
    values = np.empty(xs.shape[0])
    extrapolated = np.zeros(xs.shape[0], dtype=bool)
    for t in range(xs.shape[0]):
        below = (dataset.x <= xs[t]).all(axis=1)
        above = (dataset.x >= xs[t]).all(axis=1)
        has_l, has_u = below.any(), above.any()
        if has_l and has_u:
            values[t] = 0.5 * (fits[below].max() + fits[above].min())
        elif has_l:
            values[t] = fits[below].max()
        elif has_u:
            values[t] = fits[above].min()
        else:
            values[t] = gmean
            extrapolated[t] = True
    return values, extrapolated


def path_to_json(path: IrpPath, fileobj, include_models: bool = False) -> None:
    """Serialize a fitted path (with its training data) to JSON.

    Splits are stored as member deltas so any intermediate model can be
    rebuilt; ``include_models`` additionally stores explicit per-iteration
    group-id arrays.
    """
    if path.dataset is None:
        raise ValidationError("path has no attached dataset; cannot serialize")
    ds = path.dataset
    doc = {
        "n": path.n,
        "d": ds.d,
        "tol": path.tol,
        "truncated": path.truncated,
        "train": {
            "x": ds.x.tolist(),
            "y": ds.y.tolist(),
            "w": ds.w.tolist(),
            "provenance": {str(k): v for k, v in ds.provenance.items()},
        },
        "iterations": [
            {
                "k": rec.k,
                "cut_value": rec.cut_value,
                "parent": rec.parent,
                "sizes": [int(rec.a_members.size), int(rec.b_members.size)],
                "a_id": rec.a_id,
                "b_id": rec.b_id,
                "a_members": rec.a_members.tolist(),
                "b_members": rec.b_members.tolist(),
                "rss": rec.rss,
            }
            for rec in path.records
        ],
        "final": {
            "blocks": [m.tolist() for m in path.block_members],
            "fits": path.block_fits.tolist(),
        },
    }
    if include_models:
        doc["models"] = []
        for k in range(path.length + 1):
            model = model_at(path, k)
            ids = np.empty(path.n, dtype=np.int64)
            for gid, members in enumerate(model.partition):
                ids[members] = gid
            doc["models"].append(ids.tolist())
    json.dump(doc, fileobj)


def path_from_json(fileobj) -> IrpPath:
    """Rebuild a fitted path (with its dataset attached) from JSON."""
    doc = json.load(fileobj)
    train = doc["train"]
    ds = WeightedDataset(
        x=np.asarray(train["x"], dtype=np.float64),
        y=np.asarray(train["y"], dtype=np.float64),
        w=np.asarray(train["w"], dtype=np.float64),
        provenance={int(k): v for k, v in train.get("provenance", {}).items()},
    )
    y, w = ds.y, ds.w
    fit0 = float(w @ y / w.sum())
    rss0 = float(w @ (y - fit0) ** 2)
    records = [
        SplitRecord(
            k=it["k"],
            cut_value=it["cut_value"],
            parent=it["parent"],
            a_id=it["a_id"],
            b_id=it["b_id"],
            a_members=np.asarray(it["a_members"], dtype=np.int64),
            b_members=np.asarray(it["b_members"], dtype=np.int64),
            rss=it["rss"],
        )
        for it in doc["iterations"]
    ]
    path = IrpPath(
        n=doc["n"],
        y=y.copy(),
        w=w.copy(),
        tol=doc["tol"],
        fit0=fit0,
        rss0=rss0,
        records=records,
        block_members=[np.asarray(m, dtype=np.int64) for m in doc["final"]["blocks"]],
        block_fits=np.asarray(doc["final"]["fits"], dtype=np.float64),
        truncated=doc["truncated"],
        dataset=ds,
    )
    return path
