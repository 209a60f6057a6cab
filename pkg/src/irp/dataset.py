"""Observation ingest, duplicate merging, and the coordinate-wise dominance order.

The dominance DAG encodes the constraint set {(i, j): x_i <= x_j coordinate-wise,
x_i != x_j} on the merged (duplicate-free) observations.  The transitive
reduction preserves reachability, so any algorithm that only needs upper/lower
sets may run on the reduced edge set.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, ValidationError

__all__ = [
    "Observation",
    "WeightedDataset",
    "DominanceDag",
    "load_csv",
    "merge_duplicates",
    "build_order",
    "reachability_matrix",
]


@dataclass(frozen=True)
class Observation:
    """A single data row: covariate vector, response, positive weight."""

    covariates: tuple
    response: float
    weight: float = 1.0

    def __post_init__(self):
        if not self.weight > 0:
            raise ValidationError(f"weight must be positive, got {self.weight}")
        if not math.isfinite(self.response):
            raise ValidationError(f"response must be finite, got {self.response}")
        if not all(math.isfinite(v) for v in self.covariates):
            raise ValidationError(f"covariates must be finite, got {self.covariates}")
        if not math.isfinite(self.weight):
            raise ValidationError("weight must be finite")


@dataclass
class WeightedDataset:
    """Deduplicated observations: covariate matrix, responses, positive weights.

    ``provenance[i]`` lists the original row indices merged into observation i.
    """

    x: np.ndarray  # (n, d) float64
    y: np.ndarray  # (n,) float64
    w: np.ndarray  # (n,) float64
    provenance: dict[int, list[int]] = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.ascontiguousarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        self.w = np.asarray(self.w, dtype=np.float64)
        if self.x.ndim != 2:
            raise ValidationError("covariate matrix must be 2-dimensional")
        n = self.x.shape[0]
        if self.y.shape != (n,) or self.w.shape != (n,):
            raise ValidationError("x, y, w must agree on the number of observations")
        if np.any(self.w <= 0):
            raise ValidationError("all weights must be positive")
        if not self.provenance:
            self.provenance = {i: [i] for i in range(n)}

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def is_ternary(self) -> bool:
        """True when every covariate value lies in {0, 1, 2}."""
        return bool(np.isin(self.x, (0.0, 1.0, 2.0)).all())


@dataclass
class DominanceDag:
    """Edge list (i, j) meaning x_i dominated by x_j; acyclic by construction."""

    n: int
    edges: np.ndarray  # (m, 2) int64, ordered pairs
    reduced: bool

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)

    @property
    def m(self) -> int:
        return self.edges.shape[0]

    def export_edges(self, fileobj) -> None:
        """Debug dump: one '<i> <j>' line per edge, 0-based."""
        for i, j in self.edges:
            fileobj.write(f"{i} {j}\n")


def _parse_header(first_row: list[str]) -> bool:
    """A row is a header iff at least one cell is not parseable as a float."""
    for cell in first_row:
        try:
            float(cell)
        except ValueError:
            return True
    return False


def load_csv(path_or_file, schema: dict | None = None) -> list[Observation]:
    """Read observations from a comma-separated file.

    Without a header, every column but the last is a covariate and the last is
    the response.  With a header, the column named ``y`` is the response, an
    optional column named ``w`` is the weight, and all other columns are
    covariates in file order.  ``schema`` may override the inferred roles with
    keys ``response`` and ``weight`` (column names or indices).
    """
    if hasattr(path_or_file, "read"):
        return _load_csv_file(path_or_file, schema)
    with open(path_or_file, "r", encoding="utf-8", newline="") as fh:
        return _load_csv_file(fh, schema)


def _resolve_schema(header, ncols, schema):
    """Return (covariate column indices, response index, weight index or None)."""
    response = None
    weight = None
    if schema:
        response = schema.get("response")
        weight = schema.get("weight")
    if header is not None:
        if response is None and "y" in header:
            response = header.index("y")
        if weight is None and "w" in header:
            weight = header.index("w")
        if isinstance(response, str):
            response = header.index(response)
        if isinstance(weight, str):
            weight = header.index(weight)
    if response is None:
        response = ncols - 1
    used = {response} | ({weight} if weight is not None else set())
    covariates = [c for c in range(ncols) if c not in used]
    return covariates, response, weight


def _load_csv_file(fh, schema) -> list[Observation]:
    reader = csv.reader(fh)
    rows = []
    try:
        first = next(reader)
    except StopIteration:
        return []
    header = None
    lineno = 1
    if _parse_header(first):
        header = [c.strip() for c in first]
    else:
        rows.append((lineno, first))
    for row in reader:
        lineno += 1
        if row:
            rows.append((lineno, row))
    if not rows:
        return []

    ncols = len(rows[0][1])
    cov_cols, resp_col, w_col = _resolve_schema(header, ncols, schema)
    observations = []
    for lineno, row in rows:
        if len(row) != ncols:
            raise ParseError(f"expected {ncols} columns, got {len(row)}", line=lineno)
        try:
            values = [float(cell) for cell in row]
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
        try:
            obs = Observation(
                covariates=tuple(values[c] for c in cov_cols),
                response=values[resp_col],
                weight=values[w_col] if w_col is not None else 1.0,
            )
        except ValidationError as exc:
            raise ValidationError(f"line {lineno}: {exc}") from None
        observations.append(obs)
    return observations


def merge_duplicates(raw: list[Observation]) -> WeightedDataset:
    """Merge rows with bit-identical covariate vectors into weighted observations.

    The merged response is the weighted mean of the constituents and the merged
    weight is the sum of their weights, which leaves the weighted least-squares
    objective unchanged up to an additive constant.
    """
    if not raw:
        raise ValidationError("cannot merge an empty observation list")
    d = len(raw[0].covariates)
    for idx, obs in enumerate(raw):
        if len(obs.covariates) != d:
            raise ValidationError(
                f"row {idx}: dimension {len(obs.covariates)} != {d} of first row"
            )
    groups: dict[tuple, list[int]] = {}
    for idx, obs in enumerate(raw):
        groups.setdefault(obs.covariates, []).append(idx)
    n = len(groups)
    x = np.empty((n, d))
    y = np.empty(n)
    w = np.empty(n)
    provenance = {}
    for i, (cov, members) in enumerate(groups.items()):
        x[i] = cov
        wsum = sum(raw[j].weight for j in members)
        y[i] = sum(raw[j].weight * raw[j].response for j in members) / wsum
        w[i] = wsum
        provenance[i] = list(members)
    return WeightedDataset(x=x, y=y, w=w, provenance=provenance)


def _all_comparable_pairs(x: np.ndarray, chunk: int = 512):
    """Yield (rows, cols) index arrays with x[rows] <= x[cols] and rows != cols."""
    n = x.shape[0]
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        le = (x[start:stop, None, :] <= x[None, :, :]).all(axis=2)
        eq = (x[start:stop, None, :] == x[None, :, :]).all(axis=2)
        le &= ~eq
        rows, cols = np.nonzero(le)
        yield rows + start, cols


def _full_order_edges(x: np.ndarray) -> np.ndarray:
    parts = []
    for rows, cols in _all_comparable_pairs(x):
        parts.append(np.column_stack([rows, cols]))
    if not parts:
        return np.empty((0, 2), dtype=np.int64)
    return np.concatenate(parts).astype(np.int64)


def _reduced_edges_1d(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x[:, 0], kind="stable")
    return np.column_stack([order[:-1], order[1:]]).astype(np.int64)


def _reduced_edges_2d(x: np.ndarray) -> np.ndarray:
    """Immediate-successor edges for the planar dominance order, by sweep.

    Points are sorted lexicographically; a point's immediate successors are the
    Pareto-minimal elements of its (strict) successor set, extracted with a
    running-minimum sweep over the sorted tail.
    """
    n = x.shape[0]
    order = np.lexsort((x[:, 1], x[:, 0]))
    xs = x[order]
    x1, x2 = xs[:, 0], xs[:, 1]
    src, dst = [], []
    for t in range(n - 1):
        tail2 = x2[t + 1 :]
        cand = np.nonzero(tail2 >= x2[t])[0]
        if cand.size == 0:
            continue
        c2 = tail2[cand]
        run = np.minimum.accumulate(c2)
        keep = np.empty(cand.size, dtype=bool)
        keep[0] = True
        keep[1:] = c2[1:] < run[:-1]
        succ = cand[keep] + t + 1
        src.append(np.full(succ.size, t, dtype=np.int64))
        dst.append(succ)
    if not src:
        return np.empty((0, 2), dtype=np.int64)
    u = order[np.concatenate(src)]
    v = order[np.concatenate(dst)]
    return np.column_stack([u, v])


def _reduce_by_closure(x: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Transitive reduction via the two-hop test on the (closed) dominance relation.

    Keeps edge (i, j) iff no k with i < k < j in the order.  The comparability
    matrix is its own transitive closure, so a boolean matrix product suffices.
    """
    n = x.shape[0]
    closure = np.zeros((n, n), dtype=bool)
    closure[edges[:, 0], edges[:, 1]] = True
    cf = closure.astype(np.float32)
    keep = np.ones(edges.shape[0], dtype=bool)
    chunk = max(1, int(2**24 // max(n, 1)))
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        two_hop = (cf[start:stop] @ cf) > 0.5
        sel = (edges[:, 0] >= start) & (edges[:, 0] < stop)
        keep[sel] = ~two_hop[edges[sel, 0] - start, edges[sel, 1]]
    return edges[keep]


def build_order(dataset: WeightedDataset, reduce: bool | None = None) -> DominanceDag:
    """Construct the dominance DAG over merged observations.

    ``reduce=None`` applies the transitive reduction for d <= 3 or ternary data
    and keeps the full edge set otherwise.  Reduction preserves reachability.
    """
    if reduce is None:
        reduce = dataset.d <= 3 or dataset.is_ternary()
    x = dataset.x
    if reduce:
        if dataset.d == 1:
            edges = _reduced_edges_1d(x)
        elif dataset.d == 2:
            edges = _reduced_edges_2d(x)
        else:
            edges = _reduce_by_closure(x, _full_order_edges(x))
    else:
        edges = _full_order_edges(x)
    return DominanceDag(n=dataset.n, edges=edges, reduced=bool(reduce))


def reachability_matrix(dag: DominanceDag, guard: int = 4000) -> np.ndarray:
    """Boolean reachability (strict) over the DAG edges; small instances only."""
    if dag.n > guard:
        raise ValidationError(f"reachability guard exceeded: n={dag.n} > {guard}")
    reach = np.zeros((dag.n, dag.n), dtype=bool)
    reach[dag.edges[:, 0], dag.edges[:, 1]] = True
    # Floyd-Warshall style closure, vectorized over rows.
    for k in range(dag.n):
        via = reach[:, k]
        if via.any():
            reach[via] |= reach[k]
    return reach
