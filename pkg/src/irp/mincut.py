"""Optimal-cut solver: max-weight upper set via an s-t min cut.

For a group V with node weights c_i = w_i (y_i - weighted mean), the best
feasible split is found by selecting the upper-closed subset B maximizing
sum of c over B.  The selection problem is a closure problem: source arcs
carry the positive weights, sink arcs the negative ones, and order arcs get
effectively infinite capacity so no cut may separate a node from its
successors.  The source-closest minimum cut gives the minimal optimal upper
set, which makes the returned cut deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import DominanceDag
from .errors import ValidationError

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


__all__ = ["FlowNetwork", "Cut", "max_flow", "build_closure_network", "optimal_cut"]


@dataclass
class FlowNetwork:
    """Capacitated digraph with designated source and sink.

    Arcs are stored forward/reverse interleaved: arc 2k is (tail[k] -> head[k])
    with its capacity, arc 2k+1 is the zero-capacity reverse.  ``node_ids``
    maps local node index to a caller-side id for closure networks.
    """

    num_nodes: int
    source: int
    sink: int
    tails: np.ndarray
    heads: np.ndarray
    caps: np.ndarray
    node_ids: np.ndarray | None = None
    _csr: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        self.tails = np.asarray(self.tails, dtype=np.int64)
        self.heads = np.asarray(self.heads, dtype=np.int64)
        self.caps = np.asarray(self.caps, dtype=np.float64)
        if np.any(self.caps < 0):
            raise ValidationError("arc capacities must be nonnegative")
        if self.source == self.sink:
            raise ValidationError("source and sink must differ")

    def residual_arrays(self):
        """Fresh (indptr, adj, to, cap) arrays for one solve."""
        e = self.tails.size
        src = np.empty(2 * e, dtype=np.int64)
        to = np.empty(2 * e, dtype=np.int64)
        cap = np.zeros(2 * e)
        src[0::2] = self.tails
        src[1::2] = self.heads
        to[0::2] = self.heads
        to[1::2] = self.tails
        cap[0::2] = self.caps
        order = np.argsort(src, kind="stable").astype(np.int64)
        indptr = np.searchsorted(src[order], np.arange(self.num_nodes + 1)).astype(
            np.int64
        )
        return indptr, order, to, cap

    def to_dimacs(self) -> str:
        """Max-flow problem dump in DIMACS-like text form (1-based nodes)."""
        lines = [f"p max {self.num_nodes} {self.tails.size}"]
        lines.append(f"n {self.source + 1} s")
        lines.append(f"n {self.sink + 1} t")
        for u, v, c in zip(self.tails, self.heads, self.caps):
            lines.append(f"a {u + 1} {v + 1} {float(c)!r}")
        return "\n".join(lines) + "\n"


@dataclass
class Cut:
    """A feasible two-way split of a group, with its objective value."""

    a: np.ndarray  # lower side, global indices
    b: np.ndarray  # upper side, global indices
    value: float
    trivial: bool


@njit(cache=True)
def _dinic(indptr, adj, to, cap, s, t, eps):
    n = indptr.size - 1
    level = np.empty(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    it = np.empty(n, dtype=np.int64)
    path = np.empty(n + 1, dtype=np.int64)
    total = 0.0
    while True:
        for i in range(n):
            level[i] = -1
        level[s] = 0
        queue[0] = s
        qh, qt = 0, 1
        while qh < qt:
            u = queue[qh]
            qh += 1
            for pos in range(indptr[u], indptr[u + 1]):
                e = adj[pos]
                v = to[e]
                if cap[e] > eps and level[v] < 0:
                    level[v] = level[u] + 1
                    queue[qt] = v
                    qt += 1
        if level[t] < 0:
            break
        for i in range(n):
            it[i] = indptr[i]
        u = s
        depth = 0
        while True:
            if u == t:
                bottleneck = np.inf
                for i in range(depth):
                    e = adj[path[i]]
                    if cap[e] < bottleneck:
                        bottleneck = cap[e]
                for i in range(depth):
                    e = adj[path[i]]
                    cap[e] -= bottleneck
                    cap[e ^ 1] += bottleneck
                total += bottleneck
                u = s
                depth = 0
                continue
            advanced = False
            pos = it[u]
            while pos < indptr[u + 1]:
                e = adj[pos]
                v = to[e]
                if cap[e] > eps and level[v] == level[u] + 1:
                    path[depth] = pos
                    depth += 1
                    u = v
                    advanced = True
                    break
                pos += 1
                it[u] = pos
            if advanced:
                continue
            level[u] = -1
            if u == s:
                break
            depth -= 1
            u = to[adj[path[depth]] ^ 1]
    return total


@njit(cache=True)
def _reachable(indptr, adj, to, cap, s, eps):
    n = indptr.size - 1
    seen = np.zeros(n, dtype=np.bool_)
    queue = np.empty(n, dtype=np.int64)
    seen[s] = True
    queue[0] = s
    qh, qt = 0, 1
    while qh < qt:
        u = queue[qh]
        qh += 1
        for pos in range(indptr[u], indptr[u + 1]):
            e = adj[pos]
            v = to[e]
            if cap[e] > eps and not seen[v]:
                seen[v] = True
                queue[qt] = v
                qt += 1
    return seen


def _solve(net: FlowNetwork, eps: float):
    indptr, adj, to, cap = net.residual_arrays()
    flow = _dinic(indptr, adj, to, cap, net.source, net.sink, eps)
    seen = _reachable(indptr, adj, to, cap, net.source, eps)
    return float(flow), seen


def max_flow(net: FlowNetwork, eps: float | None = None):
    """Maximum s-t flow value and the source side of the source-closest min cut.

    The returned set contains the node indices reachable from the source in the
    residual graph, source included.
    """
    if eps is None:
        finite = net.caps[np.isfinite(net.caps)]
        scale = float(finite.sum()) if finite.size else 1.0
        eps = 1e-12 * max(scale, 1.0)
    flow, seen = _solve(net, eps)
    return flow, set(np.nonzero(seen)[0].tolist())


def _closure_arcs(g: int, c: np.ndarray, local_u: np.ndarray, local_v: np.ndarray):
    """Arc arrays for the closure network over g local nodes with weights c."""
    pos = np.nonzero(c > 0)[0]
    neg = np.nonzero(c < 0)[0]
    inf_cap = float(np.abs(c).sum()) + 1.0
    s, t = g, g + 1
    tails = np.concatenate(
        [np.full(pos.size, s, dtype=np.int64), neg.astype(np.int64), local_u]
    )
    heads = np.concatenate(
        [pos.astype(np.int64), np.full(neg.size, t, dtype=np.int64), local_v]
    )
    caps = np.concatenate([c[pos], -c[neg], np.full(local_u.size, inf_cap)])
    return tails, heads, caps


def build_closure_network(
    group: np.ndarray, dag: DominanceDag, c: np.ndarray
) -> FlowNetwork:
    """Closure network for a group: the min cut selects the best upper set.

    ``c`` holds one weight per group member, aligned with ``group`` order.
    Only order arcs with both endpoints inside the group are included.
    """
    group = np.asarray(group, dtype=np.int64)
    c = np.asarray(c, dtype=np.float64)
    if group.size and (group.min() < 0 or group.max() >= dag.n):
        raise ValidationError("group index out of range")
    if not np.all(np.isfinite(c)):
        raise ValidationError("closure weights must be finite")
    local = np.full(dag.n, -1, dtype=np.int64)
    local[group] = np.arange(group.size)
    eu, ev = dag.edges[:, 0], dag.edges[:, 1]
    internal = (local[eu] >= 0) & (local[ev] >= 0)
    tails, heads, caps = _closure_arcs(
        group.size, c, local[eu[internal]], local[ev[internal]]
    )
    return FlowNetwork(
        num_nodes=group.size + 2,
        source=group.size,
        sink=group.size + 1,
        tails=tails,
        heads=heads,
        caps=caps,
        node_ids=group,
    )


def _optimal_cut_core(
    members: np.ndarray,
    edge_u: np.ndarray,
    edge_v: np.ndarray,
    y: np.ndarray,
    w: np.ndarray,
    tol: float,
) -> Cut:
    """Optimal cut of a group given its internal edges in local indices.

    ``y`` and ``w`` are aligned with ``members``.
    """
    g = members.size
    wsum = w.sum()
    c = w * (y - float(w @ y) / wsum)
    scale = float(np.abs(c).sum())
    if scale == 0.0:
        return Cut(a=members.copy(), b=members[:0], value=0.0, trivial=True)
    tails, heads, caps = _closure_arcs(g, c, edge_u, edge_v)
    net = FlowNetwork(
        num_nodes=g + 2, source=g, sink=g + 1, tails=tails, heads=heads, caps=caps
    )
    _, seen = _solve(net, eps=1e-12 * scale)
    in_b = seen[:g]
    if not in_b.any() or in_b.all():
        # roundoff noise in c can leave a one-sided "optimum"; that certifies
        # the group as a block
        return Cut(a=members.copy(), b=members[:0], value=0.0, trivial=True)
    value = 2.0 * float(c[in_b].sum())
    trivial = value <= tol * scale
    return Cut(a=members[~in_b], b=members[in_b], value=value, trivial=trivial)


def optimal_cut(
    group: np.ndarray,
    dag: DominanceDag,
    responses: np.ndarray,
    weights: np.ndarray | None = None,
    tol: float = 1e-9,
) -> Cut:
    """Best feasible split of ``group`` under the dominance order.

    ``responses`` and ``weights`` are full-length arrays indexed by global
    observation index.  The trivial flag certifies that the group is a block.
    """
    group = np.asarray(group, dtype=np.int64)
    if group.size == 0:
        raise ValidationError("group must be nonempty")
    responses = np.asarray(responses, dtype=np.float64)
    weights = (
        np.ones(dag.n) if weights is None else np.asarray(weights, dtype=np.float64)
    )
    local = np.full(dag.n, -1, dtype=np.int64)
    local[group] = np.arange(group.size)
    eu, ev = dag.edges[:, 0], dag.edges[:, 1]
    internal = (local[eu] >= 0) & (local[ev] >= 0)
    return _optimal_cut_core(
        group,
        local[eu[internal]],
        local[ev[internal]],
        responses[group],
        weights[group],
        tol,
    )
