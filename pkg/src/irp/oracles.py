"""Reference solvers used only for verification.

These are deliberately independent of the partitioning engine: a stack-based
pool-adjacent-violators solver for chains, cyclic Dykstra projection onto the
isotonic cone for arbitrary partial orders, and exhaustive enumeration of
feasible cuts for small groups.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import DominanceDag
from .errors import ValidationError

try:
    from numba import njit
except ImportError:  # pragma: no cover

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


__all__ = [
    "pava",
    "DykstraResult",
    "dykstra_project",
    "CutEnumeration",
    "enumerate_cuts",
]


def pava(y: np.ndarray, w: np.ndarray | None = None) -> np.ndarray:
    """Weighted least-squares isotonic fit on a chain (inputs already ordered)."""
    y = np.asarray(y, dtype=np.float64)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=np.float64)
    if np.any(w <= 0):
        raise ValidationError("weights must be positive")
    # Each stack level holds (weighted sum, weight, count) of a pooled run.
    sums = np.empty_like(y)
    weights = np.empty_like(y)
    counts = np.empty(y.size, dtype=np.int64)
    top = 0
    for i in range(y.size):
        sums[top] = w[i] * y[i]
        weights[top] = w[i]
        counts[top] = 1
        top += 1
        while top > 1 and sums[top - 1] * weights[top - 2] <= sums[top - 2] * weights[
            top - 1
        ]:
            sums[top - 2] += sums[top - 1]
            weights[top - 2] += weights[top - 1]
            counts[top - 2] += counts[top - 1]
            top -= 1
    out = np.empty_like(y)
    pos = 0
    for level in range(top):
        out[pos : pos + counts[level]] = sums[level] / weights[level]
        pos += counts[level]
    return out


@dataclass
class DykstraResult:
    fits: np.ndarray
    sweeps: int
    converged: bool
    max_change: float


@njit(cache=True)
def _dykstra_sweeps(y, w, eu, ev, tol, max_sweeps):
    n = y.size
    m = eu.size
    f = y.copy()
    corr_u = np.zeros(m)
    corr_v = np.zeros(m)
    max_change = np.inf
    sweeps = 0
    while sweeps < max_sweeps:
        max_change = 0.0
        for e in range(m):
            i = eu[e]
            j = ev[e]
            vi = f[i] + corr_u[e]
            vj = f[j] + corr_v[e]
            if vi <= vj:
                ni, nj = vi, vj
                corr_u[e] = 0.0
                corr_v[e] = 0.0
            else:
                mu = (w[i] * vi + w[j] * vj) / (w[i] + w[j])
                ni, nj = mu, mu
                corr_u[e] = vi - mu
                corr_v[e] = vj - mu
            ci = abs(ni - f[i])
            cj = abs(nj - f[j])
            if ci > max_change:
                max_change = ci
            if cj > max_change:
                max_change = cj
            f[i] = ni
            f[j] = nj
        sweeps += 1
        if max_change < tol:
            break
    return f, sweeps, max_change


def dykstra_project(
    y: np.ndarray,
    w: np.ndarray | None,
    dag: DominanceDag,
    tol: float = 1e-10,
    max_sweeps: int = 100_000,
) -> DykstraResult:
    """Weighted L2 projection onto the isotonic cone by cyclic Dykstra sweeps.

    Stops when the largest per-sweep change drops below ``tol``; the result
    flags non-convergence instead of raising so the caller can decide.
    """
    y = np.asarray(y, dtype=np.float64)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=np.float64)
    if np.any(w <= 0):
        raise ValidationError("weights must be positive")
    if dag.m == 0:
        return DykstraResult(fits=y.copy(), sweeps=0, converged=True, max_change=0.0)
    eu = np.ascontiguousarray(dag.edges[:, 0])
    ev = np.ascontiguousarray(dag.edges[:, 1])
    f, sweeps, max_change = _dykstra_sweeps(y, w, eu, ev, tol, max_sweeps)
    return DykstraResult(
        fits=f, sweeps=sweeps, converged=bool(max_change < tol), max_change=max_change
    )


@dataclass
class CutEnumeration:
    """All feasible cuts of a group with both split objectives.

    ``cuts`` holds (a_indices, b_indices, g_star, g_tilde) tuples; the argmax
    of the signed objective excludes the two one-sided (empty) cuts, and both
    variance argmaxes are additionally restricted to cuts whose signed
    objective is nonnegative (upper-side mean at or above the group mean).
    The squared objectives lose the sign, so outside that half space the
    criteria are allowed to disagree.
    """

    cuts: list
    best_gstar: int
    best_size_weighted_gtilde: int
    best_gtilde: int


def enumerate_cuts(
    group: np.ndarray,
    dag: DominanceDag,
    responses: np.ndarray,
    weights: np.ndarray | None = None,
) -> CutEnumeration:
    """Exhaustively enumerate feasible cuts (upper-closed B) of a small group.

    The group must be order-convex so that the within-group edge set captures
    within-group reachability.  Guard: |group| <= 20.
    """
    group = np.asarray(group, dtype=np.int64)
    g = group.size
    if g > 20:
        raise ValidationError(f"group of size {g} exceeds the enumeration guard (20)")
    y = np.asarray(responses, dtype=np.float64)[group]
    w = (
        np.ones(g)
        if weights is None
        else np.asarray(weights, dtype=np.float64)[group]
    )
    local = {int(v): i for i, v in enumerate(group)}
    succ_mask = [0] * g
    for u, v in dag.edges:
        if int(u) in local and int(v) in local:
            succ_mask[local[int(u)]] |= 1 << local[int(v)]

    wsum = w.sum()
    mu = float(w @ y) / wsum
    c = w * (y - mu)

    cuts = []
    best_gstar = -1
    best_gstar_val = -np.inf
    best_weighted = -1
    best_weighted_val = -np.inf
    best_gtilde = -1
    best_gtilde_val = -np.inf
    idx = np.arange(g)
    for bmask in range(1 << g):
        feasible = True
        rest = bmask
        while rest:
            i = (rest & -rest).bit_length() - 1
            rest &= rest - 1
            if succ_mask[i] & ~bmask:
                feasible = False
                break
        if not feasible:
            continue
        in_b = (bmask >> idx) & 1 == 1
        b_loc = idx[in_b]
        a_loc = idx[~in_b]
        g_star = float(c[b_loc].sum() - c[a_loc].sum())
        wa = float(w[a_loc].sum())
        wb = float(w[b_loc].sum())
        g_tilde = 0.0
        if a_loc.size:
            g_tilde += wa * (float(w[a_loc] @ y[a_loc]) / wa - mu) ** 2
        if b_loc.size:
            g_tilde += wb * (float(w[b_loc] @ y[b_loc]) / wb - mu) ** 2
        pos = len(cuts)
        cuts.append((group[a_loc], group[b_loc], g_star, g_tilde))
        if a_loc.size and b_loc.size:
            if g_star > best_gstar_val:
                best_gstar_val, best_gstar = g_star, pos
            # the size-weighted variance criterion matches the signed
            # objective only on the upper-mean-above-group-mean half of the
            # cut space (W_A W_B g_tilde = W (g*/2)^2 loses the sign)
            weighted = wa * wb * g_tilde
            if g_star >= 0 and weighted > best_weighted_val:
                best_weighted_val, best_weighted = weighted, pos
            if g_star >= 0 and g_tilde > best_gtilde_val:
                best_gtilde_val, best_gtilde = g_tilde, pos
    return CutEnumeration(
        cuts=cuts,
        best_gstar=best_gstar,
        best_size_weighted_gtilde=best_weighted,
        best_gtilde=best_gtilde,
    )
