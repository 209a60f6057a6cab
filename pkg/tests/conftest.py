"""Shared fixtures and verification helpers for the test suite."""

import numpy as np
import pytest

from irp import DominanceDag, WeightedDataset, build_order
from irp.analytics import merge_rows


def chain_dataset(y, w=None):
    """1D dataset whose covariate equals the position, so the order is a chain."""
    y = np.asarray(y, dtype=np.float64)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=np.float64)
    x = np.arange(y.size, dtype=np.float64)[:, None]
    return WeightedDataset(x=x, y=y, w=w)


def random_dataset(rng, n_max=200, d_max=4, ternary_prob=0.5, weighted=True):
    """A merged random instance: continuous or ternary covariates, noise response."""
    n = int(rng.integers(2, n_max + 1))
    d = int(rng.integers(1, d_max + 1))
    if rng.random() < ternary_prob:
        x = rng.integers(0, 3, size=(n, d)).astype(np.float64)
    else:
        x = rng.uniform(0.0, 1.0, size=(n, d))
    y = rng.standard_normal(n)
    w = rng.uniform(0.5, 2.0, n) if weighted else np.ones(n)
    return merge_rows(x, y, w)


def fit_scale(y):
    return max(1.0, float(np.abs(y).max()))


def assert_path_isotonic(path, dag, rtol=1e-9):
    """Every intermediate model along the path respects every order constraint."""
    if dag.m == 0:
        return
    eu = dag.edges[:, 0]
    ev = dag.edges[:, 1]
    slack = rtol * fit_scale(path.y)
    for k, fits in path.iter_fits():
        worst = float((fits[eu] - fits[ev]).max())
        assert worst <= slack, f"isotonicity violated at iteration {k}: {worst}"


def assert_no_regret(path):
    """No executed cut separates two members of the same final block."""
    block_id = np.empty(path.n, dtype=np.int64)
    for bid, members in enumerate(path.block_members):
        block_id[members] = bid
    for rec in path.records:
        shared = np.intersect1d(block_id[rec.a_members], block_id[rec.b_members])
        assert shared.size == 0, f"cut {rec.k} splits final blocks {shared.tolist()}"


def partition_key(groups):
    """Canonical, comparable form of a partition (list of index arrays)."""
    return sorted(tuple(sorted(int(i) for i in g)) for g in groups)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
