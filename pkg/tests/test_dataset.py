"""Ingest, duplicate merging, and dominance-order construction."""

import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irp import (
    DominanceDag,
    Observation,
    ParseError,
    ValidationError,
    WeightedDataset,
    build_order,
    fit_path,
    load_csv,
    merge_duplicates,
)
from irp.dataset import reachability_matrix
from irp.oracles import dykstra_project

from conftest import random_dataset


class TestLoadCsv:
    def test_three_rows_with_header(self):
        obs = load_csv(io.StringIO("x1,x2,y\n0,0,1\n1,0,2\n1,1,3\n"))
        assert len(obs) == 3
        assert obs[0] == Observation(covariates=(0.0, 0.0), response=1.0)
        assert obs[2].covariates == (1.0, 1.0)
        assert all(len(o.covariates) == 2 for o in obs)

    def test_header_only_gives_empty_list(self):
        assert load_csv(io.StringIO("x1,y\n")) == []

    def test_bad_cell_names_line(self):
        with pytest.raises(ParseError) as err:
            load_csv(io.StringIO("1,1,2\n1,a,2\n"))
        assert err.value.line == 2

    def test_no_header_trailing_column_is_response(self):
        obs = load_csv(io.StringIO("0,1\n2,3\n"))
        assert [o.response for o in obs] == [1.0, 3.0]
        assert [o.covariates for o in obs] == [(0.0,), (2.0,)]

    def test_named_weight_column(self):
        obs = load_csv(io.StringIO("x1,w,y\n0,2,1\n"))
        assert obs[0].weight == 2.0
        assert obs[0].covariates == (0.0,)

    def test_schema_override(self):
        obs = load_csv(io.StringIO("1,5,9\n"), schema={"response": 0, "weight": 1})
        assert obs[0].response == 1.0
        assert obs[0].weight == 5.0
        assert obs[0].covariates == (9.0,)

    def test_nonpositive_weight_rejected(self):
        with pytest.raises(ValidationError):
            load_csv(io.StringIO("x1,w,y\n0,0,1\n"))

    def test_nan_rejected(self):
        with pytest.raises(ValidationError):
            load_csv(io.StringIO("0,nan\n"))

    def test_ragged_row_rejected(self):
        with pytest.raises(ParseError) as err:
            load_csv(io.StringIO("1,2\n1,2,3\n"))
        assert err.value.line == 2


class TestMergeDuplicates:
    def test_two_rows_same_point(self):
        raw = [
            Observation(covariates=(0.0,), response=1.0),
            Observation(covariates=(0.0,), response=3.0),
        ]
        ds = merge_duplicates(raw)
        assert ds.n == 1
        assert ds.y[0] == 2.0
        assert ds.w[0] == 2.0
        assert sorted(ds.provenance[0]) == [0, 1]

    def test_weighted_merge(self):
        raw = [
            Observation(covariates=(0.0,), response=1.0, weight=1.0),
            Observation(covariates=(0.0,), response=2.0, weight=3.0),
        ]
        ds = merge_duplicates(raw)
        assert ds.y[0] == 1.75
        assert ds.w[0] == 4.0

    def test_distinct_rows_identity(self):
        raw = [
            Observation(covariates=(0.0,), response=1.0),
            Observation(covariates=(1.0,), response=5.0),
        ]
        ds = merge_duplicates(raw)
        assert ds.n == 2
        np.testing.assert_array_equal(np.sort(ds.y), [1.0, 5.0])
        np.testing.assert_array_equal(ds.w, [1.0, 1.0])

    def test_dimension_mismatch(self):
        raw = [
            Observation(covariates=(0.0,), response=1.0),
            Observation(covariates=(0.0, 1.0), response=1.0),
        ]
        with pytest.raises(ValidationError):
            merge_duplicates(raw)

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            merge_duplicates([])

    def test_merge_then_fit_matches_unmerged_weighted_problem(self):
        # The unmerged problem with equality-forcing constraint pairs between
        # duplicates has the same optimum; solve it with the projection oracle.
        rng = np.random.default_rng(5)
        for _ in range(10):
            n = int(rng.integers(4, 16))
            x = rng.integers(0, 2, size=(n, 2)).astype(float)
            y = rng.standard_normal(n)
            w = rng.uniform(0.5, 2.0, n)
            raw = [
                Observation(covariates=tuple(x[i]), response=float(y[i]), weight=float(w[i]))
                for i in range(n)
            ]
            ds = merge_duplicates(raw)
            path = fit_path(ds, build_order(ds))
            fits = path.fits_at(path.length)
            le = (x[:, None, :] <= x[None, :, :]).all(axis=2)
            pairs = [(i, j) for i in range(n) for j in range(n) if i != j and le[i, j]]
            loose = DominanceDag(n=n, edges=np.array(pairs).reshape(-1, 2), reduced=False)
            oracle = dykstra_project(y, w, loose, tol=1e-12)
            assert oracle.converged
            for merged_idx, rows in ds.provenance.items():
                for row in rows:
                    assert abs(fits[merged_idx] - oracle.fits[row]) < 1e-8


class TestBuildOrder:
    def test_incomparable_pair(self):
        ds = WeightedDataset(x=np.array([[0.0, 1.0], [1.0, 0.0]]), y=np.zeros(2), w=np.ones(2))
        assert build_order(ds).m == 0

    def test_1d_chain_reduction(self):
        ds = WeightedDataset(x=np.array([[0.0], [1.0], [2.0]]), y=np.zeros(3), w=np.ones(3))
        dag = build_order(ds, reduce=True)
        assert dag.reduced
        assert sorted(map(tuple, dag.edges.tolist())) == [(0, 1), (1, 2)]

    def test_grid_edge_counts(self):
        x = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        ds = WeightedDataset(x=x, y=np.zeros(4), w=np.ones(4))
        assert build_order(ds, reduce=False).m == 5
        assert build_order(ds, reduce=True).m == 4

    def test_edges_are_dominance_pairs(self, rng):
        for _ in range(20):
            ds = random_dataset(rng, n_max=40, d_max=3)
            dag = build_order(ds, reduce=False)
            for u, v in dag.edges:
                assert (ds.x[u] <= ds.x[v]).all()
                assert not (ds.x[u] == ds.x[v]).all()

    def test_reduction_preserves_reachability(self, rng):
        for _ in range(25):
            ds = random_dataset(rng, n_max=50, d_max=3)
            full = build_order(ds, reduce=False)
            red = build_order(ds, reduce=True)
            assert red.m <= full.m
            comparable = np.zeros((ds.n, ds.n), dtype=bool)
            comparable[full.edges[:, 0], full.edges[:, 1]] = True
            np.testing.assert_array_equal(reachability_matrix(red), comparable)

    def test_2d_fast_path_matches_generic_reduction(self, rng):
        from irp.dataset import _full_order_edges, _reduce_by_closure, _reduced_edges_2d

        for _ in range(20):
            n = int(rng.integers(2, 80))
            x = rng.uniform(0, 1, (n, 2))
            if rng.random() < 0.5:
                x = np.round(x * 4)  # force ties in single coordinates
                x, idx = np.unique(x, axis=0, return_index=True)
            fast = _reduced_edges_2d(x)
            generic = _reduce_by_closure(x, _full_order_edges(x))
            assert sorted(map(tuple, fast.tolist())) == sorted(map(tuple, generic.tolist()))

    def test_permutation_invariance(self, rng):
        ds = random_dataset(rng, n_max=40, d_max=2)
        perm = rng.permutation(ds.n)
        shuffled = WeightedDataset(x=ds.x[perm], y=ds.y[perm], w=ds.w[perm])
        a = build_order(ds, reduce=True)
        b = build_order(shuffled, reduce=True)
        inv = np.empty(ds.n, dtype=np.int64)
        inv[perm] = np.arange(ds.n)
        relabeled = sorted((int(perm[u]), int(perm[v])) for u, v in b.edges)
        del inv
        assert relabeled == sorted(map(tuple, a.edges.tolist()))

    def test_default_reduce_policy(self):
        cont = WeightedDataset(x=np.random.rand(10, 4), y=np.zeros(10), w=np.ones(10))
        assert not build_order(cont).reduced
        tern = WeightedDataset(
            x=np.array([[0.0, 1.0, 2.0, 0.0], [1.0, 1.0, 2.0, 0.0]]),
            y=np.zeros(2),
            w=np.ones(2),
        )
        assert build_order(tern).reduced

    def test_export_edges(self):
        ds = WeightedDataset(x=np.array([[0.0], [1.0]]), y=np.zeros(2), w=np.ones(2))
        buf = io.StringIO()
        build_order(ds).export_edges(buf)
        assert buf.getvalue() == "0 1\n"


@given(
    st.lists(
        st.tuples(st.integers(0, 3), st.integers(0, 3)),
        min_size=1,
        max_size=25,
    )
)
@settings(max_examples=60, deadline=None)
def test_acyclicity_property(points):
    x = np.array(points, dtype=np.float64)
    x = np.unique(x, axis=0)
    ds = WeightedDataset(x=x, y=np.zeros(x.shape[0]), w=np.ones(x.shape[0]))
    dag = build_order(ds, reduce=False)
    reach = reachability_matrix(dag)
    assert not np.diag(reach).any()
