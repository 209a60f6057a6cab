"""The recursive partitioning engine and its path/model surface."""

import io

import numpy as np
import pytest

from irp import (
    DominanceDag,
    FitConfig,
    TruncatedPathError,
    ValidationError,
    WeightedDataset,
    build_order,
    final_blocks,
    fit_path,
    model_at,
    path_from_json,
    path_to_json,
    predict,
    predict_batch,
)
from irp.oracles import dykstra_project, pava

from conftest import (
    assert_no_regret,
    assert_path_isotonic,
    chain_dataset,
    partition_key,
    random_dataset,
)


class TestFitPath:
    def test_constant_responses(self):
        ds = chain_dataset([5.0, 5.0, 5.0])
        path = fit_path(ds, build_order(ds))
        assert path.length == 0
        assert len(path.block_members) == 1
        assert path.block_fits[0] == 5.0

    def test_fully_pooled_chain(self):
        ds = chain_dataset([3.0, 1.0, 2.0])
        path = fit_path(ds, build_order(ds))
        np.testing.assert_allclose(path.fits_at(path.length), [2.0, 2.0, 2.0])
        assert len(path.block_members) == 1

    def test_three_block_chain(self):
        ds = chain_dataset([1.0, 3.0, 2.0, 4.0])
        path = fit_path(ds, build_order(ds))
        np.testing.assert_allclose(path.fits_at(path.length), [1.0, 2.5, 2.5, 4.0])
        assert partition_key(path.block_members) == [(0,), (1, 2), (3,)]
        assert path.length == len(path.block_members) - 1

    def test_single_point(self):
        ds = chain_dataset([4.0])
        path = fit_path(ds, build_order(ds))
        assert len(path.block_members) == 1
        assert path.block_fits[0] == 4.0

    def test_incomparable_points_interpolate(self, rng):
        n = 12
        x = np.column_stack([np.arange(n, dtype=float), -np.arange(n, dtype=float)])
        y = rng.standard_normal(n)
        ds = WeightedDataset(x=x, y=y, w=np.ones(n))
        path = fit_path(ds, build_order(ds))
        assert len(path.block_members) == n
        np.testing.assert_allclose(path.fits_at(path.length), y)

    def test_empty_dataset_rejected(self):
        dag = DominanceDag(n=0, edges=np.empty((0, 2)), reduced=True)
        with pytest.raises(ValidationError):
            from irp import fit_path_arrays

            fit_path_arrays(np.empty(0), np.empty(0), dag)

    def test_matches_pava_on_random_chains(self, rng):
        for _ in range(20):
            n = int(rng.integers(2, 200))
            y = rng.standard_normal(n)
            w = rng.uniform(0.5, 2.0, n)
            ds = chain_dataset(y, w)
            path = fit_path(ds, build_order(ds))
            np.testing.assert_allclose(path.fits_at(path.length), pava(y, w), atol=1e-10)

    def test_matches_projection_oracle(self, rng):
        for _ in range(15):
            ds = random_dataset(rng, n_max=60, d_max=3)
            dag = build_order(ds)
            path = fit_path(ds, dag)
            oracle = dykstra_project(ds.y, ds.w, dag)
            assert oracle.converged
            scale = max(1.0, float(np.abs(ds.y).max()))
            dev = np.abs(path.fits_at(path.length) - oracle.fits).max() / scale
            assert dev < 1e-6

    def test_path_is_isotonic_and_no_regret(self, rng):
        for _ in range(10):
            ds = random_dataset(rng, n_max=80, d_max=3)
            dag = build_order(ds)
            path = fit_path(ds, dag)
            assert_path_isotonic(path, dag)
            assert_no_regret(path)

    def test_truncation(self, rng):
        ds = chain_dataset(rng.standard_normal(50))
        dag = build_order(ds)
        full = fit_path(ds, dag)
        assert full.length > 1
        short = fit_path(ds, dag, FitConfig(max_iterations=1))
        assert short.truncated
        assert short.length == 1
        with pytest.raises(TruncatedPathError):
            final_blocks(short)

    def test_max_iterations_zero(self, rng):
        ds = chain_dataset(rng.standard_normal(20))
        path = fit_path(ds, build_order(ds), FitConfig(max_iterations=0))
        assert path.length == 0
        assert path.truncated
        model = model_at(path, 0)
        assert len(model.partition) == 1

    def test_bad_tol_rejected(self):
        with pytest.raises(ValidationError):
            FitConfig(tol=0.0)


class TestModelAt:
    def test_k0_is_global_mean(self, rng):
        ds = random_dataset(rng, n_max=30)
        path = fit_path(ds, build_order(ds))
        model = model_at(path, 0)
        assert len(model.partition) == 1
        mean = float(ds.w @ ds.y / ds.w.sum())
        assert model.fits[0] == pytest.approx(mean)

    def test_final_equals_block_class(self, rng):
        ds = random_dataset(rng, n_max=40)
        path = fit_path(ds, build_order(ds))
        model = model_at(path, path.length)
        assert partition_key(model.partition) == partition_key(path.block_members)

    def test_partition_sizes_and_refinement(self, rng):
        ds = random_dataset(rng, n_max=50, d_max=2)
        path = fit_path(ds, build_order(ds))
        prev = None
        for k in range(path.length + 1):
            model = model_at(path, k)
            assert len(model.partition) == k + 1
            if prev is not None:
                prev_key = {g: None for g in partition_key(prev.partition)}
                cur = partition_key(model.partition)
                carried = [g for g in cur if g in prev_key]
                # exactly one group of the previous model was split in two
                assert len(carried) == k - 1
            prev = model

    def test_objective_nonincreasing_and_consistent(self, rng):
        ds = random_dataset(rng, n_max=60, d_max=3)
        path = fit_path(ds, build_order(ds))
        last = np.inf
        for k in range(path.length + 1):
            model = model_at(path, k)
            fits = model.fitted_values(ds.n)
            recomputed = float(ds.w @ (ds.y - fits) ** 2)
            assert model.objective == pytest.approx(recomputed, abs=1e-8)
            assert model.objective <= last + 1e-9
            if k > 0:
                assert model.objective < last  # nontrivial cuts strictly improve
            last = model.objective

    def test_out_of_range(self, rng):
        ds = chain_dataset(rng.standard_normal(5))
        path = fit_path(ds, build_order(ds))
        with pytest.raises(ValidationError):
            model_at(path, path.length + 1)
        with pytest.raises(ValidationError):
            model_at(path, -1)


class TestPredict:
    def test_training_point_reproduced(self, rng):
        ds = random_dataset(rng, n_max=40, d_max=2)
        path = fit_path(ds, build_order(ds))
        model = model_at(path, path.length)
        fits = model.fitted_values(ds.n)
        for i in range(ds.n):
            assert predict(model, ds.x[i], ds) == pytest.approx(fits[i])

    def test_dominating_point_gets_max_fit(self, rng):
        ds = random_dataset(rng, n_max=30, d_max=2, ternary_prob=0.0)
        path = fit_path(ds, build_order(ds))
        model = model_at(path, path.length)
        top = ds.x.max(axis=0) + 1.0
        assert predict(model, top, ds) == pytest.approx(
            float(model.fitted_values(ds.n).max())
        )

    def test_midpoint_rule(self):
        ds = chain_dataset([1.0, 2.0])
        path = fit_path(ds, build_order(ds))
        model = model_at(path, path.length)
        assert predict(model, np.array([0.5]), ds) == pytest.approx(1.5)

    def test_incomparable_point_falls_back_to_global_mean(self):
        x = np.array([[0.0, 1.0], [1.0, 0.0]])
        ds = WeightedDataset(x=x, y=np.array([1.0, 3.0]), w=np.array([1.0, 3.0]))
        path = fit_path(ds, build_order(ds))
        model = model_at(path, path.length)
        values, extrapolated = predict_batch(model, np.array([[-1.0, -1.0], [-1.0, 5.0]]), ds)
        assert values[1] == pytest.approx(2.5)  # weighted mean
        assert not extrapolated[0] and extrapolated[1]

    def test_dimension_mismatch(self, rng):
        ds = random_dataset(rng, n_max=10, d_max=2)
        path = fit_path(ds, build_order(ds))
        model = model_at(path, 0)
        with pytest.raises(ValidationError):
            predict_batch(model, np.zeros((1, ds.d + 1)), ds)

    def test_predictions_isotonic_in_1d(self, rng):
        ds = chain_dataset(rng.standard_normal(30))
        path = fit_path(ds, build_order(ds))
        model = model_at(path, path.length)
        grid = np.linspace(-1, 31, 200)[:, None]
        values, _ = predict_batch(model, grid, ds)
        assert (np.diff(values) >= -1e-12).all()


class TestJsonRoundTrip:
    def test_round_trip_preserves_fits(self, rng):
        ds = random_dataset(rng, n_max=40, d_max=2)
        path = fit_path(ds, build_order(ds))
        buf = io.StringIO()
        path_to_json(path, buf)
        buf.seek(0)
        loaded = path_from_json(buf)
        assert loaded.length == path.length
        np.testing.assert_array_equal(loaded.y, path.y)
        for k in range(path.length + 1):
            np.testing.assert_allclose(loaded.fits_at(k), path.fits_at(k), rtol=1e-12)
        np.testing.assert_allclose(loaded.block_fits, path.block_fits, rtol=1e-12)
        assert partition_key(loaded.block_members) == partition_key(path.block_members)

    def test_include_models(self, rng):
        import json

        ds = chain_dataset(rng.standard_normal(8))
        path = fit_path(ds, build_order(ds))
        buf = io.StringIO()
        path_to_json(path, buf, include_models=True)
        doc = json.loads(buf.getvalue())
        assert len(doc["models"]) == path.length + 1
        assert len(set(doc["models"][0])) == 1
        assert len(set(doc["models"][-1])) == len(path.block_members)

    def test_detached_path_rejected(self, rng):
        from irp import fit_path_arrays

        ds = chain_dataset(rng.standard_normal(5))
        path = fit_path_arrays(ds.y, ds.w, build_order(ds))
        with pytest.raises(ValidationError):
            path_to_json(path, io.StringIO())
