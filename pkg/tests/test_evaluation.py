"""Experiment harness tests: the error metric against hand values, row
layout and determinism of the three Monte-Carlo sweeps, and the CSV writers
against golden strings."""

import io

import numpy as np
import pytest

from sleepload import (
    EstimationError,
    ExperimentConfig,
    ResultRow,
    SyntheticConfig,
    TrainConfig,
    generate_synthetic,
    mape,
    run_mlc_experiment,
    run_spatial_experiment,
    run_temporal_experiment,
    write_fig2_csv,
    write_fig3_csv,
    write_fig7_csv,
    write_results_csv,
)


class TestMape:
    def test_hand_value(self):
        # 0.05/0.5 = 10% and 0.05/0.2 = 25% average to 17.5%
        assert mape([0.5, 0.2], [0.45, 0.25]) == pytest.approx(17.5, abs=1e-12)

    def test_perfect_prediction(self):
        assert mape([0.3, 0.7], [0.3, 0.7]) == 0.0

    def test_floor_caps_denominator(self):
        # a zero actual uses the floor, so the percentage is huge but finite
        value = mape([0.0], [0.001])
        assert value == pytest.approx(100.0 * 0.001 / 1e-6, rel=1e-12)
        assert np.isfinite(value)

    def test_custom_floor(self):
        assert mape([0.0], [0.5], floor=0.5) == pytest.approx(100.0)

    def test_validation(self):
        with pytest.raises(ValueError, match="aligned"):
            mape([1.0], [1.0, 2.0])
        with pytest.raises(ValueError, match="aligned"):
            mape([], [])
        with pytest.raises(ValueError, match="floor"):
            mape([1.0], [1.0], floor=0.0)
        with pytest.raises(ValueError, match="finite"):
            mape([np.nan], [1.0])


class TestEstimationError:
    def test_population_statistics(self):
        summary = EstimationError((1.0, 2.0, 3.0))
        assert summary.count == 3
        assert summary.mean_mape == 2.0
        assert summary.std_mape == pytest.approx(np.sqrt(2.0 / 3.0), abs=1e-15)

    def test_rejects_empty(self):
        with pytest.raises(ValueError, match="trial"):
            EstimationError(())


class TestExperimentConfig:
    def test_defaults_valid(self):
        config = ExperimentConfig()
        assert "idw" in config.estimators

    def test_rejects_unknown_estimator(self):
        with pytest.raises(ValueError, match="estimators"):
            ExperimentConfig(estimators=("kriging",))

    def test_rejects_empty_axes(self):
        with pytest.raises(ValueError, match="exponents"):
            ExperimentConfig(exponents=())
        with pytest.raises(ValueError, match="windows"):
            ExperimentConfig(windows=())

    def test_rejects_bad_counts(self):
        with pytest.raises(ValueError, match="iterations"):
            ExperimentConfig(iterations=0)
        with pytest.raises(ValueError, match="neighbor_counts"):
            ExperimentConfig(neighbor_counts=(0,))


@pytest.fixture(scope="module")
def small_grid():
    return generate_synthetic(SyntheticConfig(grid_side=5, num_days=2,
                                              slots_per_day=24, seed=6))


class TestSpatialHarness:
    def test_row_layout(self, small_grid):
        config = ExperimentConfig(estimators=("mean", "idw"), exponents=(1.0, 3.0),
                                  neighbor_counts=(4, 8), iterations=5, seed=1)
        rows = run_spatial_experiment(small_grid, config)
        # mean has no exponent axis: 2 rows; idw: 2 exponents x 2 counts
        assert len(rows) == 2 + 4
        assert {r.experiment for r in rows} == {"spatial"}
        assert all(r.trials == 5 for r in rows)
        assert all(np.isfinite(r.mean_mape) and r.mean_mape >= 0 for r in rows)
        mean_rows = [r for r in rows if r.estimator == "mean"]
        assert sorted(r.param2 for r in mean_rows) == [4.0, 8.0]
        assert all(r.param1 is None for r in mean_rows)

    def test_deterministic(self, small_grid):
        config = ExperimentConfig(estimators=("random",), neighbor_counts=(6,),
                                  iterations=4, seed=9)
        assert run_spatial_experiment(small_grid, config) == \
            run_spatial_experiment(small_grid, config)

    def test_seed_moves_results(self, small_grid):
        base = ExperimentConfig(estimators=("mean",), neighbor_counts=(6,),
                                iterations=4, seed=1)
        other = ExperimentConfig(estimators=("mean",), neighbor_counts=(6,),
                                 iterations=4, seed=2)
        a = run_spatial_experiment(small_grid, base)
        b = run_spatial_experiment(small_grid, other)
        assert a[0].mean_mape != b[0].mean_mape

    def test_infeasible_neighbor_count(self, small_grid):
        config = ExperimentConfig(estimators=("mean",), neighbor_counts=(25,),
                                  iterations=1)
        with pytest.raises(ValueError, match="infeasible"):
            run_spatial_experiment(small_grid, config)


class TestMlcHarness:
    def test_exact_on_planted_clusters(self, clustered_grid):
        grid, _ = clustered_grid
        config = ExperimentConfig(layers=(1, 2, 3), iterations=4,
                                  mlc_clusters=3, sleeping_per_iteration=2,
                                  seed=5)
        rows = run_mlc_experiment(grid, config)
        assert [r.param1 for r in rows] == [1.0, 2.0, 3.0]
        assert {r.estimator for r in rows} == {"mlc"}
        # noiseless planted clusters are recovered perfectly at every depth
        assert all(r.mean_mape == pytest.approx(0.0, abs=1e-6) for r in rows)

    def test_auto_cluster_count(self, clustered_grid):
        grid, _ = clustered_grid
        config = ExperimentConfig(layers=(1,), iterations=2,
                                  mlc_clusters="auto", elbow_range=(1, 6), seed=0)
        rows = run_mlc_experiment(grid, config)
        assert len(rows) == 1
        assert rows[0].trials == 2

    def test_deterministic(self, clustered_grid):
        grid, _ = clustered_grid
        config = ExperimentConfig(layers=(1, 2), iterations=3, mlc_clusters=3)
        assert run_mlc_experiment(grid, config) == run_mlc_experiment(grid, config)


@pytest.fixture(scope="module")
def temporal_rows(small_grid):
    config = ExperimentConfig(windows=(4,), units=(3,), lstm_cells=2,
                              iterations=1, seed=2,
                              train=TrainConfig(epochs=2, batch_size=16))
    return run_temporal_experiment(small_grid, config)


class TestTemporalHarness:
    def test_row_layout(self, temporal_rows):
        assert len(temporal_rows) == 1
        row = temporal_rows[0]
        assert row.experiment == "temporal"
        assert row.estimator == "lstm"
        assert (row.param1, row.param2) == (4.0, 3.0)
        assert row.trials == 2
        assert np.isfinite(row.mean_mape)

    def test_deterministic(self, small_grid, temporal_rows):
        config = ExperimentConfig(windows=(4,), units=(3,), lstm_cells=2,
                                  iterations=1, seed=2,
                                  train=TrainConfig(epochs=2, batch_size=16))
        assert run_temporal_experiment(small_grid, config) == temporal_rows

    def test_too_many_cells(self, small_grid):
        config = ExperimentConfig(lstm_cells=small_grid.num_cells + 1)
        with pytest.raises(ValueError, match="lstm_cells"):
            run_temporal_experiment(small_grid, config)


SAMPLE_ROWS = [
    ResultRow("spatial", "mean", None, 10.0, 12.5, 1.25, 300),
    ResultRow("spatial", "idw", 3.0, 10.0, 8.125, 0.5, 300),
    ResultRow("mlc", "mlc", 2.0, None, 4.75, 0.25, 100),
    ResultRow("temporal", "lstm", 8.0, 10.0, 3.5, 0.125, 3),
]


class TestCsvWriters:
    def test_results_golden(self):
        buffer = io.StringIO()
        write_results_csv(SAMPLE_ROWS, buffer)
        assert buffer.getvalue() == (
            "experiment,estimator,param1,param2,mean_mape,std_mape,trials\n"
            "spatial,mean,,10,12.5,1.25,300\n"
            "spatial,idw,3,10,8.125,0.5,300\n"
            "mlc,mlc,2,,4.75,0.25,100\n"
            "temporal,lstm,8,10,3.5,0.125,3\n"
        )

    def test_fig2_filters_idw(self):
        buffer = io.StringIO()
        write_fig2_csv(SAMPLE_ROWS, buffer)
        assert buffer.getvalue() == (
            "exponent,num_neighbors,mean_mape,std_mape,trials\n"
            "3,10,8.125,0.5,300\n"
        )

    def test_fig3_filters_mlc(self):
        buffer = io.StringIO()
        write_fig3_csv(SAMPLE_ROWS, buffer)
        assert buffer.getvalue() == (
            "layers,mean_mape,std_mape,trials\n"
            "2,4.75,0.25,100\n"
        )

    def test_fig7_filters_lstm(self):
        buffer = io.StringIO()
        write_fig7_csv(SAMPLE_ROWS, buffer)
        assert buffer.getvalue() == (
            "window,units,mean_mape,std_mape,trials\n"
            "8,10,3.5,0.125,3\n"
        )

    def test_path_destination(self, tmp_path):
        target = tmp_path / "results.csv"
        write_results_csv(SAMPLE_ROWS, target)
        lines = target.read_text().splitlines()
        assert lines[0].startswith("experiment,")
        assert len(lines) == 5

    def test_non_integral_param_formatting(self):
        buffer = io.StringIO()
        write_results_csv([ResultRow("spatial", "idw", 2.5, 10.0, 1.0, 0.0, 1)],
                          buffer)
        assert "idw,2.5,10,1,0,1" in buffer.getvalue()
