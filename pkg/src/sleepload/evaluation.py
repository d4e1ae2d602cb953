"""Estimator evaluation: MAPE scoring and Monte-Carlo experiment harnesses.

Three harnesses cover the three estimator families.  The spatial one sweeps
neighbor counts and weighting exponents for nearest/random selection; the
cluster one sweeps refinement depth; the temporal one sweeps window size and
hidden units of the forecaster.  Each repeats over seeded trials with
sleeping cells redrawn per trial and reports mean and standard deviation of
the per-trial MAPE.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import lstm
from ._util import derive_seed, format_float
from .clustering import MlcConfig, elbow_select, mlc_estimate_traced
from .data import TrafficGrid, make_windows, remove_outliers_zscore, split_train_test
from .lstm import TrainConfig

MAPE_FLOOR = 1e-6


def mape(actuals, predictions, floor: float = MAPE_FLOOR) -> float:
    """Mean absolute percentage error with a floor on tiny denominators.

    Each actual below ``floor`` is replaced by it, so near-zero loads cannot
    blow the percentage up to infinity.
    """
    actuals = np.asarray(actuals, dtype=float)
    predictions = np.asarray(predictions, dtype=float)
    if actuals.shape != predictions.shape or actuals.ndim != 1 or actuals.size == 0:
        raise ValueError("actuals and predictions must be aligned non-empty vectors")
    if not (floor > 0):
        raise ValueError("floor must be positive")
    if not np.all(np.isfinite(actuals)) or not np.all(np.isfinite(predictions)):
        raise ValueError("values must be finite")
    denom = np.maximum(np.abs(actuals), floor)
    return float(100.0 * (np.abs(predictions - actuals) / denom).mean())


@dataclass(frozen=True)
class EstimationError:
    """Per-trial MAPE values of one estimator configuration."""

    errors: tuple[float, ...]

    def __post_init__(self):
        if not self.errors:
            raise ValueError("need at least one trial")
        object.__setattr__(self, "errors", tuple(float(e) for e in self.errors))

    @property
    def count(self) -> int:
        return len(self.errors)

    @property
    def mean_mape(self) -> float:
        return float(np.mean(self.errors))

    @property
    def std_mape(self) -> float:
        return float(np.std(self.errors))


@dataclass(frozen=True)
class ResultRow:
    """One line of an experiment summary (CSV-ready)."""

    experiment: str
    estimator: str
    param1: float | None
    param2: float | None
    mean_mape: float
    std_mape: float
    trials: int


@dataclass(frozen=True)
class ExperimentConfig:
    """Shared experiment settings; each harness reads the axes it sweeps."""

    estimators: tuple[str, ...] = ("mean", "idw", "random", "random-idw")
    exponents: tuple[float, ...] = (1.0, 3.0, 5.0)
    neighbor_counts: tuple[int, ...] = (10, 25, 50, 100, 150, 200)
    layers: tuple[int, ...] = (1, 2, 3, 4, 5, 6, 7)
    windows: tuple[int, ...] = (4, 8, 12)
    units: tuple[int, ...] = (5, 10, 20)
    iterations: int = 300
    sleeping_per_iteration: int = 1
    lstm_cells: int = 3
    mlc_clusters: int | str = "auto"
    elbow_range: tuple[int, int] = (1, 8)
    z_threshold: float = 2.5
    train: TrainConfig = TrainConfig()
    seed: int = 0

    def __post_init__(self):
        known = {"mean", "idw", "random", "random-idw"}
        if not self.estimators or not set(self.estimators) <= known:
            raise ValueError(f"estimators must be a non-empty subset of {sorted(known)}")
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if self.sleeping_per_iteration < 1:
            raise ValueError("sleeping_per_iteration must be positive")
        if self.lstm_cells < 1:
            raise ValueError("lstm_cells must be positive")
        for name in ("exponents", "neighbor_counts", "layers", "windows", "units"):
            values = getattr(self, name)
            if len(values) == 0:
                raise ValueError(f"{name} must not be empty")
        if any(e <= 0 for e in self.exponents):
            raise ValueError("exponents must be positive")
        if any(n < 1 for n in self.neighbor_counts):
            raise ValueError("neighbor_counts must be positive")
        if any(l < 1 for l in self.layers):
            raise ValueError("layers must be positive")


def _idw_prediction(profiles: np.ndarray, rows: np.ndarray, dists: np.ndarray,
                    exponent: float) -> np.ndarray:
    ratio = dists / dists.min()
    weights = ratio**-exponent
    return weights @ profiles[rows] / weights.sum()


def _spatial_combos(config: ExperimentConfig) -> list[tuple[str, float | None]]:
    combos: list[tuple[str, float | None]] = []
    for estimator in config.estimators:
        if estimator in ("idw", "random-idw"):
            combos.extend((estimator, float(n)) for n in config.exponents)
        else:
            combos.append((estimator, None))
    return combos


def run_spatial_experiment(grid: TrafficGrid, config: ExperimentConfig) -> list[ResultRow]:
    """Monte-Carlo sweep of the spatial estimators on average day profiles.

    Each trial puts a fresh seeded draw of cells to sleep, estimates every
    day slot of each sleeping cell from the remaining active cells, and
    scores one MAPE over all (cell, slot) pairs of the trial.
    """
    profiles = grid.day_profiles()
    num_cells = grid.num_cells
    available = num_cells - config.sleeping_per_iteration
    if max(config.neighbor_counts) > available:
        raise ValueError(
            f"neighbor count {max(config.neighbor_counts)} is infeasible: only "
            f"{available} cells stay active per trial"
        )

    diff = grid.positions[:, None, :] - grid.positions[None, :, :]
    dist_matrix = np.sqrt((diff * diff).sum(axis=2))
    combos = _spatial_combos(config)
    trials: dict[tuple[str, float | None, int], list[float]] = {
        (est, expo, n): [] for est, expo in combos for n in config.neighbor_counts
    }

    n_max = max(config.neighbor_counts)
    for it in range(config.iterations):
        rng = np.random.default_rng(derive_seed(config.seed, "trial", it))
        sleeping = rng.choice(num_cells, size=config.sleeping_per_iteration, replace=False)
        active = np.ones(num_cells, dtype=bool)
        active[sleeping] = False

        apes: dict[tuple[str, float | None, int], list[np.ndarray]] = {
            key: [] for key in trials
        }
        for target in sleeping:
            actual = profiles[target]
            scaled = np.maximum(np.abs(actual), MAPE_FLOOR)

            candidates = np.flatnonzero(active)
            dists = dist_matrix[target, candidates]
            order = np.lexsort((grid.ids[candidates], dists))[:n_max]
            near_rows = candidates[order]
            near_dists = dists[order]

            rand_rng = np.random.default_rng(
                derive_seed(config.seed, "neighbors", it, int(target))
            )
            rand_perm = rand_rng.permutation(candidates)[:n_max]
            rand_rows = rand_perm
            rand_dists = dist_matrix[target, rand_rows]

            for (estimator, exponent) in combos:
                for n in config.neighbor_counts:
                    if estimator == "mean":
                        pred = profiles[near_rows[:n]].mean(axis=0)
                    elif estimator == "idw":
                        pred = _idw_prediction(profiles, near_rows[:n], near_dists[:n], exponent)
                    elif estimator == "random":
                        pred = profiles[rand_rows[:n]].mean(axis=0)
                    else:
                        pred = _idw_prediction(profiles, rand_rows[:n], rand_dists[:n], exponent)
                    apes[(estimator, exponent, n)].append(np.abs(pred - actual) / scaled)

        for key, chunks in apes.items():
            trials[key].append(float(100.0 * np.concatenate(chunks).mean()))

    rows = []
    for (estimator, exponent) in combos:
        for n in config.neighbor_counts:
            summary = EstimationError(tuple(trials[(estimator, exponent, n)]))
            rows.append(ResultRow("spatial", estimator, exponent, float(n),
                                  summary.mean_mape, summary.std_mape, summary.count))
    return rows


def run_mlc_experiment(grid: TrafficGrid, config: ExperimentConfig) -> list[ResultRow]:
    """Monte-Carlo sweep of refinement depth for the cluster estimator.

    The cluster count is resolved once for the whole experiment (elbow on the
    full profiles when set to "auto").  Each trial draws sleeping cells and
    one day slot, runs the deepest requested refinement, and scores every
    intermediate layer from the refinement trace.
    """
    profiles = grid.day_profiles()
    if config.mlc_clusters == "auto":
        lo, hi = config.elbow_range
        hi = min(hi, grid.num_cells)
        clusters = elbow_select(profiles, (lo, hi), seed=derive_seed(config.seed, "elbow"))
    else:
        clusters = int(config.mlc_clusters)

    max_layers = max(config.layers)
    per_layer: dict[int, list[float]] = {layer: [] for layer in config.layers}
    for it in range(config.iterations):
        rng = np.random.default_rng(derive_seed(config.seed, "trial", it))
        sleeping_rows = rng.choice(grid.num_cells, size=config.sleeping_per_iteration,
                                   replace=False)
        slot = int(rng.integers(grid.slots_per_day))
        sleeping_ids = [int(grid.ids[r]) for r in sleeping_rows]
        actual = {cid: float(profiles[grid.index_of(cid), slot]) for cid in sleeping_ids}

        mlc_config = MlcConfig(max_layers=max_layers, num_clusters=clusters,
                               seed=derive_seed(config.seed, "mlc", it))
        _, trace = mlc_estimate_traced(grid, sleeping_ids, slot, mlc_config)
        by_layer: dict[int, dict[int, float]] = {}
        for row in trace:
            by_layer.setdefault(row.layer, {})[row.cell_id] = row.estimate
        for layer in config.layers:
            estimates = by_layer[layer]
            per_layer[layer].append(mape(
                [actual[cid] for cid in sleeping_ids],
                [estimates[cid] for cid in sleeping_ids],
            ))

    rows = []
    for layer in config.layers:
        summary = EstimationError(tuple(per_layer[layer]))
        rows.append(ResultRow("mlc", "mlc", float(layer), None,
                              summary.mean_mape, summary.std_mape, summary.count))
    return rows


def run_temporal_experiment(grid: TrafficGrid, config: ExperimentConfig) -> list[ResultRow]:
    """Sweep forecaster window sizes and hidden units on sampled cells.

    Per cell: outlier-filter the full series, cut sliding windows, shuffle
    and split 60/40, train, then score MAPE on the held-out windows.  Each
    (window, units) pair reports mean and std over the sampled cells.
    """
    if config.lstm_cells > grid.num_cells:
        raise ValueError("lstm_cells exceeds the number of cells")
    rng = np.random.default_rng(derive_seed(config.seed, "cells"))
    cell_rows = rng.choice(grid.num_cells, size=config.lstm_cells, replace=False)

    rows = []
    for window in config.windows:
        prepared = []
        for cell_row in cell_rows:
            filtered = remove_outliers_zscore(grid.loads[cell_row], config.z_threshold)
            samples = make_windows(filtered, window)
            train_set, test_set = split_train_test(
                samples, 0.6, seed=derive_seed(config.seed, "split", int(cell_row), window)
            )
            prepared.append((cell_row, train_set, test_set))
        for units in config.units:
            errors = []
            for cell_row, train_set, test_set in prepared:
                train_config = replace(
                    config.train, hidden=units,
                    seed=derive_seed(config.seed, "train", int(cell_row), window, units),
                )
                result = lstm.train(train_set, train_config)
                x_test = np.stack([s.inputs for s in test_set])
                y_test = np.array([s.target for s in test_set])
                preds = lstm.predict_batch(result.params, x_test)
                errors.append(mape(y_test, preds))
            summary = EstimationError(tuple(errors))
            rows.append(ResultRow("temporal", "lstm", float(window), float(units),
                                  summary.mean_mape, summary.std_mape, summary.count))
    return rows


def _format_param(value: float | None) -> str:
    if value is None:
        return ""
    if float(value).is_integer():
        return str(int(value))
    return format_float(value)


def write_results_csv(rows: Sequence[ResultRow], destination) -> None:
    """Write summary rows with a fixed header and stable float formatting."""
    if isinstance(destination, (str, os.PathLike)):
        with open(destination, "w", newline="") as handle:
            write_results_csv(rows, handle)
        return
    writer = csv.writer(destination, lineterminator="\n")
    writer.writerow(("experiment", "estimator", "param1", "param2",
                     "mean_mape", "std_mape", "trials"))
    for row in rows:
        writer.writerow((
            row.experiment,
            row.estimator,
            _format_param(row.param1),
            _format_param(row.param2),
            format_float(row.mean_mape),
            format_float(row.std_mape),
            row.trials,
        ))


def _write_table(header: tuple[str, ...], records, destination) -> None:
    if isinstance(destination, (str, os.PathLike)):
        with open(destination, "w", newline="") as handle:
            _write_table(header, records, handle)
        return
    writer = csv.writer(destination, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(records)


def write_fig2_csv(rows: Sequence[ResultRow], destination) -> None:
    """Distance-weighted estimator sweep: exponent x neighbor count."""
    records = [
        (_format_param(r.param1), _format_param(r.param2),
         format_float(r.mean_mape), format_float(r.std_mape), r.trials)
        for r in rows if r.estimator == "idw"
    ]
    _write_table(("exponent", "num_neighbors", "mean_mape", "std_mape", "trials"),
                 records, destination)


def write_fig3_csv(rows: Sequence[ResultRow], destination) -> None:
    """Cluster-estimator sweep: refinement depth."""
    records = [
        (_format_param(r.param1), format_float(r.mean_mape),
         format_float(r.std_mape), r.trials)
        for r in rows if r.estimator == "mlc"
    ]
    _write_table(("layers", "mean_mape", "std_mape", "trials"), records, destination)


def write_fig7_csv(rows: Sequence[ResultRow], destination) -> None:
    """Forecaster sweep: window size x hidden units."""
    records = [
        (_format_param(r.param1), _format_param(r.param2),
         format_float(r.mean_mape), format_float(r.std_mape), r.trials)
        for r in rows if r.estimator == "lstm"
    ]
    _write_table(("window", "units", "mean_mape", "std_mape", "trials"),
                 records, destination)
