"""Spatial load estimators for sleeping cells.

A sleeping cell reports no traffic, so its load is reconstructed from the
loads of active cells at the same time slot.  Two ingredients vary: how the
contributing cells are picked (nearest-by-distance or uniformly at random)
and how their loads are combined (plain mean or inverse-distance weighting).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import CellId, TrafficGrid


@dataclass(frozen=True)
class NeighborSet:
    """Active cells contributing to one sleeping cell's estimate.

    Distances are strictly positive (the target never appears among its own
    neighbors) and loads are normalized utilizations in [0, 1].
    """

    target: CellId
    ids: np.ndarray
    distances: np.ndarray
    loads: np.ndarray

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64)
        distances = np.asarray(self.distances, dtype=float)
        loads = np.asarray(self.loads, dtype=float)
        for name, arr in (("ids", ids), ("distances", distances), ("loads", loads)):
            object.__setattr__(self, name, arr)
            if arr.ndim != 1:
                raise ValueError(f"{name} must be one-dimensional")
        if ids.size == 0:
            raise ValueError("neighbor set must not be empty")
        if not (distances.size == ids.size == loads.size):
            raise ValueError("ids, distances and loads must have equal length")
        if np.unique(ids).size != ids.size:
            raise ValueError("neighbor ids must be unique")
        if int(self.target) in set(int(i) for i in ids):
            raise ValueError("target cell cannot be its own neighbor")
        if not np.all(np.isfinite(distances)) or np.any(distances <= 0):
            raise ValueError("distances must be finite and strictly positive")
        if not np.all(np.isfinite(loads)) or np.any(loads < 0) or np.any(loads > 1):
            raise ValueError("neighbor loads must lie in [0, 1]")

    @property
    def count(self) -> int:
        return self.ids.size

    @property
    def d_max(self) -> float:
        return float(self.distances.max())


def _candidate_rows(grid: TrafficGrid, target: CellId, exclude: Sequence[CellId]) -> np.ndarray:
    target_row = grid.index_of(target)
    banned = {target_row}
    for cid in exclude:
        banned.add(grid.index_of(cid))
    rows = np.array([r for r in range(grid.num_cells) if r not in banned], dtype=int)
    return rows


def nearest_neighbors(
    grid: TrafficGrid,
    target: CellId,
    count: int,
    exclude: Sequence[CellId] = (),
) -> tuple[np.ndarray, np.ndarray]:
    """The ``count`` closest eligible cells to the target.

    Returns (ids, distances) ordered by ascending distance, ties broken by
    ascending cell id.  Cells listed in ``exclude`` (other sleeping cells,
    typically) never qualify.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    rows = _candidate_rows(grid, target, exclude)
    if count > rows.size:
        raise ValueError(f"requested {count} neighbors but only {rows.size} cells are eligible")
    pos = grid.positions[grid.index_of(target)]
    delta = grid.positions[rows] - pos
    dists = np.hypot(delta[:, 0], delta[:, 1])
    order = np.lexsort((grid.ids[rows], dists))[:count]
    return grid.ids[rows][order].copy(), dists[order].copy()


def random_neighbors(
    grid: TrafficGrid,
    target: CellId,
    count: int,
    seed: int = 0,
    exclude: Sequence[CellId] = (),
) -> tuple[np.ndarray, np.ndarray]:
    """A seeded uniform draw of ``count`` eligible cells (without replacement)."""
    if count < 1:
        raise ValueError("count must be at least 1")
    rows = _candidate_rows(grid, target, exclude)
    if count > rows.size:
        raise ValueError(f"requested {count} neighbors but only {rows.size} cells are eligible")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(rows, size=count, replace=False)
    pos = grid.positions[grid.index_of(target)]
    delta = grid.positions[chosen] - pos
    dists = np.hypot(delta[:, 0], delta[:, 1])
    return grid.ids[chosen].copy(), dists


def _neighbor_set(grid: TrafficGrid, target: CellId, ids: np.ndarray,
                  distances: np.ndarray, slot: int) -> NeighborSet:
    if not (0 <= slot < grid.num_slots):
        raise ValueError(f"slot {slot} out of range [0, {grid.num_slots})")
    rows = np.array([grid.index_of(int(i)) for i in ids], dtype=int)
    return NeighborSet(int(target), ids, distances, grid.loads[rows, slot])


def select_nearest(grid: TrafficGrid, target: CellId, count: int, slot: int,
                   exclude: Sequence[CellId] = ()) -> NeighborSet:
    """Nearest-neighbor selection with loads read at ``slot``."""
    ids, dists = nearest_neighbors(grid, target, count, exclude)
    return _neighbor_set(grid, target, ids, dists, slot)


def select_random(grid: TrafficGrid, target: CellId, count: int, slot: int,
                  seed: int = 0, exclude: Sequence[CellId] = ()) -> NeighborSet:
    """Seeded random selection with loads read at ``slot``."""
    ids, dists = random_neighbors(grid, target, count, seed, exclude)
    return _neighbor_set(grid, target, ids, dists, slot)


def estimate_unweighted_mean(neighbors: NeighborSet) -> float:
    """Plain average of the neighbor loads."""
    return float(neighbors.loads.mean())


def weight_factor(distance: float, d_max: float, exponent: float) -> float:
    """Distance weight d_max / d**n: closer neighbors weigh more.

    The common d_max numerator cancels in the normalized estimate; it is kept
    here so individual weights are comparable across a neighbor set.
    """
    if not (distance > 0) or not math.isfinite(distance):
        raise ValueError("distance must be finite and positive")
    if not (d_max > 0) or not math.isfinite(d_max):
        raise ValueError("d_max must be finite and positive")
    if not (exponent > 0):
        raise ValueError("exponent must be positive")
    return d_max / distance**exponent


def _normalized_weights(distances: np.ndarray, exponent: float) -> np.ndarray:
    # Weights are computed relative to the closest neighbor so huge exponents
    # cannot overflow; the rescaling cancels in the weighted mean.
    if not (exponent > 0):
        raise ValueError("exponent must be positive")
    ratio = distances / distances.min()
    weights = ratio**-exponent
    return weights / weights.sum()


def estimate_distance_weighted(neighbors: NeighborSet, exponent: float) -> float:
    """Inverse-distance-weighted average of the neighbor loads.

    Equivalent to weighting each load by ``weight_factor(d, d_max, n)`` and
    normalizing, but stable for any exponent.  As the exponent grows the
    estimate approaches the closest neighbor's load.
    """
    weights = _normalized_weights(neighbors.distances, exponent)
    return float(weights @ neighbors.loads)


def estimate_nearest_mean(grid: TrafficGrid, target: CellId, count: int, slot: int,
                          exclude: Sequence[CellId] = ()) -> float:
    """Unweighted mean over the nearest active cells."""
    return estimate_unweighted_mean(select_nearest(grid, target, count, slot, exclude))


def estimate_random_mean(grid: TrafficGrid, target: CellId, count: int, slot: int,
                         seed: int = 0, exclude: Sequence[CellId] = ()) -> float:
    """Unweighted mean over randomly drawn cells (baseline)."""
    return estimate_unweighted_mean(select_random(grid, target, count, slot, seed, exclude))


def estimate_random_weighted(grid: TrafficGrid, target: CellId, count: int,
                             exponent: float, slot: int, seed: int = 0,
                             exclude: Sequence[CellId] = ()) -> float:
    """Distance-weighted mean over randomly drawn cells (baseline)."""
    return estimate_distance_weighted(
        select_random(grid, target, count, slot, seed, exclude), exponent
    )
