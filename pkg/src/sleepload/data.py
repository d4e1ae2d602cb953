"""Traffic data handling for small-cell networks.

Covers the full preprocessing pipeline: CDR-style CSV ingestion, activity
aggregation, peak normalization, average day profiles, z-score outlier
filtering, sliding-window extraction, and train/test splitting.  Also ships
two seeded synthetic generators (a spatially correlated field and a
clustered-profile variant) used by the experiment harnesses and the CLI.

Loads are dimensionless utilization values.  Raw ingested activity counts
are arbitrary non-negative numbers; after :func:`normalize_loads` every
value lies in [0, 1] with the network-wide peak mapped to 1.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from ._util import format_float

CellId = int

DEFAULT_SLOTS_PER_DAY = 144
DEFAULT_SLOT_MINUTES = 10.0
DEFAULT_CELL_SIZE = 235.0

ACTIVITY_COLUMNS = ("cell_id", "slot", "calls", "texts", "internet")
LOAD_COLUMNS = ("cell_id", "slot", "load")


class IngestError(ValueError):
    """Raised when a CDR stream cannot be parsed into a traffic grid."""


def aggregate_activities(calls: float, texts: float, internet: float) -> float:
    """Combine per-slot activity counts into one load figure (plain sum).

    All three activity types contribute equally; weighting the mix is left
    to callers that need it.
    """
    total = 0.0
    for name, value in (("calls", calls), ("texts", texts), ("internet", internet)):
        value = float(value)
        if not math.isfinite(value) or value < 0:
            raise ValueError(f"{name} must be finite and non-negative, got {value}")
        total += value
    return total


@dataclass(frozen=True)
class TrafficSeries:
    """A single cell's load over consecutive slots spanning whole days."""

    values: np.ndarray
    slot_duration: float = DEFAULT_SLOT_MINUTES
    slots_per_day: int = DEFAULT_SLOTS_PER_DAY

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if values.ndim != 1:
            raise ValueError("series values must be one-dimensional")
        if not isinstance(self.slots_per_day, int) or self.slots_per_day < 1:
            raise ValueError("slots_per_day must be a positive integer")
        if not (self.slot_duration > 0):
            raise ValueError("slot_duration must be positive")
        if values.size == 0 or values.size % self.slots_per_day != 0:
            raise ValueError(
                f"series length {values.size} is not a positive multiple of "
                f"slots_per_day={self.slots_per_day}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("loads must be finite")
        if np.any(values < 0):
            raise ValueError("loads must be non-negative")

    @property
    def num_days(self) -> int:
        return self.values.size // self.slots_per_day

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class CellRecord:
    """One cell: identifier, planar position in meters, and its series."""

    cell_id: CellId
    position: tuple[float, float]
    series: TrafficSeries


class TrafficGrid:
    """Positioned cells with aligned per-slot load rows.

    Rows of ``loads`` follow ``ids`` (kept sorted ascending).  Positions are
    planar coordinates in meters.  Construction validates shapes, uniqueness,
    finiteness, non-negativity, and that the slot count spans whole days.
    """

    def __init__(
        self,
        ids: Sequence[int],
        positions: Sequence[Sequence[float]],
        loads: Sequence[Sequence[float]],
        *,
        slots_per_day: int = DEFAULT_SLOTS_PER_DAY,
        slot_duration: float = DEFAULT_SLOT_MINUTES,
    ):
        ids_arr = np.asarray(ids, dtype=np.int64)
        pos_arr = np.asarray(positions, dtype=float)
        loads_arr = np.asarray(loads, dtype=float)
        if ids_arr.ndim != 1 or ids_arr.size == 0:
            raise ValueError("ids must be a non-empty one-dimensional sequence")
        if np.unique(ids_arr).size != ids_arr.size:
            raise ValueError("cell ids must be unique")
        if pos_arr.shape != (ids_arr.size, 2):
            raise ValueError("positions must have shape (num_cells, 2)")
        if not np.all(np.isfinite(pos_arr)):
            raise ValueError("positions must be finite")
        if loads_arr.ndim != 2 or loads_arr.shape[0] != ids_arr.size:
            raise ValueError("loads must have shape (num_cells, num_slots)")
        if not isinstance(slots_per_day, int) or slots_per_day < 1:
            raise ValueError("slots_per_day must be a positive integer")
        if not (slot_duration > 0):
            raise ValueError("slot_duration must be positive")
        if loads_arr.shape[1] == 0 or loads_arr.shape[1] % slots_per_day != 0:
            raise ValueError(
                f"slot count {loads_arr.shape[1]} is not a positive multiple "
                f"of slots_per_day={slots_per_day}"
            )
        if not np.all(np.isfinite(loads_arr)):
            raise ValueError("loads must be finite")
        if np.any(loads_arr < 0):
            raise ValueError("loads must be non-negative")

        order = np.argsort(ids_arr)
        self._ids = ids_arr[order].copy()
        self._positions = pos_arr[order].copy()
        self._loads = loads_arr[order].copy()
        for arr in (self._ids, self._positions, self._loads):
            arr.setflags(write=False)
        self._slots_per_day = slots_per_day
        self._slot_duration = float(slot_duration)
        self._index = {int(cid): row for row, cid in enumerate(self._ids)}

    @property
    def ids(self) -> np.ndarray:
        return self._ids

    @property
    def positions(self) -> np.ndarray:
        return self._positions

    @property
    def loads(self) -> np.ndarray:
        return self._loads

    @property
    def slots_per_day(self) -> int:
        return self._slots_per_day

    @property
    def slot_duration(self) -> float:
        return self._slot_duration

    @property
    def num_cells(self) -> int:
        return self._ids.size

    @property
    def num_slots(self) -> int:
        return self._loads.shape[1]

    @property
    def num_days(self) -> int:
        return self.num_slots // self._slots_per_day

    def __len__(self) -> int:
        return self.num_cells

    def index_of(self, cell_id: CellId) -> int:
        try:
            return self._index[int(cell_id)]
        except KeyError:
            raise ValueError(f"unknown cell id {cell_id}") from None

    def series(self, cell_id: CellId) -> TrafficSeries:
        row = self._loads[self.index_of(cell_id)]
        return TrafficSeries(row, self._slot_duration, self._slots_per_day)

    def record(self, cell_id: CellId) -> CellRecord:
        row = self.index_of(cell_id)
        x, y = self._positions[row]
        return CellRecord(int(self._ids[row]), (float(x), float(y)), self.series(cell_id))

    def records(self) -> Iterator[CellRecord]:
        for cid in self._ids:
            yield self.record(int(cid))

    def day_profiles(self) -> np.ndarray:
        """Per-cell average day: (num_cells, slots_per_day), mean over days."""
        shaped = self._loads.reshape(self.num_cells, self.num_days, self._slots_per_day)
        return shaped.mean(axis=1)

    def profile(self, cell_id: CellId) -> np.ndarray:
        row = self._loads[self.index_of(cell_id)]
        return row.reshape(self.num_days, self._slots_per_day).mean(axis=0)

    def with_loads(self, loads: np.ndarray) -> "TrafficGrid":
        """Same cells and geometry, different load matrix."""
        return TrafficGrid(
            self._ids,
            self._positions,
            loads,
            slots_per_day=self._slots_per_day,
            slot_duration=self._slot_duration,
        )


def lattice_positions(num_cells: int, grid_side: int, cell_size: float) -> np.ndarray:
    """Row-major cell-center coordinates on a square lattice."""
    if grid_side < 1 or num_cells > grid_side * grid_side:
        raise ValueError("grid_side too small for the number of cells")
    if not (cell_size > 0):
        raise ValueError("cell_size must be positive")
    idx = np.arange(num_cells)
    cols = idx % grid_side
    rows = idx // grid_side
    return np.column_stack((cols * cell_size, rows * cell_size)).astype(float)


def _resolve_columns(header: list[str]) -> tuple[str, dict[str, int]]:
    names = [h.strip() for h in header]
    lookup = {name: i for i, name in enumerate(names)}
    for schema, columns in (("activity", ACTIVITY_COLUMNS), ("load", LOAD_COLUMNS)):
        if all(c in lookup for c in columns):
            return schema, {c: lookup[c] for c in columns}
    raise IngestError(
        f"line 1: header {names!r} matches neither "
        f"{list(ACTIVITY_COLUMNS)} nor {list(LOAD_COLUMNS)}"
    )


def _parse_int(text: str, line: int, column: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise IngestError(f"line {line}: {column} must be an integer, got {text!r}") from None
    if value < 0:
        raise IngestError(f"line {line}: {column} must be non-negative, got {value}")
    return value


def _parse_value(text: str, line: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise IngestError(f"line {line}: {column} must be numeric, got {text!r}") from None
    if not math.isfinite(value) or value < 0:
        raise IngestError(f"line {line}: {column} must be finite and non-negative, got {text!r}")
    return value


def ingest_cdr(
    source,
    *,
    grid_side: int | None = None,
    cell_size: float = DEFAULT_CELL_SIZE,
    slots_per_day: int = DEFAULT_SLOTS_PER_DAY,
    slot_duration: float = DEFAULT_SLOT_MINUTES,
) -> TrafficGrid:
    """Parse a CDR CSV stream or path into a :class:`TrafficGrid`.

    Two headers are accepted: ``cell_id,slot,calls,texts,internet`` (activity
    counts, summed per row and accumulated across rows for the same cell and
    slot) and ``cell_id,slot,load`` (pre-aggregated; conflicting duplicate
    values for one cell/slot are an error).  Slots missing from the input are
    zero, and every series is padded with zeros to a whole number of days.

    Cells are placed on a row-major square lattice by id.  When ``grid_side``
    is omitted it is the smallest side that fits the largest id.

    Raises :class:`IngestError` with a 1-based line number on malformed input.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", newline="") as handle:
            return ingest_cdr(
                handle,
                grid_side=grid_side,
                cell_size=cell_size,
                slots_per_day=slots_per_day,
                slot_duration=slot_duration,
            )
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    if isinstance(source, str):
        source = io.StringIO(source)

    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise IngestError("line 1: empty input, expected a header row") from None
    schema, cols = _resolve_columns(header)
    width = len(header)

    accum: dict[tuple[int, int], float] = {}
    max_slot = -1
    for row in reader:
        line = reader.line_num
        if not row or (len(row) == 1 and row[0].strip() == ""):
            continue
        if len(row) != width:
            raise IngestError(f"line {line}: expected {width} fields, got {len(row)}")
        cell = _parse_int(row[cols["cell_id"]], line, "cell_id")
        slot = _parse_int(row[cols["slot"]], line, "slot")
        if schema == "activity":
            value = aggregate_activities(
                _parse_value(row[cols["calls"]], line, "calls"),
                _parse_value(row[cols["texts"]], line, "texts"),
                _parse_value(row[cols["internet"]], line, "internet"),
            )
            accum[(cell, slot)] = accum.get((cell, slot), 0.0) + value
        else:
            value = _parse_value(row[cols["load"]], line, "load")
            previous = accum.get((cell, slot))
            if previous is not None and previous != value:
                raise IngestError(
                    f"line {line}: conflicting load for cell {cell} slot {slot}: "
                    f"{previous} vs {value}"
                )
            accum[(cell, slot)] = value
        max_slot = max(max_slot, slot)

    if not accum:
        raise IngestError("line 1: no data rows after the header")

    ids = sorted({cell for cell, _ in accum})
    num_days = max_slot // slots_per_day + 1
    num_slots = num_days * slots_per_day
    loads = np.zeros((len(ids), num_slots))
    row_of = {cid: i for i, cid in enumerate(ids)}
    for (cell, slot), value in accum.items():
        loads[row_of[cell], slot] = value

    side = grid_side if grid_side is not None else max(1, math.isqrt(max(ids)) + 1)
    if max(ids) >= side * side:
        raise IngestError(f"grid_side {side} cannot place cell id {max(ids)}")
    all_positions = lattice_positions(side * side, side, cell_size)
    positions = all_positions[np.asarray(ids)]

    return TrafficGrid(
        ids, positions, loads, slots_per_day=slots_per_day, slot_duration=slot_duration
    )


def normalize_loads(grid: TrafficGrid) -> TrafficGrid:
    """Scale all loads by the network-wide peak so values lie in [0, 1]."""
    peak = float(grid.loads.max())
    if peak <= 0:
        raise ValueError("cannot normalize an all-zero grid")
    return grid.with_loads(grid.loads / peak)


def average_day_profile(series, slots_per_day: int | None = None) -> np.ndarray:
    """Mean load per day slot, averaged over the days a series covers."""
    if isinstance(series, TrafficSeries):
        values = series.values
        slots_per_day = series.slots_per_day
    else:
        values = np.asarray(series, dtype=float)
        if slots_per_day is None:
            raise ValueError("slots_per_day is required for a bare array")
    if values.ndim != 1 or values.size == 0 or values.size % slots_per_day != 0:
        raise ValueError("series length must be a positive multiple of slots_per_day")
    return values.reshape(-1, slots_per_day).mean(axis=0)


def remove_outliers_zscore(series, threshold: float = 2.5) -> np.ndarray:
    """Drop values whose population z-score exceeds ``threshold``.

    Returns the surviving values in their original order.  A constant series
    comes back unchanged (zero standard deviation means no outliers).
    """
    values = series.values if isinstance(series, TrafficSeries) else np.asarray(series, dtype=float)
    if values.ndim != 1:
        raise ValueError("series must be one-dimensional")
    if values.size < 2:
        raise ValueError("need at least two values to score outliers")
    if not (threshold > 0):
        raise ValueError("threshold must be positive")
    std = float(values.std())
    if std == 0.0:
        return values.copy()
    scores = np.abs(values - values.mean()) / std
    return values[scores <= threshold].copy()


@dataclass(frozen=True)
class WindowSample:
    """A training pair: ``window_size`` consecutive loads and the next one."""

    inputs: np.ndarray
    target: float

    def __post_init__(self):
        inputs = np.array(self.inputs, dtype=float, copy=True)
        inputs.setflags(write=False)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "target", float(self.target))
        if inputs.ndim != 1 or inputs.size == 0:
            raise ValueError("window inputs must be a non-empty vector")
        if not np.all(np.isfinite(inputs)) or not math.isfinite(self.target):
            raise ValueError("window values must be finite")

    @property
    def window_size(self) -> int:
        return self.inputs.size


def make_windows(series, window_size: int) -> list[WindowSample]:
    """Slide a window over the series; each position predicts the next value."""
    values = series.values if isinstance(series, TrafficSeries) else np.asarray(series, dtype=float)
    if not isinstance(window_size, int) or window_size < 1:
        raise ValueError("window_size must be a positive integer")
    count = values.size - window_size
    if count < 1:
        raise ValueError(
            f"series of length {values.size} is too short for window_size={window_size}"
        )
    return [
        WindowSample(values[k : k + window_size], float(values[k + window_size]))
        for k in range(count)
    ]


def split_train_test(
    samples: Sequence[WindowSample],
    train_fraction: float = 0.6,
    seed: int = 0,
) -> tuple[list[WindowSample], list[WindowSample]]:
    """Shuffle samples with a seeded permutation and split by fraction.

    Both sides of the split are always non-empty.
    """
    if not (0.0 < train_fraction < 1.0):
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    total = len(samples)
    if total < 2:
        raise ValueError("need at least two samples to split")
    perm = np.random.default_rng(seed).permutation(total)
    cut = int(total * train_fraction)
    cut = min(max(cut, 1), total - 1)
    train = [samples[i] for i in perm[:cut]]
    test = [samples[i] for i in perm[cut:]]
    return train, test


@dataclass(frozen=True)
class SyntheticConfig:
    """Knobs for the spatially correlated synthetic traffic field.

    Every cell shares a diurnal base curve; on top of it sits a smooth
    spatially correlated component (correlation falling off with distance
    over ``corr_length`` meters, scaled by ``field_std``) plus independent
    per-sample noise.  Loads are clipped to [0, 1].
    """

    grid_side: int = 20
    cell_size: float = DEFAULT_CELL_SIZE
    num_days: int = 7
    slots_per_day: int = DEFAULT_SLOTS_PER_DAY
    slot_duration: float = DEFAULT_SLOT_MINUTES
    corr_length: float = 2.0 * DEFAULT_CELL_SIZE
    noise_std: float = 0.05
    field_std: float = 0.2
    base_offset: float = 0.45
    base_amplitudes: tuple[float, ...] = (0.25, 0.1)
    seed: int = 0

    def __post_init__(self):
        if self.grid_side < 1:
            raise ValueError("grid_side must be at least 1")
        if self.num_days < 1:
            raise ValueError("num_days must be at least 1")
        if self.slots_per_day < 1:
            raise ValueError("slots_per_day must be at least 1")
        if not (self.cell_size > 0) or not (self.corr_length > 0):
            raise ValueError("cell_size and corr_length must be positive")
        if self.noise_std < 0 or self.field_std < 0:
            raise ValueError("noise_std and field_std must be non-negative")


def _diurnal_base(cfg: SyntheticConfig) -> np.ndarray:
    slots = np.arange(cfg.num_days * cfg.slots_per_day) % cfg.slots_per_day
    base = np.full(slots.shape, cfg.base_offset, dtype=float)
    for k, amp in enumerate(cfg.base_amplitudes, start=1):
        base += amp * np.sin(2.0 * np.pi * k * slots / cfg.slots_per_day)
    return base


def generate_synthetic(cfg: SyntheticConfig) -> TrafficGrid:
    """Seeded synthetic grid: shared day shape + correlated field + noise.

    The correlated component is built by smoothing an iid normal panel with
    a row-normalized exponential distance kernel, so nearby cells receive
    nearly identical fields and the correlation decays with distance.  The
    same seed always reproduces the grid bit for bit.
    """
    rng = np.random.default_rng(cfg.seed)
    num_cells = cfg.grid_side * cfg.grid_side
    num_slots = cfg.num_days * cfg.slots_per_day
    positions = lattice_positions(num_cells, cfg.grid_side, cfg.cell_size)

    base = _diurnal_base(cfg)
    diff = positions[:, None, :] - positions[None, :, :]
    dists = np.sqrt((diff * diff).sum(axis=2))
    kernel = np.exp(-dists / cfg.corr_length)
    kernel /= np.linalg.norm(kernel, axis=1, keepdims=True)

    field = cfg.field_std * (kernel @ rng.standard_normal((num_cells, num_slots)))
    loads = base[None, :] + field
    if cfg.noise_std > 0:
        loads = loads + cfg.noise_std * rng.standard_normal((num_cells, num_slots))
    loads = np.clip(loads, 0.0, 1.0)

    return TrafficGrid(
        np.arange(num_cells),
        positions,
        loads,
        slots_per_day=cfg.slots_per_day,
        slot_duration=cfg.slot_duration,
    )


@dataclass(frozen=True)
class ClusteredConfig:
    """Knobs for synthetic traffic with planted profile clusters.

    Cells are assigned round-robin to ``num_clusters`` groups (order
    shuffled by seed); each group follows its own sinusoidal day profile
    with a distinct mean level and phase.
    """

    grid_side: int = 8
    cell_size: float = DEFAULT_CELL_SIZE
    num_days: int = 3
    slots_per_day: int = DEFAULT_SLOTS_PER_DAY
    slot_duration: float = DEFAULT_SLOT_MINUTES
    num_clusters: int = 3
    level_spread: float = 0.3
    amplitude: float = 0.15
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.grid_side < 1 or self.num_days < 1 or self.slots_per_day < 1:
            raise ValueError("grid_side, num_days and slots_per_day must be positive")
        if not (self.cell_size > 0):
            raise ValueError("cell_size must be positive")
        if self.num_clusters < 1 or self.num_clusters > self.grid_side**2:
            raise ValueError("num_clusters must be in [1, num_cells]")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")


def generate_clustered(cfg: ClusteredConfig) -> tuple[TrafficGrid, np.ndarray]:
    """Seeded grid with planted clusters; returns (grid, true labels)."""
    rng = np.random.default_rng(cfg.seed)
    num_cells = cfg.grid_side * cfg.grid_side
    num_slots = cfg.num_days * cfg.slots_per_day
    positions = lattice_positions(num_cells, cfg.grid_side, cfg.cell_size)

    labels = np.arange(num_cells) % cfg.num_clusters
    rng.shuffle(labels)

    slots = np.arange(cfg.slots_per_day)
    centered = np.arange(cfg.num_clusters) - (cfg.num_clusters - 1) / 2.0
    levels = 0.5 + centered * cfg.level_spread
    loads = np.empty((num_cells, num_slots))
    for g in range(cfg.num_clusters):
        phase = 2.0 * np.pi * g / cfg.num_clusters
        profile = levels[g] + cfg.amplitude * np.sin(2.0 * np.pi * slots / cfg.slots_per_day + phase)
        loads[labels == g] = np.tile(profile, cfg.num_days)
    if cfg.noise_std > 0:
        loads = loads + cfg.noise_std * rng.standard_normal((num_cells, num_slots))
    loads = np.clip(loads, 0.0, 1.0)

    grid = TrafficGrid(
        np.arange(num_cells),
        positions,
        loads,
        slots_per_day=cfg.slots_per_day,
        slot_duration=cfg.slot_duration,
    )
    return grid, labels


def write_cdr_csv(grid: TrafficGrid, destination) -> None:
    """Write a grid in the ``cell_id,slot,load`` schema (deterministic bytes)."""
    if isinstance(destination, (str, os.PathLike)):
        with open(destination, "w", newline="") as handle:
            write_cdr_csv(grid, handle)
        return
    writer = csv.writer(destination, lineterminator="\n")
    writer.writerow(LOAD_COLUMNS)
    for row, cid in enumerate(grid.ids):
        for slot in range(grid.num_slots):
            writer.writerow((int(cid), slot, format_float(grid.loads[row, slot])))
