"""K-means clustering, elbow-based cluster-count selection, and multi-level
load estimation for sleeping cells.

The multi-level scheme clusters cells by their average day profiles; a
sleeping cell inherits the mean load of the active cells in its cluster at
the slot of interest.  Because the sleeping cell's own entry at that slot is
unknown, it is bootstrapped and then refined: each layer re-clusters with the
previous layer's estimates filled in.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._util import derive_seed
from .data import CellId, TrafficGrid


@dataclass(frozen=True)
class ClusterModel:
    """A fitted k-means partition over a fixed set of cells."""

    ids: np.ndarray
    labels: np.ndarray
    centroids: np.ndarray
    sse: float

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64)
        labels = np.asarray(self.labels, dtype=np.int64)
        centroids = np.asarray(self.centroids, dtype=float)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "centroids", centroids)
        if ids.ndim != 1 or labels.shape != ids.shape:
            raise ValueError("ids and labels must be aligned vectors")
        if centroids.ndim != 2:
            raise ValueError("centroids must be a (num_clusters, dim) matrix")
        if labels.size and (labels.min() < 0 or labels.max() >= centroids.shape[0]):
            raise ValueError("labels must index into centroids")
        if not (self.sse >= 0):
            raise ValueError("sse must be non-negative")

    @property
    def num_clusters(self) -> int:
        return self.centroids.shape[0]

    def members(self, cluster: int) -> np.ndarray:
        return self.ids[self.labels == cluster]

    def assignment(self) -> dict[int, int]:
        return {int(c): int(g) for c, g in zip(self.ids, self.labels)}


def _assign(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # Squared distances to every centroid; ties go to the lowest cluster index.
    d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return d2.argmin(axis=1)


def _plusplus_init(points: np.ndarray, num_clusters: int, rng: np.random.Generator) -> np.ndarray:
    count = points.shape[0]
    centroids = np.empty((num_clusters, points.shape[1]))
    centroids[0] = points[rng.integers(count)]
    closest = ((points - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, num_clusters):
        total = closest.sum()
        if total > 0:
            idx = rng.choice(count, p=closest / total)
        else:
            idx = rng.integers(count)
        centroids[j] = points[idx]
        closest = np.minimum(closest, ((points - centroids[j]) ** 2).sum(axis=1))
    return centroids


def _repair_empty(points: np.ndarray, labels: np.ndarray, centroids: np.ndarray,
                  num_clusters: int) -> np.ndarray:
    # Give each empty cluster the point currently farthest from its own
    # centroid, never draining another cluster below one member.  A steal
    # only happens when it strictly lowers the distortion (the point is off
    # its centroid); this rules out tie-break cycles on duplicated points,
    # which would otherwise rotate coincident centroids forever.
    labels = labels.copy()
    for empty in range(num_clusters):
        counts = np.bincount(labels, minlength=num_clusters)
        if counts[empty] > 0:
            continue
        d2 = ((points - centroids[labels]) ** 2).sum(axis=1)
        d2[counts[labels] <= 1] = -np.inf
        best = int(d2.argmax())
        if d2[best] <= 0:
            continue
        labels[best] = empty
        centroids = _means(points, labels, num_clusters, centroids)
    return labels


def _means(points: np.ndarray, labels: np.ndarray, num_clusters: int,
           fallback: np.ndarray) -> np.ndarray:
    centroids = fallback.copy()
    for g in range(num_clusters):
        mask = labels == g
        if mask.any():
            centroids[g] = points[mask].mean(axis=0)
    return centroids


def _lloyd(points: np.ndarray, labels: np.ndarray, centroids: np.ndarray,
           num_clusters: int, max_iter: int, tol: float
           ) -> tuple[float, np.ndarray, np.ndarray]:
    # Convergence is centroid stability: at shift == 0 the post-repair
    # labels reproduce themselves, which on distinct points is the exact
    # fixed point.  Duplicated points can tie coincident centroids into a
    # label-permutation cycle (rounding dust keeps the shift from ever
    # reaching zero), so repeated label states end the loop too and the
    # best distortion seen wins.
    seen: set[bytes] = set()
    best = None
    for _ in range(max_iter):
        labels = _repair_empty(points, labels, centroids, num_clusters)
        new_centroids = _means(points, labels, num_clusters, centroids)
        shift = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        sse_now = float(((points - centroids[labels]) ** 2).sum())
        if best is None or sse_now < best[0]:
            best = (sse_now, labels.copy(), centroids.copy())
        if shift <= tol:
            break
        key = labels.tobytes()
        if key in seen:
            break
        seen.add(key)
        labels = _assign(points, centroids)
    return best


def _improving_move(points: np.ndarray, labels: np.ndarray,
                    centroids: np.ndarray, counts: np.ndarray
                    ) -> tuple[int, int] | None:
    # Exact distortion change of reassigning one point from its cluster a
    # (n_a members) to cluster b, with both means recomputed:
    # n_b/(n_b+1) * d2(x, c_b) - n_a/(n_a-1) * d2(x, c_a).
    # The most negative move wins; clusters are never drained empty.
    d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    rows = np.arange(points.shape[0])
    own = counts[labels].astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        removal = own / (own - 1.0) * d2[rows, labels]
    delta = counts / (counts + 1.0) * d2 - removal[:, None]
    delta[rows, labels] = np.inf
    delta[own <= 1] = np.inf
    flat = int(delta.argmin())
    row, dest = divmod(flat, delta.shape[1])
    if delta[row, dest] < -1e-12:
        return row, dest
    return None


def kmeans(
    features,
    num_clusters: int,
    seed: int = 0,
    *,
    ids: Sequence[int] | None = None,
    init_centroids: np.ndarray | None = None,
    max_iter: int = 300,
    tol: float = 0.0,
) -> ClusterModel:
    """Alternating reassignment with seeded kmeans++ initialization.

    The reassignment loop runs until the maximum centroid movement is at
    most ``tol`` (the default of zero demands exact assignment stability)
    or ``max_iter`` passes.  Empty clusters are repaired by stealing the
    point farthest from its own centroid.  Nearest-centroid stability alone
    still admits poor partitions, so converged states are polished with
    exact single-point moves (reassign one point, recompute both means)
    until none lowers the distortion.  At convergence every point sits with
    its nearest centroid, every centroid is the mean of its members, and no
    single-point move improves.
    """
    points = np.asarray(features, dtype=float)
    if points.ndim != 2 or points.shape[1] == 0:
        raise ValueError("features must be a (num_points, dim) matrix with dim >= 1")
    if not np.all(np.isfinite(points)):
        raise ValueError("features must be finite")
    count = points.shape[0]
    if not (1 <= num_clusters <= count):
        raise ValueError(f"num_clusters must lie in [1, {count}], got {num_clusters}")
    if ids is None:
        ids = np.arange(count)
    ids = np.asarray(ids, dtype=np.int64)
    if ids.shape != (count,) or np.unique(ids).size != count:
        raise ValueError("ids must be unique and aligned with features")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")

    if init_centroids is not None:
        centroids = np.asarray(init_centroids, dtype=float).copy()
        if centroids.shape != (num_clusters, points.shape[1]):
            raise ValueError("init_centroids has the wrong shape")
    else:
        centroids = _plusplus_init(points, num_clusters, np.random.default_rng(seed))

    labels = _assign(points, centroids)
    sse_value, labels, centroids = _lloyd(points, labels, centroids,
                                          num_clusters, max_iter, tol)

    # Each accepted move strictly lowers the distortion and the loop
    # re-converges after it, so this terminates.
    while num_clusters > 1:
        counts = np.bincount(labels, minlength=num_clusters)
        move = _improving_move(points, labels, centroids, counts)
        if move is None:
            break
        labels = labels.copy()
        labels[move[0]] = move[1]
        centroids = _means(points, labels, num_clusters, centroids)
        sse_value, labels, centroids = _lloyd(points, labels, centroids,
                                              num_clusters, max_iter, tol)

    return ClusterModel(ids=ids, labels=labels, centroids=centroids, sse=sse_value)


def kmeans_best(
    features,
    num_clusters: int,
    seed: int = 0,
    restarts: int = 10,
    *,
    ids: Sequence[int] | None = None,
) -> ClusterModel:
    """Best of ``restarts`` independent seeded runs (lowest distortion wins)."""
    if restarts < 1:
        raise ValueError("restarts must be at least 1")
    best = None
    for r in range(restarts):
        model = kmeans(features, num_clusters, seed=derive_seed(seed, "restart", r), ids=ids)
        if best is None or model.sse < best.sse:
            best = model
    return best


def sse(features, model: ClusterModel) -> float:
    """Within-cluster sum of squared distances for points under ``model``.

    Rows of ``features`` must align with ``model.ids``.
    """
    points = np.asarray(features, dtype=float)
    if points.ndim != 2 or points.shape[0] != model.ids.size:
        raise ValueError("features must align with the model's ids")
    if points.shape[1] != model.centroids.shape[1]:
        raise ValueError("feature dimension does not match the model")
    return float(((points - model.centroids[model.labels]) ** 2).sum())


def sse_curve(
    features,
    cluster_range: tuple[int, int] = (1, 8),
    seed: int = 0,
    restarts: int = 5,
) -> list[tuple[int, float]]:
    """Distortion for every cluster count in the inclusive range.

    Each count gets ``restarts`` seeded runs plus one warm start grown from
    the previous count's winner (its centroids plus the point farthest from
    them), which keeps the curve non-increasing.
    """
    points = np.asarray(features, dtype=float)
    lo, hi = cluster_range
    if lo < 1 or hi < lo:
        raise ValueError("cluster_range must satisfy 1 <= lo <= hi")
    if hi > points.shape[0]:
        raise ValueError("cluster_range exceeds the number of points")
    curve = []
    previous = None
    for g in range(lo, hi + 1):
        candidates = [
            kmeans(points, g, seed=derive_seed(seed, "sse", g, r))
            for r in range(restarts)
        ]
        if previous is not None and previous.num_clusters == g - 1:
            d2 = ((points - previous.centroids[previous.labels]) ** 2).sum(axis=1)
            extra = points[int(d2.argmax())]
            warm = np.vstack([previous.centroids, extra[None, :]])
            candidates.append(kmeans(points, g, init_centroids=warm))
        best = min(candidates, key=lambda m: m.sse)
        curve.append((g, best.sse))
        previous = best
    return curve


def elbow_select(
    features,
    cluster_range: tuple[int, int] = (1, 8),
    seed: int = 0,
    restarts: int = 5,
) -> int:
    """Pick the cluster count at the knee of the distortion curve.

    The knee is the point of maximum perpendicular distance from the chord
    joining the curve's endpoints; ties resolve to the smaller count.
    """
    curve = sse_curve(features, cluster_range, seed, restarts)
    if len(curve) == 1:
        return curve[0][0]
    gs = np.array([g for g, _ in curve], dtype=float)
    errs = np.array([e for _, e in curve], dtype=float)
    dx = gs[-1] - gs[0]
    dy = errs[-1] - errs[0]
    norm = float(np.hypot(dx, dy))
    if norm == 0.0:
        return int(gs[0])
    dist = np.abs(dy * (gs - gs[0]) - dx * (errs - errs[0])) / norm
    return int(gs[int(dist.argmax())])


@dataclass(frozen=True)
class MlcConfig:
    """Settings for multi-level cluster estimation.

    ``num_clusters`` may be a fixed count or ``"auto"`` to run elbow
    selection (over ``elbow_range``) on the first layer's features.
    ``slot_fill`` seeds the withheld slot entry of sleeping cells before the
    first layer: the mean of the active cells' values at that slot
    (``"active-mean"``) or ``"zero"``.
    """

    max_layers: int = 7
    num_clusters: int | str = "auto"
    elbow_range: tuple[int, int] = (1, 8)
    slot_fill: str = "active-mean"
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.max_layers, int) or self.max_layers < 1:
            raise ValueError("max_layers must be a positive integer")
        if isinstance(self.num_clusters, str):
            if self.num_clusters != "auto":
                raise ValueError('num_clusters must be a positive integer or "auto"')
        elif not isinstance(self.num_clusters, int) or self.num_clusters < 1:
            raise ValueError('num_clusters must be a positive integer or "auto"')
        if self.slot_fill not in ("active-mean", "zero"):
            raise ValueError('slot_fill must be "active-mean" or "zero"')
        lo, hi = self.elbow_range
        if lo < 1 or hi < lo:
            raise ValueError("elbow_range must satisfy 1 <= lo <= hi")


@dataclass(frozen=True)
class MlcTraceRow:
    """One sleeping cell's state after one refinement layer."""

    cell_id: CellId
    layer: int
    cluster: int
    estimate: float


def mlc_estimate_traced(
    grid: TrafficGrid,
    sleeping: Sequence[CellId],
    slot: int,
    config: MlcConfig = MlcConfig(),
) -> tuple[dict[CellId, float], list[MlcTraceRow]]:
    """Multi-level clustering estimates plus the per-layer refinement trace.

    Cells are clustered on their average day profiles with the sleeping
    cells' entry at ``slot`` replaced by the fill value.  After each layer a
    sleeping cell's estimate becomes the mean of the true slot loads of the
    active cells sharing its cluster, and that estimate replaces its filled
    entry before the next layer.  A cluster holding no active cell falls back
    to the overall active mean (with a warning).  Layers are idempotent once
    the estimates stop changing.
    """
    if not (0 <= slot < grid.slots_per_day):
        raise ValueError(f"slot {slot} out of range [0, {grid.slots_per_day})")
    sleep_rows = [grid.index_of(c) for c in sleeping]
    if len(set(sleep_rows)) != len(sleep_rows):
        raise ValueError("sleeping cells must be unique")
    if len(sleep_rows) >= grid.num_cells:
        raise ValueError("at least one cell must remain active")

    profiles = grid.day_profiles()
    active_mask = np.ones(grid.num_cells, dtype=bool)
    active_mask[sleep_rows] = False
    active_slot_mean = float(profiles[active_mask, slot].mean())

    clusters = config.num_clusters
    features = profiles.copy()
    fill = 0.0 if config.slot_fill == "zero" else active_slot_mean
    features[sleep_rows, slot] = fill

    if clusters == "auto":
        lo, hi = config.elbow_range
        hi = min(hi, grid.num_cells)
        clusters = elbow_select(features, (lo, hi), seed=derive_seed(config.seed, "elbow"))
    if clusters > int(active_mask.sum()):
        raise ValueError(
            f"num_clusters={clusters} exceeds the {int(active_mask.sum())} active cells"
        )

    estimates: dict[CellId, float] = {}
    trace: list[MlcTraceRow] = []
    layer_seed = derive_seed(config.seed, "kmeans")
    for layer in range(1, config.max_layers + 1):
        model = kmeans(features, clusters, seed=layer_seed, ids=grid.ids)
        for row in sleep_rows:
            cluster = int(model.labels[row])
            member_mask = (model.labels == cluster) & active_mask
            if member_mask.any():
                value = float(profiles[member_mask, slot].mean())
            else:
                value = active_slot_mean
                warnings.warn(
                    f"cluster {cluster} has no active cell at layer {layer}; "
                    "falling back to the overall active mean"
                )
            cid = int(grid.ids[row])
            estimates[cid] = value
            features[row, slot] = value
            trace.append(MlcTraceRow(cid, layer, cluster, value))
    return estimates, trace


def mlc_estimate(
    grid: TrafficGrid,
    sleeping: Sequence[CellId],
    slot: int,
    config: MlcConfig = MlcConfig(),
) -> dict[CellId, float]:
    """Final-layer multi-level clustering estimates for the sleeping cells."""
    estimates, _ = mlc_estimate_traced(grid, sleeping, slot, config)
    return estimates
