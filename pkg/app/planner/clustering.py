"""K-means over traffic flows and per-cluster representation vectors.

Vehicles are clustered on z-score normalised (he, wi, wt) with k-means++
seeding; representation vectors are taken on the raw values.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from app.core.logging_utils import log_event
from app.planner.datagen import TrafficFlow
from app.planner.errors import InvalidParam
from app.planner.model import RestrictionTriple, Vehicle
from app.planner.partitioner import CellDecomposition

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class VehicleCluster:
    members: tuple[Vehicle, ...]

    def __post_init__(self) -> None:
        if not self.members:
            raise InvalidParam("a vehicle cluster cannot be empty")

    def __len__(self) -> int:
        return len(self.members)


@dataclass(frozen=True, order=True)
class RepresentationVector:
    """Componentwise maximum of a cluster; dominates every member."""

    he: float
    wi: float
    wt: float

    def as_triple(self) -> RestrictionTriple:
        return RestrictionTriple(self.he, self.wi, self.wt)


@dataclass(frozen=True)
class KMeansResult:
    clusters: tuple[VehicleCluster, ...]
    centroids: np.ndarray
    inertia_history: tuple[float, ...]
    iterations: int


def _as_matrix(vehicles: Sequence[Vehicle]) -> np.ndarray:
    return np.asarray([v.as_tuple() for v in vehicles], dtype=float).reshape(-1, 3)


def _zscore(x: np.ndarray) -> np.ndarray:
    std = x.std(axis=0)
    std[std == 0] = 1.0
    return (x - x.mean(axis=0)) / std


def _kmeans_plusplus(z: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = z.shape[0]
    centroids = [z[int(rng.integers(0, n))]]
    closest = ((z - centroids[0]) ** 2).sum(axis=1)
    while len(centroids) < k:
        total = closest.sum()
        if total <= 0:
            break
        idx = int(rng.choice(n, p=closest / total))
        centroids.append(z[idx])
        closest = np.minimum(closest, ((z - z[idx]) ** 2).sum(axis=1))
    return np.asarray(centroids)


def fit_kmeans(
    vehicles: Sequence[Vehicle],
    k: int,
    seed: int = 0,
    max_iters: int = 100,
) -> KMeansResult:
    """Lloyd iterations until assignments stop changing or ``max_iters`` is reached."""
    if k < 1:
        raise InvalidParam("K must be >= 1")
    if not vehicles:
        raise InvalidParam("cannot cluster an empty vehicle list")
    raw = _as_matrix(vehicles)
    z = _zscore(raw)
    k = min(k, len(np.unique(z, axis=0)))
    rng = np.random.default_rng(seed)
    centroids = _kmeans_plusplus(z, k, rng)

    labels: np.ndarray | None = None
    history: list[float] = []
    iterations = 0
    for iterations in range(1, max_iters + 1):
        d2 = ((z[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        assigned = d2.argmin(axis=1)
        history.append(float(d2[np.arange(len(z)), assigned].sum()))
        if labels is not None and np.array_equal(assigned, labels):
            break
        labels = assigned
        for j in range(len(centroids)):
            mask = labels == j
            if mask.any():
                centroids[j] = z[mask].mean(axis=0)
    assert labels is not None

    clusters = []
    for j in range(len(centroids)):
        idx = np.flatnonzero(labels == j)
        if idx.size:
            clusters.append(VehicleCluster(tuple(vehicles[i] for i in idx.tolist())))
    return KMeansResult(tuple(clusters), centroids, tuple(history), iterations)


def kmeans(
    vehicles: Sequence[Vehicle],
    k: int,
    seed: int = 0,
    max_iters: int = 100,
) -> list[VehicleCluster]:
    return list(fit_kmeans(vehicles, k, seed, max_iters).clusters)


def representation_vector(cluster: VehicleCluster) -> RepresentationVector:
    m = _as_matrix(cluster.members).max(axis=0).tolist()
    return RepresentationVector(*m)


def representation_vectors_all(
    decomp: CellDecomposition,
    traffic: TrafficFlow,
    k: int = 30,
    seed: int = 0,
    max_iters: int = 100,
) -> list[list[RepresentationVector]]:
    """RVs per cell, in cell-id then cluster-index order.

    A global flow (no cell assignment) is clustered once and shared by every cell.
    """
    if not traffic.vehicles:
        raise InvalidParam("traffic flow is empty")

    def cluster(vehicles: Sequence[Vehicle]) -> list[RepresentationVector]:
        return [representation_vector(c) for c in kmeans(vehicles, k, seed, max_iters)]

    if traffic.cell_of is None:
        shared = cluster(traffic.vehicles)
        out = [list(shared) for _ in decomp.cells]
    else:
        out = [cluster(traffic.for_cell(cell.id)) for cell in decomp.cells]
    log_event(logger, "representation_vectors", cells=decomp.n_cells, k=k, per_cell=traffic.cell_of is not None)
    return out
