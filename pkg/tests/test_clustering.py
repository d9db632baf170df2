import itertools

import numpy as np
import pytest

from app.planner.clustering import (
    VehicleCluster,
    fit_kmeans,
    kmeans,
    representation_vector,
    representation_vectors_all,
)
from app.planner.datagen import assign_traffic_cells, gen_traffic
from app.planner.errors import InvalidParam
from app.planner.model import Vehicle, dominates


def test_clusters_partition_the_flow() -> None:
    flow = gen_traffic(300, seed=1)
    clusters = kmeans(flow.vehicles, k=8, seed=0)
    assert 1 <= len(clusters) <= 8
    assert sum(len(c) for c in clusters) == len(flow)
    assert sorted(v for c in clusters for v in c.members) == sorted(flow.vehicles)


def test_kmeans_is_deterministic_and_bounded() -> None:
    flow = gen_traffic(200, seed=2)
    first = fit_kmeans(flow.vehicles, k=5, seed=3, max_iters=50)
    second = fit_kmeans(flow.vehicles, k=5, seed=3, max_iters=50)
    assert first.clusters == second.clusters
    assert 1 <= first.iterations <= 50
    # Lloyd iterations never increase the objective.
    history = first.inertia_history
    assert all(b <= a + 1e-9 for a, b in zip(history, history[1:]))


def _sse(points: np.ndarray, labels: tuple[int, ...]) -> float:
    mask = np.asarray(labels, dtype=bool)
    return sum(float(((part - part.mean(axis=0)) ** 2).sum()) for part in (points[mask], points[~mask]) if len(part))


def test_two_separated_masses_are_recovered_exactly() -> None:
    small = [Vehicle(1.5 + 0.02 * i, 1.6 + 0.01 * i, 2.0 + 0.1 * i) for i in range(6)]
    large = [Vehicle(4.0 - 0.02 * i, 2.5 - 0.01 * i, 40.0 - 0.2 * i) for i in range(6)]
    vehicles = [v for pair in zip(small, large) for v in pair]
    clusters = kmeans(vehicles, k=2, seed=7)
    assert sorted(sorted(c.members) for c in clusters) == [sorted(small), sorted(large)]

    # Exhaustive best 2-partition of the normalised points splits the same way.
    points = np.asarray([[v.he, v.wi, v.wt] for v in vehicles])
    points = (points - points.mean(axis=0)) / points.std(axis=0)
    best = min(
        ((0,) + rest for rest in itertools.product((0, 1), repeat=len(vehicles) - 1) if any(rest)),
        key=lambda labels: _sse(points, labels),
    )
    groups = {label: sorted(v for v, lab in zip(vehicles, best) if lab == label) for label in (0, 1)}
    assert sorted(groups.values()) == [sorted(small), sorted(large)]


def test_k_is_clipped_to_distinct_vehicles() -> None:
    vehicles = [Vehicle(2.0, 2.0, 3.0)] * 5 + [Vehicle(3.0, 2.5, 12.0)] * 5
    clusters = kmeans(vehicles, k=30, seed=0)
    assert len(clusters) == 2


def test_representation_vector_dominates_members() -> None:
    flow = gen_traffic(250, seed=5)
    for cluster in kmeans(flow.vehicles, k=6, seed=1):
        rv = representation_vector(cluster)
        assert all(dominates(v, rv) for v in cluster.members)
        assert rv.he == max(v.he for v in cluster.members)
        assert rv.as_triple().wt == rv.wt


def test_rejects_degenerate_input() -> None:
    with pytest.raises(InvalidParam):
        VehicleCluster(())
    with pytest.raises(InvalidParam):
        kmeans([], k=3)
    with pytest.raises(InvalidParam):
        kmeans([Vehicle(1.0, 1.0, 1.0)], k=0)


def test_global_flow_is_shared_by_every_cell(ref_decomp) -> None:
    flow = gen_traffic(60, seed=1)
    rvs = representation_vectors_all(ref_decomp, flow, k=4, seed=0)
    assert len(rvs) == ref_decomp.n_cells
    assert rvs[0] == rvs[1] == rvs[2]


def test_per_cell_flows_cluster_separately(ref_decomp) -> None:
    flow = assign_traffic_cells(gen_traffic(90, seed=1), ref_decomp.n_cells, seed=1)
    rvs = representation_vectors_all(ref_decomp, flow, k=3, seed=0)
    for cell_id, cell_rvs in enumerate(rvs):
        own = flow.for_cell(cell_id)
        assert all(any(dominates(v, rv) for rv in cell_rvs) for v in own)
