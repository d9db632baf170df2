"""Deterministic synthetic road networks, restrictions, traffic flows and query sets.

Every generator is a pure function of its parameters and seed.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import List

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from scipy.spatial import cKDTree

from app.core.logging_utils import log_event
from app.planner.errors import Infeasible, InvalidParam
from app.planner.model import INF, Edge, Query, QuerySet, RestrictionTriple, RoadNetwork, Vehicle
from app.planner.partitioner import CellDecomposition

logger = logging.getLogger(__name__)


class RestrictionPalette(BaseModel):
    """Candidate finite limits per type and the share of edges receiving one."""

    model_config = ConfigDict(frozen=True)

    he_values: List[float] = Field(default_factory=lambda: [1.8, 2.0, 2.5, 3.0, 3.5, 4.0])
    wi_values: List[float] = Field(default_factory=lambda: [2.0, 2.2, 2.4, 3.0])
    wt_values: List[float] = Field(default_factory=lambda: [5.0, 10.0, 15.0, 20.0, 30.0, 40.0])
    he_fraction: float = Field(0.30, ge=0.0, le=1.0)
    wi_fraction: float = Field(0.25, ge=0.0, le=1.0)
    wt_fraction: float = Field(0.35, ge=0.0, le=1.0)

    @field_validator("he_values", "wi_values", "wt_values")
    @classmethod
    def _positive_ascending(cls, values: List[float]) -> List[float]:
        if any(not math.isfinite(x) or x <= 0 for x in values):
            raise ValueError("palette values must be finite and positive")
        if any(a >= b for a, b in zip(values, values[1:])):
            raise ValueError("palette values must be strictly ascending")
        return values

    @model_validator(mode="after")
    def _values_for_fractions(self) -> "RestrictionPalette":
        for kind in ("he", "wi", "wt"):
            if getattr(self, f"{kind}_fraction") > 0 and not getattr(self, f"{kind}_values"):
                raise ValueError(f"{kind}_fraction > 0 needs at least one {kind} value")
        return self


DEFAULT_PALETTE = RestrictionPalette()


class VehicleCategory(BaseModel):
    """Normal distribution per attribute, truncated to positive values."""

    model_config = ConfigDict(frozen=True)

    name: str
    weight: float = Field(ge=0.0, le=1.0)
    he_mean: float = Field(gt=0)
    he_std: float = Field(0.0, ge=0)
    wi_mean: float = Field(gt=0)
    wi_std: float = Field(0.0, ge=0)
    wt_mean: float = Field(gt=0)
    wt_std: float = Field(0.0, ge=0)


DEFAULT_MIX: tuple[VehicleCategory, ...] = (
    VehicleCategory(
        name="passenger", weight=0.70,
        he_mean=1.6, he_std=0.1, wi_mean=1.8, wi_std=0.05, wt_mean=1.8, wt_std=0.2,
    ),
    VehicleCategory(
        name="van", weight=0.15,
        he_mean=2.3, he_std=0.15, wi_mean=2.0, wi_std=0.08, wt_mean=3.5, wt_std=0.5,
    ),
    VehicleCategory(
        name="box_truck", weight=0.10,
        he_mean=3.2, he_std=0.25, wi_mean=2.4, wi_std=0.1, wt_mean=12.0, wt_std=3.0,
    ),
    VehicleCategory(
        name="heavy", weight=0.05,
        he_mean=3.9, he_std=0.2, wi_mean=2.6, wi_std=0.15, wt_mean=30.0, wt_std=6.0,
    ),
)


@dataclass(frozen=True)
class TrafficFlow:
    vehicles: tuple[Vehicle, ...]
    cell_of: tuple[int, ...] | None = None
    categories: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.cell_of is not None and len(self.cell_of) != len(self.vehicles):
            raise InvalidParam("cell assignment must cover every vehicle")

    def __len__(self) -> int:
        return len(self.vehicles)

    def for_cell(self, cell_id: int) -> tuple[Vehicle, ...]:
        """The cell's own vehicles; the global flow when no assignment exists or the cell has none."""
        if self.cell_of is None:
            return self.vehicles
        own = tuple(v for v, c in zip(self.vehicles, self.cell_of) if c == cell_id)
        return own or self.vehicles


def gen_network(
    n: int,
    avg_degree: float = 4.4,
    seed: int = 0,
    length_scale: float | None = None,
) -> RoadNetwork:
    """Random geometric road network on the unit square, connected by a spanning tree.

    Lengths are Euclidean distances scaled by ``length_scale`` (default
    ``100 * sqrt(n)``, i.e. roughly 100 units per typical edge), rounded, at least 1.
    """
    if n < 2:
        raise InvalidParam("network needs at least 2 vertices")
    if avg_degree < 2:
        raise InvalidParam("avg_degree must be >= 2")
    rng = np.random.default_rng(seed)
    points = rng.random((n, 2))
    scale = length_scale if length_scale is not None else 100.0 * math.sqrt(n)
    target = max(n - 1, round(n * avg_degree / 2))

    k = min(n - 1, math.ceil(avg_degree) + 4)
    dists, nbrs = cKDTree(points).query(points, k=k + 1)
    candidates: dict[tuple[int, int], float] = {}
    for u in range(n):
        for dist, v in zip(dists[u][1:], nbrs[u][1:]):
            v = int(v)
            if v == u:
                continue
            key = (u, v) if u < v else (v, u)
            candidates[key] = float(dist)

    graph = nx.Graph()
    graph.add_nodes_from(range(n))
    for (u, v), dist in sorted(candidates.items()):
        graph.add_edge(u, v, weight=dist)
    chosen = {(min(u, v), max(u, v)) for u, v in nx.minimum_spanning_edges(graph, data=False)}
    for u, v, dist in _join_components(graph, points):
        chosen.add((u, v))
        candidates[(u, v)] = dist

    for key in sorted(candidates, key=lambda e: (candidates[e], e)):
        if len(chosen) >= target:
            break
        chosen.add(key)

    edges = [
        Edge(u, v, max(1, int(round(candidates[(u, v)] * scale))))
        for u, v in sorted(chosen)
    ]
    net = RoadNetwork(n, edges)
    log_event(logger, "gen_network", vertices=n, edges=net.n_edges, seed=seed)
    return net


def _join_components(graph: nx.Graph, points: np.ndarray) -> list[tuple[int, int, float]]:
    """Link each extra component to the nearest vertex of the ones before it."""
    components = sorted((sorted(c) for c in nx.connected_components(graph)), key=lambda c: c[0])
    joins: list[tuple[int, int, float]] = []
    reached = list(components[0])
    for component in components[1:]:
        tree = cKDTree(points[reached])
        dist, idx = tree.query(points[component])
        j = int(np.argmin(dist))
        u, v = component[j], reached[int(idx[j])]
        joins.append((min(u, v), max(u, v), float(dist[j])))
        reached.extend(component)
    return joins


def assign_restrictions(
    net: RoadNetwork,
    palette: RestrictionPalette = DEFAULT_PALETTE,
    seed: int = 0,
) -> RoadNetwork:
    """Give each edge, per type independently, a palette value with that type's probability."""
    rng = np.random.default_rng(seed)
    m = net.n_edges
    columns = []
    for kind in ("he", "wi", "wt"):
        fraction = getattr(palette, f"{kind}_fraction")
        values = getattr(palette, f"{kind}_values")
        mask = rng.random(m) < fraction
        if values:
            picks = rng.choice(np.asarray(values, dtype=float), size=m)
        else:
            picks = np.full(m, INF)
        columns.append(np.where(mask, picks, INF).tolist())
    limits = [RestrictionTriple(he, wi, wt) for he, wi, wt in zip(*columns)]
    restricted = sum(1 for lim in limits if lim != RestrictionTriple())
    log_event(logger, "assign_restrictions", edges=m, restricted=restricted, seed=seed)
    return net.with_limits(limits)


def gen_traffic(
    n_vehicles: int,
    mix: Sequence[VehicleCategory] = DEFAULT_MIX,
    seed: int = 0,
) -> TrafficFlow:
    if n_vehicles < 1:
        raise InvalidParam("traffic needs at least one vehicle")
    if not mix:
        raise InvalidParam("vehicle mix is empty")
    weights = np.asarray([c.weight for c in mix], dtype=float)
    if not math.isclose(weights.sum(), 1.0, abs_tol=1e-9):
        raise InvalidParam(f"mix weights must sum to 1, got {weights.sum()}")

    rng = np.random.default_rng(seed)
    labels = rng.choice(len(mix), size=n_vehicles, p=weights / weights.sum())
    attrs = []
    for kind in ("he", "wi", "wt"):
        means = np.asarray([getattr(c, f"{kind}_mean") for c in mix])[labels]
        stds = np.asarray([getattr(c, f"{kind}_std") for c in mix])[labels]
        values = rng.normal(means, stds)
        bad = values <= 0
        while bad.any():
            values[bad] = rng.normal(means[bad], stds[bad])
            bad = values <= 0
        attrs.append(np.maximum(np.round(values, 2), 0.01).tolist())

    vehicles = tuple(Vehicle(he, wi, wt) for he, wi, wt in zip(*attrs))
    categories = tuple(mix[i].name for i in labels.tolist())
    log_event(logger, "gen_traffic", vehicles=n_vehicles, seed=seed)
    return TrafficFlow(vehicles=vehicles, categories=categories)


def assign_traffic_cells(traffic: TrafficFlow, n_cells: int, seed: int = 0) -> TrafficFlow:
    """Attach a uniformly random cell id to every vehicle (per-cell flows)."""
    if n_cells < 1:
        raise InvalidParam("n_cells must be >= 1")
    rng = np.random.default_rng(seed)
    cell_of = tuple(rng.integers(0, n_cells, size=len(traffic)).tolist())
    return TrafficFlow(traffic.vehicles, cell_of=cell_of, categories=traffic.categories)


def gen_queries(
    net: RoadNetwork,
    decomp: CellDecomposition,
    traffic: TrafficFlow,
    n: int = 300,
    seed: int = 0,
) -> QuerySet:
    """Cross-cell (s, d, vehicle) queries with vehicles drawn uniformly from the traffic flow."""
    if decomp.n_cells < 2:
        raise Infeasible("cross-cell queries need at least two cells")
    if n < 0:
        raise InvalidParam("query count must be non-negative")
    if not traffic.vehicles:
        raise InvalidParam("traffic flow is empty")
    rng = np.random.default_rng(seed)
    queries = []
    while len(queries) < n:
        s, d = (int(x) for x in rng.integers(0, net.n_vertices, size=2))
        if decomp.cell_of[s] == decomp.cell_of[d]:
            continue
        vehicle = traffic.vehicles[int(rng.integers(0, len(traffic.vehicles)))]
        queries.append(Query(s, d, vehicle))
    return QuerySet(tuple(queries), seed=seed)


def load_palette(text: str) -> RestrictionPalette:
    """Parse a JSON palette file."""
    try:
        return RestrictionPalette.model_validate_json(text)
    except ValidationError as exc:
        raise InvalidParam(f"invalid palette: {exc}") from exc
