"""Domain types for road networks with height/width/weight restrictions.

Every limit and actor is a (he, wi, wt) triple in meters/meters/tonnes.
A missing restriction is ``math.inf``. Edges are undirected and a restriction
applies in both directions.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import Protocol, Union

from app.planner.errors import InvalidParam, NonAdjacent, UnknownVertex

INF = math.inf

LimitRow = tuple[float, float, float]
Arc = tuple[int, int, LimitRow]  # (neighbor, length, limits)


class Triple(Protocol):
    he: float
    wi: float
    wt: float


@dataclass(frozen=True, order=True, slots=True)
class RestrictionTriple:
    """Height, width and weight limits; ``inf`` means unrestricted."""

    he: float = INF
    wi: float = INF
    wt: float = INF

    def __post_init__(self) -> None:
        for name in ("he", "wi", "wt"):
            value = float(getattr(self, name))
            if math.isnan(value) or value <= 0:
                raise InvalidParam(f"restriction {name} must be positive, got {value}")
            object.__setattr__(self, name, value)

    def as_tuple(self) -> LimitRow:
        return (self.he, self.wi, self.wt)

    def leq(self, other: Triple) -> bool:
        """Componentwise ``self <= other``."""
        return self.he <= other.he and self.wi <= other.wi and self.wt <= other.wt


@dataclass(frozen=True, order=True, slots=True)
class Vehicle:
    he: float
    wi: float
    wt: float

    def __post_init__(self) -> None:
        for name in ("he", "wi", "wt"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value <= 0:
                raise InvalidParam(f"vehicle {name} must be finite and positive, got {value}")
            object.__setattr__(self, name, value)

    def as_tuple(self) -> LimitRow:
        return (self.he, self.wi, self.wt)


Actor = Union[Vehicle, RestrictionTriple]

UNRESTRICTED = RestrictionTriple()


def dominates(c: Triple, rc: Triple) -> bool:
    """True iff ``c`` is dominated by ``rc`` (every attribute of c fits under rc)."""
    return c.he <= rc.he and c.wi <= rc.wi and c.wt <= rc.wt


def edge_feasible(limits: Triple, actor: Triple) -> bool:
    return actor.he <= limits.he and actor.wi <= limits.wi and actor.wt <= limits.wt


@dataclass(frozen=True, slots=True)
class Edge:
    u: int
    v: int
    length: int
    limits: RestrictionTriple = UNRESTRICTED

    def __post_init__(self) -> None:
        if self.u == self.v:
            raise InvalidParam(f"loop edge at vertex {self.u}")
        if int(self.length) != self.length or self.length < 1:
            raise InvalidParam(f"edge ({self.u},{self.v}) length must be a positive integer")
        if self.u > self.v:
            u, v = self.v, self.u
            object.__setattr__(self, "u", u)
            object.__setattr__(self, "v", v)
        object.__setattr__(self, "length", int(self.length))

    def other(self, vertex: int) -> int:
        return self.v if vertex == self.u else self.u


class RoadNetwork:
    """Undirected weighted graph with a restriction triple on every edge.

    Edge ids are positions in ``edges``. Instances are never mutated after
    construction.
    """

    __slots__ = ("n_vertices", "edges", "_arcs", "_arc_edges", "_edge_index")

    def __init__(self, n_vertices: int, edges: Iterable[Edge]) -> None:
        if n_vertices < 0:
            raise InvalidParam("vertex count must be non-negative")
        self.n_vertices = n_vertices
        self.edges: tuple[Edge, ...] = tuple(edges)
        edge_index: dict[tuple[int, int], int] = {}
        arcs: list[list[Arc]] = [[] for _ in range(n_vertices)]
        arc_edges: list[list[int]] = [[] for _ in range(n_vertices)]
        for eid, edge in enumerate(self.edges):
            if edge.v >= n_vertices:
                raise InvalidParam(f"edge ({edge.u},{edge.v}) references a vertex >= {n_vertices}")
            key = (edge.u, edge.v)
            if key in edge_index:
                raise InvalidParam(f"parallel edge ({edge.u},{edge.v})")
            edge_index[key] = eid
            row = edge.limits.as_tuple()
            arcs[edge.u].append((edge.v, edge.length, row))
            arcs[edge.v].append((edge.u, edge.length, row))
            arc_edges[edge.u].append(eid)
            arc_edges[edge.v].append(eid)
        self._arcs = tuple(tuple(a) for a in arcs)
        self._arc_edges = tuple(tuple(a) for a in arc_edges)
        self._edge_index = edge_index

    def __repr__(self) -> str:
        return f"RoadNetwork(n_vertices={self.n_vertices}, edges={len(self.edges)})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RoadNetwork):
            return NotImplemented
        return self.n_vertices == other.n_vertices and self.edges == other.edges

    __hash__ = None  # type: ignore[assignment]

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def check_vertex(self, vertex: int) -> None:
        if not 0 <= vertex < self.n_vertices:
            raise UnknownVertex(f"vertex {vertex} not in network of {self.n_vertices} vertices")

    def arcs(self, vertex: int) -> tuple[Arc, ...]:
        """Outgoing ``(neighbor, length, limits)`` of ``vertex``."""
        return self._arcs[vertex]

    def incident_edges(self, vertex: int) -> tuple[int, ...]:
        return self._arc_edges[vertex]

    def neighbors(self, vertex: int) -> list[int]:
        return [w for w, _, _ in self._arcs[vertex]]

    def edge_between(self, u: int, v: int) -> int | None:
        key = (u, v) if u < v else (v, u)
        return self._edge_index.get(key)

    def with_limits(self, limits: Sequence[RestrictionTriple]) -> RoadNetwork:
        if len(limits) != len(self.edges):
            raise InvalidParam("one restriction triple per edge is required")
        return RoadNetwork(
            self.n_vertices,
            (Edge(e.u, e.v, e.length, lim) for e, lim in zip(self.edges, limits)),
        )


@dataclass(frozen=True, slots=True)
class Path:
    vertices: tuple[int, ...]
    distance: int

    @property
    def source(self) -> int:
        return self.vertices[0]

    @property
    def target(self) -> int:
        return self.vertices[-1]

    def __len__(self) -> int:
        return len(self.vertices)


def _path_edges(path: Path, net: RoadNetwork) -> list[Edge]:
    edges = []
    for a, b in zip(path.vertices, path.vertices[1:]):
        eid = net.edge_between(a, b)
        if eid is None:
            raise NonAdjacent(f"vertices {a} and {b} share no edge")
        edges.append(net.edges[eid])
    return edges


def path_distance(path: Path, net: RoadNetwork) -> int:
    return sum(edge.length for edge in _path_edges(path, net))


def path_feasible(path: Path, c: Triple, net: RoadNetwork) -> bool:
    return all(edge_feasible(edge.limits, c) for edge in _path_edges(path, net))


def concat(first: Path, second: Path) -> Path:
    """Join two paths meeting at ``first.target == second.source``."""
    if first.vertices[-1] != second.vertices[0]:
        raise NonAdjacent("paths do not share an endpoint")
    return Path(first.vertices + second.vertices[1:], first.distance + second.distance)


@dataclass(frozen=True, slots=True)
class Query:
    s: int
    d: int
    vehicle: Vehicle


@dataclass(frozen=True)
class QuerySet:
    queries: tuple[Query, ...]
    seed: int | None = None

    def __len__(self) -> int:
        return len(self.queries)

    def __iter__(self):
        return iter(self.queries)
