"""Vertex partitioning into dense cells with boundary (entry/exit) vertices.

Cells are grown region by region from the lowest-id unassigned vertex. The
frontier vertex with the most neighbours already inside the growing cell is
taken first, then the one closest (in hops) to the start vertex; remaining
ties are broken by a seeded permutation.
"""

from __future__ import annotations

import hashlib
import heapq
import logging
from collections.abc import Sequence
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from app.core.logging_utils import log_event
from app.planner.errors import InvalidParam, UnknownCell, UnknownVertex
from app.planner.model import Arc, Edge, RoadNetwork

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Cell:
    """Induced subgraph ``C_i = (V_i, E_i)``; self-contained so it can be shipped to workers."""

    id: int
    vertices: tuple[int, ...]
    edges: tuple[Edge, ...]
    edge_ids: tuple[int, ...]

    @cached_property
    def vertex_set(self) -> frozenset[int]:
        return frozenset(self.vertices)

    @cached_property
    def _arcs(self) -> dict[int, tuple[Arc, ...]]:
        arcs: dict[int, list[Arc]] = {v: [] for v in self.vertices}
        for edge in self.edges:
            row = edge.limits.as_tuple()
            arcs[edge.u].append((edge.v, edge.length, row))
            arcs[edge.v].append((edge.u, edge.length, row))
        return {v: tuple(a) for v, a in arcs.items()}

    def arcs(self, vertex: int) -> tuple[Arc, ...]:
        return self._arcs[vertex]

    def __contains__(self, vertex: object) -> bool:
        return vertex in self.vertex_set

    def __len__(self) -> int:
        return len(self.vertices)


@dataclass(frozen=True)
class CellDecomposition:
    cells: tuple[Cell, ...]
    cell_of: tuple[int, ...]
    inter_cell_edges: tuple[int, ...]
    boundary: tuple[frozenset[int], ...]

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def cell(self, cell_id: int) -> Cell:
        if not 0 <= cell_id < len(self.cells):
            raise UnknownCell(f"cell {cell_id} not in decomposition of {len(self.cells)} cells")
        return self.cells[cell_id]

    def cell_of_vertex(self, vertex: int) -> int:
        if not 0 <= vertex < len(self.cell_of):
            raise UnknownVertex(f"vertex {vertex} not in decomposition")
        return self.cell_of[vertex]

    def is_boundary(self, vertex: int) -> bool:
        return vertex in self.boundary[self.cell_of_vertex(vertex)]

    @cached_property
    def fingerprint(self) -> str:
        return fingerprint(self.cell_of)


def fingerprint(cell_of: Sequence[int]) -> str:
    """Stable digest of a vertex -> cell assignment."""
    digest = hashlib.sha1()
    digest.update(",".join(map(str, cell_of)).encode("ascii"))
    return digest.hexdigest()


def boundary_vertices(decomp: CellDecomposition, cell_id: int) -> frozenset[int]:
    """Entry/exit vertices of a cell; on undirected networks both sets coincide."""
    decomp.cell(cell_id)
    return decomp.boundary[cell_id]


def from_assignment(net: RoadNetwork, cell_of: Sequence[int]) -> CellDecomposition:
    """Build a decomposition from an explicit vertex -> cell id assignment (ids 0..k-1)."""
    if len(cell_of) != net.n_vertices:
        raise InvalidParam(f"assignment covers {len(cell_of)} of {net.n_vertices} vertices")
    n_cells = max(cell_of, default=-1) + 1
    if any(c < 0 for c in cell_of) or len(set(cell_of)) != n_cells:
        raise InvalidParam("cell ids must be dense in 0..k-1")

    members: list[list[int]] = [[] for _ in range(n_cells)]
    for v, c in enumerate(cell_of):
        members[c].append(v)
    cell_edges: list[list[int]] = [[] for _ in range(n_cells)]
    crossing: list[int] = []
    boundary: list[set[int]] = [set() for _ in range(n_cells)]
    for eid, edge in enumerate(net.edges):
        cu, cv = cell_of[edge.u], cell_of[edge.v]
        if cu == cv:
            cell_edges[cu].append(eid)
        else:
            crossing.append(eid)
            boundary[cu].add(edge.u)
            boundary[cv].add(edge.v)

    cells = tuple(
        Cell(
            id=c,
            vertices=tuple(members[c]),
            edges=tuple(net.edges[e] for e in cell_edges[c]),
            edge_ids=tuple(cell_edges[c]),
        )
        for c in range(n_cells)
    )
    return CellDecomposition(
        cells=cells,
        cell_of=tuple(cell_of),
        inter_cell_edges=tuple(crossing),
        boundary=tuple(frozenset(b) for b in boundary),
    )


def partition(net: RoadNetwork, target_cell_size: int = 64, seed: int = 0) -> CellDecomposition:
    if target_cell_size < 2:
        raise InvalidParam("target_cell_size must be >= 2")
    n = net.n_vertices
    tie = np.random.default_rng(seed).permutation(n).tolist()
    cell_of = [-1] * n
    sizes: list[int] = []
    start = 0
    while True:
        while start < n and cell_of[start] != -1:
            start += 1
        if start == n:
            break
        sizes.append(_grow(net, start, len(sizes), target_cell_size, cell_of, tie))

    _merge_small_cells(net, cell_of, sizes, target_cell_size, tie)
    decomp = from_assignment(net, _relabel(cell_of))
    log_event(
        logger,
        "partition",
        vertices=n,
        cells=decomp.n_cells,
        inter_cell_edges=len(decomp.inter_cell_edges),
        boundary=sum(len(b) for b in decomp.boundary),
    )
    return decomp


def _grow(
    net: RoadNetwork,
    start: int,
    cell_id: int,
    target: int,
    cell_of: list[int],
    tie: list[int],
) -> int:
    cell_of[start] = cell_id
    size = 1
    gain: dict[int, int] = {}
    depth: dict[int, int] = {start: 0}
    heap: list[tuple[int, int, int, int]] = []

    def touch(vertex: int) -> None:
        for w, _, _ in net.arcs(vertex):
            if cell_of[w] != -1:
                continue
            gain[w] = gain.get(w, 0) + 1
            if w not in depth:
                depth[w] = depth[vertex] + 1
            heapq.heappush(heap, (-gain[w], depth[w], tie[w], w))

    touch(start)
    while size < target and heap:
        neg_gain, _, _, v = heapq.heappop(heap)
        if cell_of[v] != -1 or -neg_gain != gain[v]:
            continue
        cell_of[v] = cell_id
        size += 1
        touch(v)
    return size


def _merge_small_cells(
    net: RoadNetwork,
    cell_of: list[int],
    sizes: list[int],
    target: int,
    tie: list[int],
) -> None:
    """Fold cells under half the target into their best-connected neighbour.

    A merge that would pass ``2 * target`` is split again into two regions of
    half the combined size, both grown inside the combined vertex set.
    """
    members: dict[int, list[int]] = {}
    for v, c in enumerate(cell_of):
        members.setdefault(c, []).append(v)
    merged = True
    while merged:
        merged = False
        for cid in sorted(members):
            if cid not in members or 2 * sizes[cid] >= target:
                continue
            links: dict[int, int] = {}
            for v in members[cid]:
                for w, _, _ in net.arcs(v):
                    other = cell_of[w]
                    if other != cid:
                        links[other] = links.get(other, 0) + 1
            if not links:
                continue
            fitting = [
                (-count, other)
                for other, count in links.items()
                if sizes[other] + sizes[cid] <= 2 * target
            ]
            if not fitting:
                fitting = [(-count, other) for other, count in links.items()]
            _, into = min(fitting)
            moved = members.pop(cid)
            for v in moved:
                cell_of[v] = into
            members[into].extend(moved)
            sizes[into] += sizes[cid]
            sizes[cid] = 0
            if sizes[into] > 2 * target:
                new_id = len(sizes)
                sizes.append(0)
                _split(net, members, cell_of, sizes, into, new_id, tie)
            merged = True


def _split(
    net: RoadNetwork,
    members: dict[int, list[int]],
    cell_of: list[int],
    sizes: list[int],
    cid: int,
    new_id: int,
    tie: list[int],
) -> None:
    """Regrow ``cid`` to half its vertices; the rest becomes ``new_id``."""
    vertices = sorted(members[cid])
    for v in vertices:
        cell_of[v] = -1
    half = len(vertices) // 2
    grown = 0
    for start in vertices:
        if grown >= half:
            break
        if cell_of[start] == -1:
            grown += _grow(net, start, cid, half - grown, cell_of, tie)
    rest = [v for v in vertices if cell_of[v] == -1]
    for v in rest:
        cell_of[v] = new_id
    members[cid] = [v for v in vertices if cell_of[v] == cid]
    members[new_id] = rest
    sizes[cid] = len(members[cid])
    sizes[new_id] = len(rest)


def _relabel(cell_of: list[int]) -> list[int]:
    """Renumber cells densely in order of their lowest vertex id."""
    mapping: dict[int, int] = {}
    for c in cell_of:
        if c not in mapping:
            mapping[c] = len(mapping)
    return [mapping[c] for c in cell_of]
