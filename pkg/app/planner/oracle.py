"""Exact restriction-aware shortest paths (modified Dijkstra).

Only arcs whose limits admit the actor are relaxed. The heap is ordered by
(distance, vertex id) and, among equal-distance predecessors, the one with the
smaller vertex id wins, so identical inputs give identical vertex sequences.
"""

from __future__ import annotations

import heapq
from collections.abc import Callable, Collection, Iterable

from app.planner.errors import UnknownVertex
from app.planner.model import Arc, Path, RoadNetwork, Triple
from app.planner.partitioner import Cell

ArcSource = Callable[[int], Iterable[Arc]]


def _search(
    arcs: ArcSource,
    source: int,
    actor: Triple,
    targets: Collection[int] | None = None,
) -> tuple[dict[int, int], dict[int, int]]:
    """Run Dijkstra from ``source`` until every target is settled (or the graph is exhausted).

    Returns the settled distances and parent pointers.
    """
    ah, aw, at = actor.he, actor.wi, actor.wt
    dist: dict[int, int] = {source: 0}
    parent: dict[int, int] = {source: -1}
    settled: dict[int, int] = {}
    pending = set(targets) if targets is not None else None
    heap = [(0, source)]
    while heap:
        du, u = heapq.heappop(heap)
        if u in settled:
            continue
        settled[u] = du
        if pending is not None:
            pending.discard(u)
            if not pending:
                break
        for w, length, (lh, lw, lt) in arcs(u):
            if ah > lh or aw > lw or at > lt or w in settled:
                continue
            nd = du + length
            old = dist.get(w)
            if old is None or nd < old:
                dist[w] = nd
                parent[w] = u
                heapq.heappush(heap, (nd, w))
            elif nd == old and u < parent[w]:
                parent[w] = u
    return settled, parent


def _trace(parent: dict[int, int], target: int, distance: int) -> Path:
    vertices = [target]
    while parent[vertices[-1]] != -1:
        vertices.append(parent[vertices[-1]])
    vertices.reverse()
    return Path(tuple(vertices), distance)


def restricted_dijkstra(net: RoadNetwork, s: int, d: int, actor: Triple) -> Path | None:
    """Shortest path from ``s`` to ``d`` using only edges feasible for ``actor``; None if unreachable."""
    net.check_vertex(s)
    net.check_vertex(d)
    settled, parent = _search(net.arcs, s, actor, (d,))
    if d not in settled:
        return None
    return _trace(parent, d, settled[d])


def cell_shortest_path(cell: Cell, u: int, v: int, rc: Triple) -> Path | None:
    """Restricted shortest path confined to the cell's induced edges."""
    for vertex in (u, v):
        if vertex not in cell:
            raise UnknownVertex(f"vertex {vertex} not in cell {cell.id}")
    settled, parent = _search(cell.arcs, u, rc, (v,))
    if v not in settled:
        return None
    return _trace(parent, v, settled[v])


def cell_shortest_paths(cell: Cell, u: int, targets: Iterable[int], rc: Triple) -> dict[int, Path]:
    """One search from ``u`` serving many targets; equals calling ``cell_shortest_path`` per target."""
    wanted = [t for t in targets if t != u]
    for vertex in (u, *wanted):
        if vertex not in cell:
            raise UnknownVertex(f"vertex {vertex} not in cell {cell.id}")
    settled, parent = _search(cell.arcs, u, rc, wanted)
    return {t: _trace(parent, t, settled[t]) for t in wanted if t in settled}
