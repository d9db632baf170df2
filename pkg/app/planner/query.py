"""Route queries over the overlay of endpoint cells, inter-cell edges and shortcuts."""

from __future__ import annotations

import heapq
import time
from collections.abc import Iterator
from dataclasses import dataclass
from enum import Enum

from app.planner.errors import DanglingRef
from app.planner.model import Arc, Path, Query, RoadNetwork, Triple
from app.planner.oracle import restricted_dijkstra
from app.planner.partitioner import CellDecomposition
from app.planner.shortcuts import Shortcut, ShortcutIndex, match_full_scan


class QueryStatus(str, Enum):
    overlay = "overlay"
    fallback = "fallback"
    no_path = "no_path"
    exact = "exact"


@dataclass(frozen=True)
class QueryResult:
    path: Path | None
    status: QueryStatus
    scanned_entries: int = 0
    full_scan_entries: int = 0
    matches: int = 0
    match_mismatches: int = 0
    overlay_seconds: float = 0.0
    fallback_seconds: float = 0.0

    @property
    def distance(self) -> int | None:
        return None if self.path is None else self.path.distance

    @property
    def seconds(self) -> float:
        return self.overlay_seconds + self.fallback_seconds


@dataclass(frozen=True)
class OverlayLeg:
    """One overlay edge; ``cell_id`` is set for virtual (shortcut) legs."""

    u: int
    v: int
    length: int
    cell_id: int | None = None
    path_ref: int = -1
    reversed: bool = False

    @property
    def virtual(self) -> bool:
        return self.cell_id is not None


@dataclass(frozen=True)
class OverlayPath:
    source: int
    legs: tuple[OverlayLeg, ...]

    @property
    def distance(self) -> int:
        return sum(leg.length for leg in self.legs)


class OverlayGraph:
    """Lazy view: full endpoint cells, every inter-cell edge and one virtual edge per shortcut elsewhere."""

    def __init__(
        self,
        net: RoadNetwork,
        decomp: CellDecomposition,
        index: ShortcutIndex,
        s: int,
        d: int,
    ) -> None:
        net.check_vertex(s)
        net.check_vertex(d)
        self.net = net
        self.decomp = decomp
        self.index = index
        self.s = s
        self.d = d
        self.endpoint_cells = frozenset((decomp.cell_of[s], decomp.cell_of[d]))

    def is_full(self, vertex: int) -> bool:
        return self.decomp.cell_of[vertex] in self.endpoint_cells

    def physical_arcs(self, vertex: int) -> Iterator[Arc]:
        """Endpoint-cell vertices keep every arc; other boundary vertices only their inter-cell arcs."""
        if self.is_full(vertex):
            yield from self.net.arcs(vertex)
            return
        own = self.decomp.cell_of[vertex]
        for arc in self.net.arcs(vertex):
            if self.decomp.cell_of[arc[0]] != own:
                yield arc

    def virtual_edges(self, vertex: int) -> tuple[Shortcut, ...]:
        if self.is_full(vertex):
            return ()
        cell_id = self.decomp.cell_of[vertex]
        return self.index.cell(cell_id).by_source.get(vertex, ())

    def vertices(self) -> set[int]:
        out: set[int] = set()
        for cell_id in self.endpoint_cells:
            out.update(self.decomp.cells[cell_id].vertices)
        for cell_id, boundary in enumerate(self.decomp.boundary):
            if cell_id not in self.endpoint_cells:
                out.update(boundary)
        return out

    @property
    def n_physical_edges(self) -> int:
        inside = sum(len(self.decomp.cells[c].edges) for c in self.endpoint_cells)
        return inside + len(self.decomp.inter_cell_edges)

    @property
    def n_virtual_edges(self) -> int:
        return sum(
            len(cell.shortcuts)
            for cell in self.index.cells
            if cell.cell_id not in self.endpoint_cells
        )


def build_overlay(
    net: RoadNetwork,
    decomp: CellDecomposition,
    index: ShortcutIndex,
    s: int,
    d: int,
) -> OverlayGraph:
    return OverlayGraph(net, decomp, index, s, d)


@dataclass
class _MatchCounters:
    scanned: int = 0
    full_scan: int = 0
    matches: int = 0
    mismatches: int = 0


# (u, v, length, cell id or -1 for physical edges, path id, reversed)
_Leg = tuple[int, int, int, int, int, bool]


def _overlay_search(
    overlay: OverlayGraph,
    vehicle: Triple,
    counters: _MatchCounters,
    verify_matches: bool,
) -> OverlayPath | None:
    ah, aw, at = vehicle.he, vehicle.wi, vehicle.wt
    net_arcs = overlay.net.arcs
    cell_of = overlay.decomp.cell_of
    endpoint_cells = overlay.endpoint_cells
    index = overlay.index
    push, pop = heapq.heappush, heapq.heappop

    fits_by_cell: dict[int, list[bool]] = {}
    dist: dict[int, int] = {overlay.s: 0}
    parent: dict[int, _Leg] = {}
    settled: set[int] = set()
    heap = [(0, overlay.s)]
    target = overlay.d
    scanned = full_scan = matches = mismatches = 0

    while heap:
        du, u = pop(heap)
        if u in settled:
            continue
        settled.add(u)
        if u == target:
            break
        own = cell_of[u]
        full = own in endpoint_cells
        for w, length, (lh, lw, lt) in net_arcs(u):
            if w in settled or ah > lh or aw > lw or at > lt:
                continue
            if not full and cell_of[w] == own:
                continue
            nd = du + length
            old = dist.get(w)
            if old is None or nd < old:
                dist[w] = nd
                parent[w] = (u, w, length, -1, -1, False)
                push(heap, (nd, w))
            elif nd == old and u < parent[w][0]:
                parent[w] = (u, w, length, -1, -1, False)
        if full:
            continue

        cell = index.cell(own)
        outgoing = cell.match_rows.get(u)
        if not outgoing:
            continue
        fits = fits_by_cell.get(own)
        if fits is None:
            fits = fits_by_cell[own] = cell.fits(vehicle).tolist()
        for dst, rows, shortcut in outgoing:
            if dst in settled:
                continue
            matches += 1
            full_scan += len(rows)
            hit = -1
            for pos, row in enumerate(rows):
                if fits[row[0]]:
                    hit = pos
                    break
            scanned += len(rows) if hit < 0 else hit + 1
            if verify_matches:
                found = None if hit < 0 else shortcut.entry(hit)
                if match_full_scan(shortcut, vehicle)[0] != found:
                    mismatches += 1
            if hit < 0:
                continue
            _, length, ref, rev = rows[hit]
            nd = du + length
            old = dist.get(dst)
            if old is None or nd < old:
                dist[dst] = nd
                parent[dst] = (u, dst, length, own, ref, rev)
                push(heap, (nd, dst))
            elif nd == old and u < parent[dst][0]:
                parent[dst] = (u, dst, length, own, ref, rev)

    counters.scanned += scanned
    counters.full_scan += full_scan
    counters.matches += matches
    counters.mismatches += mismatches
    if target not in settled:
        return None
    legs = []
    vertex = target
    while vertex != overlay.s:
        u, v, length, cell_id, ref, rev = parent[vertex]
        legs.append(OverlayLeg(u, v, length, None if cell_id < 0 else cell_id, ref, rev))
        vertex = u
    legs.reverse()
    return OverlayPath(overlay.s, tuple(legs))


def expand(overlay_path: OverlayPath, index: ShortcutIndex) -> Path:
    """Replace every virtual leg by its pooled vertex sequence."""
    vertices = [overlay_path.source]
    for leg in overlay_path.legs:
        if not leg.virtual:
            vertices.append(leg.v)
            continue
        seq, distance = index.cell(leg.cell_id).pool.get(leg.path_ref)
        if leg.reversed:
            seq = seq[::-1]
        if seq[0] != leg.u or seq[-1] != leg.v or distance != leg.length:
            raise DanglingRef(
                f"pool path {leg.path_ref} of cell {leg.cell_id} does not match leg {leg.u}->{leg.v}"
            )
        vertices.extend(seq[1:])
    return Path(tuple(vertices), overlay_path.distance)


def plan(
    net: RoadNetwork,
    decomp: CellDecomposition,
    index: ShortcutIndex,
    query: Query,
    verify_matches: bool = False,
) -> QueryResult:
    """Answer one query; falls back to the exact search when the overlay finds nothing."""
    s, d, vehicle = query.s, query.d, query.vehicle
    net.check_vertex(s)
    net.check_vertex(d)
    start = time.perf_counter()
    if decomp.cell_of[s] == decomp.cell_of[d]:
        path = restricted_dijkstra(net, s, d, vehicle)
        status = QueryStatus.overlay if path is not None else QueryStatus.no_path
        return QueryResult(path, status, overlay_seconds=time.perf_counter() - start)

    counters = _MatchCounters()
    overlay = build_overlay(net, decomp, index, s, d)
    found = _overlay_search(overlay, vehicle, counters, verify_matches)
    path = expand(found, index) if found is not None else None
    overlay_seconds = time.perf_counter() - start
    fallback_seconds = 0.0
    if path is not None:
        status = QueryStatus.overlay
    else:
        start = time.perf_counter()
        path = restricted_dijkstra(net, s, d, vehicle)
        fallback_seconds = time.perf_counter() - start
        status = QueryStatus.fallback if path is not None else QueryStatus.no_path
    return QueryResult(
        path=path,
        status=status,
        scanned_entries=counters.scanned,
        full_scan_entries=counters.full_scan,
        matches=counters.matches,
        match_mismatches=counters.mismatches,
        overlay_seconds=overlay_seconds,
        fallback_seconds=fallback_seconds,
    )


def plan_exact(net: RoadNetwork, query: Query) -> QueryResult:
    start = time.perf_counter()
    path = restricted_dijkstra(net, query.s, query.d, query.vehicle)
    status = QueryStatus.exact if path is not None else QueryStatus.no_path
    return QueryResult(path, status, fallback_seconds=time.perf_counter() - start)
