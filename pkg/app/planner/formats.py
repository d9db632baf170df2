"""Whitespace-separated text files: graphs, traffic, queries, partitions and debug dumps.

``-`` stands for an absent restriction (infinity). Lines starting with ``#``
are comments. Readers raise ``FormatError`` with the byte offset of the
offending line.
"""

from __future__ import annotations

import math
from collections.abc import Iterator, Sequence
from pathlib import Path as FsPath

from app.planner.clustering import RepresentationVector
from app.planner.datagen import TrafficFlow
from app.planner.errors import FormatError, PlannerError
from app.planner.model import Edge, Query, QuerySet, RestrictionTriple, RoadNetwork, Triple, Vehicle
from app.planner.partitioner import CellDecomposition, from_assignment


class LineReader:
    """Non-blank, non-comment lines with their byte offsets."""

    def __init__(self, data: bytes) -> None:
        self.items: list[tuple[int, str]] = []
        self.comments: list[str] = []
        offset = 0
        for raw in data.splitlines(keepends=True):
            try:
                text = raw.decode("utf-8").strip()
            except UnicodeDecodeError as exc:
                raise FormatError("invalid utf-8", offset) from exc
            if text.startswith("#"):
                self.comments.append(text[1:].strip())
            elif text:
                self.items.append((offset, text))
            offset += len(raw)
        self.end = offset
        self._pos = 0

    def peek(self) -> tuple[int, str] | None:
        return self.items[self._pos] if self._pos < len(self.items) else None

    def next(self) -> tuple[int, str]:
        item = self.peek()
        if item is None:
            raise FormatError("unexpected end of file", self.end)
        self._pos += 1
        return item

    def expect(self, header: str) -> int:
        offset, text = self.next()
        if text != header:
            raise FormatError(f"expected {header!r}, found {text!r}", offset)
        return offset

    def body(self) -> Iterator[tuple[int, list[str]]]:
        """Lines up to the next ``[section]`` header, split into tokens."""
        while (item := self.peek()) is not None and not item[1].startswith("["):
            self._pos += 1
            yield item[0], item[1].split()

    def rest(self) -> Iterator[tuple[int, list[str]]]:
        while (item := self.peek()) is not None:
            self._pos += 1
            yield item[0], item[1].split()


def fmt_limit(value: float) -> str:
    return "-" if math.isinf(value) else repr(float(value))


def parse_limit(token: str) -> float:
    return math.inf if token == "-" else float(token)


def fmt_triple(t: Triple) -> str:
    return f"{fmt_limit(t.he)} {fmt_limit(t.wi)} {fmt_limit(t.wt)}"


def parse_ints(tokens: Sequence[str], offset: int) -> list[int]:
    try:
        return [int(t) for t in tokens]
    except ValueError as exc:
        raise FormatError(f"expected integers, found {' '.join(tokens)!r}", offset) from exc


def parse_triple(tokens: Sequence[str], offset: int) -> RestrictionTriple:
    try:
        return RestrictionTriple(*(parse_limit(t) for t in tokens))
    except (ValueError, TypeError) as exc:
        raise FormatError(f"bad restriction triple {' '.join(tokens)!r}", offset) from exc


def parse_vehicle(tokens: Sequence[str], offset: int) -> Vehicle:
    try:
        return Vehicle(*(float(t) for t in tokens))
    except (ValueError, TypeError) as exc:
        raise FormatError(f"bad vehicle {' '.join(tokens)!r}", offset) from exc


def _lines(out: list[str]) -> str:
    return "\n".join(out) + "\n"


def read_bytes(path: str | FsPath) -> bytes:
    return FsPath(path).read_bytes()


def write_text(path: str | FsPath, text: str) -> None:
    target = FsPath(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_bytes(text.encode("utf-8"))


# graph


def dump_graph(net: RoadNetwork) -> str:
    out = [f"{net.n_vertices} E={net.n_edges}"]
    out.extend(f"{e.u} {e.v} {e.length} {fmt_triple(e.limits)}" for e in net.edges)
    return _lines(out)


def load_graph(data: bytes) -> RoadNetwork:
    lines = LineReader(data)
    offset, header = lines.next()
    parts = header.split()
    if len(parts) != 2 or not parts[1].startswith("E="):
        raise FormatError("graph header must be '<vertices> E=<edges>'", offset)
    n_vertices, n_edges = parse_ints([parts[0], parts[1][2:]], offset)
    edges = []
    for offset, tokens in lines.rest():
        if len(tokens) != 6:
            raise FormatError("edge lines are 'u v length he wi wt'", offset)
        u, v, length = parse_ints(tokens[:3], offset)
        if not (0 <= u < n_vertices and 0 <= v < n_vertices):
            raise FormatError(f"edge ({u},{v}) outside 0..{n_vertices - 1}", offset)
        limits = parse_triple(tokens[3:], offset)
        try:
            edges.append(Edge(u, v, length, limits))
        except PlannerError as exc:
            raise FormatError(str(exc), offset) from exc
    if len(edges) != n_edges:
        raise FormatError(f"header announces {n_edges} edges, found {len(edges)}", lines.end)
    try:
        return RoadNetwork(n_vertices, edges)
    except PlannerError as exc:
        raise FormatError(str(exc), lines.end) from exc


# traffic


def dump_traffic(traffic: TrafficFlow) -> str:
    out = []
    for i, v in enumerate(traffic.vehicles):
        line = f"{v.he!r} {v.wi!r} {v.wt!r}"
        if traffic.cell_of is not None:
            line += f" {traffic.cell_of[i]}"
        out.append(line)
    return _lines(out)


def load_traffic(data: bytes) -> TrafficFlow:
    vehicles = []
    cells: list[int] = []
    for offset, tokens in LineReader(data).rest():
        if len(tokens) not in (3, 4):
            raise FormatError("traffic lines are 'he wi wt [cell]'", offset)
        if vehicles and (len(tokens) == 4) != bool(cells):
            raise FormatError("cell column must be present on every line or on none", offset)
        vehicles.append(parse_vehicle(tokens[:3], offset))
        if len(tokens) == 4:
            cells.extend(parse_ints(tokens[3:], offset))
    return TrafficFlow(tuple(vehicles), cell_of=tuple(cells) if cells else None)


# queries


def dump_queries(queries: QuerySet) -> str:
    out = [] if queries.seed is None else [f"# seed={queries.seed}"]
    out.extend(f"{q.s} {q.d} {q.vehicle.he!r} {q.vehicle.wi!r} {q.vehicle.wt!r}" for q in queries)
    return _lines(out)


def load_queries(data: bytes) -> QuerySet:
    lines = LineReader(data)
    queries = []
    for offset, tokens in lines.rest():
        if len(tokens) != 5:
            raise FormatError("query lines are 's d he wi wt'", offset)
        s, d = parse_ints(tokens[:2], offset)
        queries.append(Query(s, d, parse_vehicle(tokens[2:], offset)))
    seed = None
    for comment in lines.comments:
        if comment.startswith("seed="):
            seed = int(comment[len("seed="):])
    return QuerySet(tuple(queries), seed=seed)


# partition


def dump_partition(decomp: CellDecomposition) -> str:
    return _lines([f"{v} {c}" for v, c in enumerate(decomp.cell_of)])


def load_partition(net: RoadNetwork, data: bytes) -> CellDecomposition:
    cell_of = [-1] * net.n_vertices
    for offset, tokens in LineReader(data).rest():
        values = parse_ints(tokens, offset)
        if len(values) != 2 or not 0 <= values[0] < net.n_vertices or values[1] < 0:
            raise FormatError("partition lines are 'vertex cell'", offset)
        cell_of[values[0]] = values[1]
    if -1 in cell_of:
        raise FormatError(f"vertex {cell_of.index(-1)} has no cell", len(data))
    try:
        return from_assignment(net, cell_of)
    except PlannerError as exc:
        raise FormatError(str(exc), len(data)) from exc


# debug dumps


def dump_combinations(sets: Sequence[Sequence[RestrictionTriple]]) -> str:
    return _lines([f"{cid} {fmt_triple(rc)}" for cid, rcs in enumerate(sets) for rc in rcs])


def load_combinations(data: bytes, n_cells: int) -> list[tuple[RestrictionTriple, ...]]:
    per_cell: list[set[RestrictionTriple]] = [set() for _ in range(n_cells)]
    for offset, tokens in LineReader(data).rest():
        if len(tokens) != 4:
            raise FormatError("combination lines are 'cell he wi wt'", offset)
        (cid,) = parse_ints(tokens[:1], offset)
        if not 0 <= cid < n_cells:
            raise FormatError(f"cell {cid} outside 0..{n_cells - 1}", offset)
        per_cell[cid].add(parse_triple(tokens[1:], offset))
    return [tuple(sorted(s)) for s in per_cell]


def dump_vectors(rvs: Sequence[Sequence[RepresentationVector]]) -> str:
    return _lines([f"{cid} {fmt_triple(rv)}" for cid, cell_rvs in enumerate(rvs) for rv in cell_rvs])
