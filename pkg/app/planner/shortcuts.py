"""Per-cell shortcut index: build, path pool, presorted matching and the index file format.

A shortcut holds one entry per stored restriction combination that admits a
path between its two boundary vertices. Entries live in a packed numpy record
array sorted by (distance, combination) so that matching is a first-feasible
scan. Vertex sequences are shared through a per-cell ``PathPool``; a path and
its reverse are stored once in canonical orientation.
"""

from __future__ import annotations

import json
import logging
import pathlib
from collections import defaultdict
from collections.abc import Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from multiprocessing import Pool
from typing import Any, NamedTuple

import numpy as np

from app.core.logging_utils import log_event
from app.planner.errors import DanglingRef, FormatError, InvalidParam, UnknownCell
from app.planner.formats import LineReader, fmt_triple, parse_ints, parse_triple
from app.planner.model import Path, RestrictionTriple, Triple, dominates
from app.planner.oracle import cell_shortest_paths
from app.planner.partitioner import Cell, CellDecomposition

logger = logging.getLogger(__name__)

INDEX_VERSION = 1

ENTRY_DTYPE = np.dtype(
    [("rc", np.uint16), ("distance", np.int64), ("path", np.int32), ("reversed", np.bool_)]
)

# (rc id, distance, path id, reversed)
MatchRow = tuple[int, int, int, bool]


class PathPool:
    """Distinct vertex sequences of one cell, keyed by exact sequence."""

    def __init__(self) -> None:
        self._sequences: list[tuple[int, ...]] = []
        self._distances: list[int] = []
        self._lookup: dict[tuple[int, ...], int] = {}

    def add(self, vertices: Sequence[int], distance: int) -> tuple[int, bool]:
        """Intern ``vertices``; returns the pool id and whether it is stored reversed."""
        forward = tuple(vertices)
        backward = forward[::-1]
        canonical = min(forward, backward)
        ref = self._lookup.get(canonical)
        if ref is None:
            ref = len(self._sequences)
            self._sequences.append(canonical)
            self._distances.append(int(distance))
            self._lookup[canonical] = ref
        return ref, canonical != forward

    def get(self, ref: int) -> tuple[tuple[int, ...], int]:
        if not 0 <= ref < len(self._sequences):
            raise DanglingRef(f"path id {ref} not in pool of {len(self._sequences)}")
        return self._sequences[ref], self._distances[ref]

    def path(self, ref: int, reversed_: bool = False) -> Path:
        vertices, distance = self.get(ref)
        return Path(vertices[::-1] if reversed_ else vertices, distance)

    def __len__(self) -> int:
        return len(self._sequences)

    def __iter__(self) -> Iterator[tuple[tuple[int, ...], int]]:
        return iter(zip(self._sequences, self._distances))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PathPool):
            return NotImplemented
        return self._sequences == other._sequences and self._distances == other._distances

    __hash__ = None  # type: ignore[assignment]

    @property
    def total_vertices(self) -> int:
        return sum(len(seq) for seq in self._sequences)


@dataclass(frozen=True)
class ShortcutEntry:
    rc: RestrictionTriple
    path_ref: int
    distance: int
    reversed: bool = False


class Shortcut:
    """Entries between ``src`` and ``dst`` sorted ascending by (distance, rc)."""

    __slots__ = ("src", "dst", "records", "combinations")

    def __init__(
        self,
        src: int,
        dst: int,
        records: np.ndarray,
        combinations: Sequence[RestrictionTriple],
    ) -> None:
        self.src = src
        self.dst = dst
        self.records = records
        self.combinations = combinations

    @classmethod
    def from_rows(
        cls,
        src: int,
        dst: int,
        rows: Sequence[tuple[int, int, int, bool]],
        combinations: Sequence[RestrictionTriple],
    ) -> Shortcut:
        """``rows`` are ``(rc id, distance, path id, reversed)``; sorted here."""
        records = np.array(rows, dtype=ENTRY_DTYPE)
        order = np.lexsort((records["rc"], records["distance"]))
        rc_ids = records["rc"][order]
        if len(rc_ids) != len(np.unique(rc_ids)):
            raise InvalidParam(f"shortcut ({src},{dst}) holds a combination twice")
        return cls(src, dst, records[order], combinations)

    def __len__(self) -> int:
        return len(self.records)

    def __repr__(self) -> str:
        return f"Shortcut(src={self.src}, dst={self.dst}, entries={len(self.records)})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Shortcut):
            return NotImplemented
        return (
            self.src == other.src
            and self.dst == other.dst
            and tuple(self.combinations) == tuple(other.combinations)
            and np.array_equal(self.records, other.records)
        )

    __hash__ = None  # type: ignore[assignment]

    def entry(self, position: int) -> ShortcutEntry:
        rec = self.records[position]
        return ShortcutEntry(
            rc=self.combinations[int(rec["rc"])],
            path_ref=int(rec["path"]),
            distance=int(rec["distance"]),
            reversed=bool(rec["reversed"]),
        )

    @property
    def entries(self) -> tuple[ShortcutEntry, ...]:
        return tuple(self.entry(i) for i in range(len(self.records)))

    def first_feasible(self, fits: np.ndarray) -> tuple[int | None, int]:
        """Position of the first entry whose combination is flagged in ``fits`` and the count scanned."""
        if not len(self.records):
            return None, 0
        hits = fits[self.records["rc"]]
        pos = int(np.argmax(hits))
        if not hits[pos]:
            return None, len(self.records)
        return pos, pos + 1


def combination_fits(combinations: np.ndarray, vehicle: Triple) -> np.ndarray:
    """Boolean mask of the combinations (rows of he, wi, wt) that dominate ``vehicle``."""
    if not len(combinations):
        return np.zeros(0, dtype=bool)
    return (combinations >= np.array([vehicle.he, vehicle.wi, vehicle.wt])).all(axis=1)


def _as_matrix(combinations: Sequence[RestrictionTriple]) -> np.ndarray:
    return np.asarray([rc.as_tuple() for rc in combinations], dtype=float).reshape(-1, 3)


def match(shortcut: Shortcut, c: Triple) -> tuple[ShortcutEntry | None, int]:
    """First entry in presorted order that dominates ``c``, plus the number of entries scanned."""
    fits = combination_fits(_as_matrix(shortcut.combinations), c)
    pos, scanned = shortcut.first_feasible(fits)
    return (None if pos is None else shortcut.entry(pos)), scanned


def match_full_scan(shortcut: Shortcut, c: Triple) -> tuple[ShortcutEntry | None, int]:
    """Look at every entry and keep the shortest feasible one; ties go to the smaller combination."""
    best: ShortcutEntry | None = None
    for entry in shortcut.entries:
        if not dominates(c, entry.rc):
            continue
        if best is None or (entry.distance, entry.rc) < (best.distance, best.rc):
            best = entry
    return best, len(shortcut)


@dataclass(frozen=True, eq=False)
class CellShortcuts:
    cell_id: int
    combinations: tuple[RestrictionTriple, ...]
    pool: PathPool
    shortcuts: dict[tuple[int, int], Shortcut] = field(default_factory=dict)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CellShortcuts):
            return NotImplemented
        return (
            self.cell_id == other.cell_id
            and self.combinations == other.combinations
            and self.pool == other.pool
            and self.shortcuts == other.shortcuts
        )

    __hash__ = None  # type: ignore[assignment]

    @cached_property
    def combination_matrix(self) -> np.ndarray:
        return _as_matrix(self.combinations)

    @cached_property
    def by_source(self) -> dict[int, tuple[Shortcut, ...]]:
        grouped: dict[int, list[Shortcut]] = defaultdict(list)
        for (src, _), shortcut in sorted(self.shortcuts.items()):
            grouped[src].append(shortcut)
        return {src: tuple(items) for src, items in grouped.items()}

    @cached_property
    def match_rows(self) -> dict[int, tuple[tuple[int, tuple[MatchRow, ...], Shortcut], ...]]:
        """Per source vertex: ``(dst, rows, shortcut)`` with the rows as plain tuples in presorted order."""
        table: dict[int, tuple[tuple[int, tuple[MatchRow, ...], Shortcut], ...]] = {}
        for src, shortcuts in self.by_source.items():
            table[src] = tuple(
                (
                    shortcut.dst,
                    tuple(
                        zip(
                            shortcut.records["rc"].tolist(),
                            shortcut.records["distance"].tolist(),
                            shortcut.records["path"].tolist(),
                            shortcut.records["reversed"].tolist(),
                        )
                    ),
                    shortcut,
                )
                for shortcut in shortcuts
            )
        return table

    def fits(self, vehicle: Triple) -> np.ndarray:
        return combination_fits(self.combination_matrix, vehicle)

    def path(self, entry: ShortcutEntry, shortcut: Shortcut) -> Path:
        path = self.pool.path(entry.path_ref, entry.reversed)
        if path.source != shortcut.src or path.target != shortcut.dst:
            raise DanglingRef(
                f"pool path {entry.path_ref} does not join {shortcut.src} and {shortcut.dst}"
            )
        return path


def _feasible_mask(cell: Cell, rc: RestrictionTriple) -> bytes:
    return bytes(
        rc.he <= e.limits.he and rc.wi <= e.limits.wi and rc.wt <= e.limits.wt for e in cell.edges
    )


def build_cell_shortcuts(
    cell: Cell,
    boundary: frozenset[int],
    combinations: Sequence[RestrictionTriple],
) -> CellShortcuts:
    """Shortest paths between every ordered boundary pair for every combination.

    Combinations with the same feasible edge set share one search per source
    vertex. Pairs a combination cannot connect get no entry for it.
    """
    combos = tuple(sorted(set(combinations)))
    if len(combos) > np.iinfo(np.uint16).max:
        raise InvalidParam(f"cell {cell.id} has too many combinations ({len(combos)})")
    pool = PathPool()
    rows: dict[tuple[int, int], list[tuple[int, int, int, bool]]] = defaultdict(list)
    groups: dict[bytes, list[int]] = defaultdict(list)
    for rc_id, rc in enumerate(combos):
        groups[_feasible_mask(cell, rc)].append(rc_id)

    sources = sorted(boundary)
    for mask, rc_ids in groups.items():
        if not any(mask):
            continue
        representative = combos[rc_ids[0]]
        for u in sources:
            paths = cell_shortest_paths(cell, u, sources, representative)
            for v, path in sorted(paths.items()):
                ref, reversed_ = pool.add(path.vertices, path.distance)
                rows[(u, v)].extend((rc_id, path.distance, ref, reversed_) for rc_id in rc_ids)

    shortcuts = {
        pair: Shortcut.from_rows(pair[0], pair[1], pair_rows, combos)
        for pair, pair_rows in sorted(rows.items())
    }
    return CellShortcuts(cell_id=cell.id, combinations=combos, pool=pool, shortcuts=shortcuts)


def _build_job(job: tuple[Cell, frozenset[int], tuple[RestrictionTriple, ...]]) -> CellShortcuts:
    return build_cell_shortcuts(*job)


@dataclass(frozen=True)
class IndexMeta:
    """Build provenance; ``params`` is canonical JSON so equal builds compare equal."""

    strategy: str
    seed: int
    fingerprint: str
    params: str = "{}"
    version: int = INDEX_VERSION

    @classmethod
    def create(
        cls, strategy: str, seed: int, fingerprint: str, params: Mapping[str, Any] | None = None
    ) -> IndexMeta:
        text = json.dumps(dict(params or {}), sort_keys=True, separators=(",", ":"))
        return cls(strategy=strategy, seed=seed, fingerprint=fingerprint, params=text)

    @property
    def params_dict(self) -> dict[str, Any]:
        return json.loads(self.params)


@dataclass(frozen=True)
class ShortcutIndex:
    cells: tuple[CellShortcuts, ...]
    cell_of: tuple[int, ...]
    meta: IndexMeta

    def cell(self, cell_id: int) -> CellShortcuts:
        if not 0 <= cell_id < len(self.cells):
            raise UnknownCell(f"cell {cell_id} not in index of {len(self.cells)} cells")
        return self.cells[cell_id]

    @property
    def n_shortcuts(self) -> int:
        return sum(len(c.shortcuts) for c in self.cells)


def build_index(
    decomp: CellDecomposition,
    combinations: Sequence[Sequence[RestrictionTriple]],
    strategy: str,
    params: Mapping[str, Any] | None = None,
    seed: int = 0,
    workers: int = 1,
) -> ShortcutIndex:
    """Build every cell's shortcuts; ``workers > 1`` spreads cells over processes."""
    if len(combinations) != decomp.n_cells:
        raise InvalidParam(f"{len(combinations)} combination sets for {decomp.n_cells} cells")
    if workers < 1:
        raise InvalidParam("workers must be >= 1")
    jobs = [
        (cell, decomp.boundary[cell.id], tuple(combos))
        for cell, combos in zip(decomp.cells, combinations)
    ]
    if workers > 1 and len(jobs) > 1:
        with Pool(workers) as pool:
            cells = pool.map(_build_job, jobs, chunksize=max(1, len(jobs) // (4 * workers)))
    else:
        cells = [_build_job(job) for job in jobs]
    meta = IndexMeta.create(strategy, seed, decomp.fingerprint, params)
    index = ShortcutIndex(cells=tuple(cells), cell_of=decomp.cell_of, meta=meta)
    stats = storage_stats(index)
    log_event(
        logger,
        "build_index",
        strategy=strategy,
        cells=decomp.n_cells,
        shortcuts=index.n_shortcuts,
        entries=stats.total_entries,
        distinct_paths=stats.distinct_paths,
        workers=workers,
    )
    return index


class StorageStats(NamedTuple):
    total_entries: int
    distinct_paths: int
    total_path_vertices: int
    unpooled_path_vertices: int


def storage_stats(index: ShortcutIndex) -> StorageStats:
    total_entries = distinct = pooled = unpooled = 0
    for cell in index.cells:
        distinct += len(cell.pool)
        pooled += cell.pool.total_vertices
        lengths = np.asarray([len(seq) for seq, _ in cell.pool], dtype=np.int64)
        for shortcut in cell.shortcuts.values():
            total_entries += len(shortcut)
            unpooled += int(lengths[shortcut.records["path"]].sum())
    return StorageStats(total_entries, distinct, pooled, unpooled)


def monotonicity_violations(shortcut: Shortcut) -> int:
    """Comparable entry pairs (rc1 <= rc2) where the smaller combination has the longer path."""
    if len(shortcut) < 2:
        return 0
    rcs = _as_matrix(shortcut.combinations)[shortcut.records["rc"]]
    dist = shortcut.records["distance"]
    leq = (rcs[:, None, :] <= rcs[None, :, :]).all(axis=2)
    return int((leq & (dist[:, None] > dist[None, :])).sum())


def infeasible_entries(cell: Cell, cell_shortcuts: CellShortcuts) -> int:
    """Entries whose pooled path uses an edge its own combination cannot pass."""
    limits: dict[tuple[int, int], RestrictionTriple] = {(e.u, e.v): e.limits for e in cell.edges}
    bad = 0
    for shortcut in cell_shortcuts.shortcuts.values():
        for entry in shortcut.entries:
            vertices = cell_shortcuts.path(entry, shortcut).vertices
            for a, b in zip(vertices, vertices[1:]):
                lim = limits.get((a, b) if a < b else (b, a))
                if lim is None or not dominates(entry.rc, lim):
                    bad += 1
                    break
    return bad


def serialize(index: ShortcutIndex) -> bytes:
    meta = index.meta
    out = [
        "# restriction-aware shortcut index",
        "[meta]",
        f"version {meta.version}",
        f"strategy {meta.strategy}",
        f"seed {meta.seed}",
        f"fingerprint {meta.fingerprint}",
        f"params {meta.params}",
        f"vertices {len(index.cell_of)}",
        f"cells {len(index.cells)}",
        "[partition]",
    ]
    out.extend(f"{v} {c}" for v, c in enumerate(index.cell_of))
    for cell in index.cells:
        out.append(f"[combinations cell={cell.cell_id}]")
        out.extend(fmt_triple(rc) for rc in cell.combinations)
        out.append(f"[pool cell={cell.cell_id}]")
        for ref, (seq, distance) in enumerate(cell.pool):
            out.append(f"{ref} {distance} " + " ".join(map(str, seq)))
        out.append(f"[shortcuts cell={cell.cell_id}]")
        for (src, dst), shortcut in sorted(cell.shortcuts.items()):
            for entry in shortcut.entries:
                flag = "-" if entry.reversed else "+"
                out.append(f"{src} {dst} {fmt_triple(entry.rc)} {entry.path_ref} {flag}")
    out.append("[end]")
    return ("\n".join(out) + "\n").encode("utf-8")


def deserialize(data: bytes) -> ShortcutIndex:
    lines = LineReader(data)
    meta_offset = lines.expect("[meta]")
    fields: dict[str, str] = {}
    for offset, tokens in lines.body():
        if len(tokens) < 2:
            raise FormatError("meta lines are 'key value'", offset)
        fields[tokens[0]] = " ".join(tokens[1:])
    try:
        version = int(fields["version"])
        n_vertices = int(fields["vertices"])
        n_cells = int(fields["cells"])
        meta = IndexMeta(
            strategy=fields["strategy"],
            seed=int(fields["seed"]),
            fingerprint=fields["fingerprint"],
            params=fields.get("params", "{}"),
            version=version,
        )
    except (KeyError, ValueError) as exc:
        raise FormatError(f"incomplete or invalid [meta]: {exc}", meta_offset) from exc
    if version != INDEX_VERSION:
        raise FormatError(f"unsupported index version {version}", meta_offset)

    partition_offset = lines.expect("[partition]")
    cell_of = [-1] * n_vertices
    for offset, tokens in lines.body():
        values = parse_ints(tokens, offset)
        if len(values) != 2 or not 0 <= values[0] < n_vertices or not 0 <= values[1] < n_cells:
            raise FormatError("partition lines are 'vertex cell'", offset)
        cell_of[values[0]] = values[1]
    if -1 in cell_of:
        raise FormatError("partition does not cover every vertex", partition_offset)

    cells = [_read_cell(lines, cid) for cid in range(n_cells)]
    lines.expect("[end]")
    return ShortcutIndex(cells=tuple(cells), cell_of=tuple(cell_of), meta=meta)


def _read_cell(lines: LineReader, cid: int) -> CellShortcuts:
    section = lines.expect(f"[combinations cell={cid}]")
    combos = []
    for offset, tokens in lines.body():
        if len(tokens) != 3:
            raise FormatError("combination lines are 'he wi wt'", offset)
        combos.append(parse_triple(tokens, offset))
    if combos != sorted(set(combos)):
        raise FormatError(f"combinations of cell {cid} are not sorted and distinct", section)
    rc_id = {rc: i for i, rc in enumerate(combos)}

    lines.expect(f"[pool cell={cid}]")
    pool = PathPool()
    for offset, tokens in lines.body():
        values = parse_ints(tokens, offset)
        if len(values) < 4 or values[0] != len(pool):
            raise FormatError("pool lines are 'id distance v0 v1 ...' with consecutive ids", offset)
        ref, reversed_ = pool.add(values[2:], values[1])
        if ref != values[0] or reversed_:
            raise FormatError("pool sequences must be distinct and canonical", offset)

    lines.expect(f"[shortcuts cell={cid}]")
    rows: dict[tuple[int, int], list[tuple[int, int, int, bool]]] = defaultdict(list)
    for offset, tokens in lines.body():
        if len(tokens) != 7 or tokens[6] not in ("+", "-"):
            raise FormatError("shortcut lines are 'src dst he wi wt path_id +|-'", offset)
        src, dst, ref = parse_ints([tokens[0], tokens[1], tokens[5]], offset)
        rc = parse_triple(tokens[2:5], offset)
        if rc not in rc_id:
            raise FormatError(f"combination {tokens[2:5]} not listed for cell {cid}", offset)
        try:
            seq, distance = pool.get(ref)
        except DanglingRef as exc:
            raise FormatError(str(exc), offset) from exc
        reversed_ = tokens[6] == "-"
        ends = (seq[-1], seq[0]) if reversed_ else (seq[0], seq[-1])
        if ends != (src, dst):
            raise FormatError(f"path {ref} does not join {src} and {dst}", offset)
        rows[(src, dst)].append((rc_id[rc], distance, ref, reversed_))
    try:
        shortcuts = {
            pair: Shortcut.from_rows(pair[0], pair[1], pair_rows, tuple(combos))
            for pair, pair_rows in sorted(rows.items())
        }
    except InvalidParam as exc:
        raise FormatError(str(exc), section) from exc
    return CellShortcuts(cell_id=cid, combinations=tuple(combos), pool=pool, shortcuts=shortcuts)


def save_index(index: ShortcutIndex, path: str | pathlib.Path) -> None:
    pathlib.Path(path).write_bytes(serialize(index))


def load_index(path: str | pathlib.Path) -> ShortcutIndex:
    return deserialize(pathlib.Path(path).read_bytes())
