"""Per-cell restriction combinations: catalogs, RV mapping, rematch and baselines."""

from __future__ import annotations

import bisect
import itertools
import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, Field

from app.core.logging_utils import log_event
from app.planner.clustering import RepresentationVector, representation_vectors_all
from app.planner.datagen import TrafficFlow
from app.planner.errors import InvalidParam
from app.planner.model import INF, RestrictionTriple, Triple, Vehicle
from app.planner.partitioner import Cell, CellDecomposition

logger = logging.getLogger(__name__)

KINDS = ("he", "wi", "wt")

# Sorted, duplicate-free tuple of triples.
CombinationSet = tuple[RestrictionTriple, ...]


class Strategy(str, Enum):
    all = "all"
    random = "random"
    trapp = "trapp"
    trapp_no_cr = "trapp-no-cr"
    trapp_no_pr = "trapp-no-pr"
    trapp_no_cr_pr = "trapp-no-cr-pr"


class BuildParams(BaseModel):
    strategy: Strategy = Strategy.trapp
    k: int = Field(30, ge=1)
    f: float = Field(0.03, ge=0.0, le=1.0)
    max_iters: int = Field(100, ge=1)
    random_budget: int = Field(30, ge=0)
    # Per-cell Random budgets; overrides ``random_budget`` when set.
    random_budgets: Optional[List[int]] = None
    seed: int = Field(0, ge=0)


@dataclass(frozen=True)
class RestrictionCatalog:
    """Distinct limits per type on a cell's edges, ascending, with ``inf`` last when some edge lacks one."""

    he: tuple[float, ...]
    wi: tuple[float, ...]
    wt: tuple[float, ...]

    def __post_init__(self) -> None:
        for kind in KINDS:
            values = getattr(self, kind)
            if not values or any(a >= b for a, b in zip(values, values[1:])):
                raise InvalidParam(f"catalog {kind} values must be non-empty and strictly increasing")

    def values(self, kind: str) -> tuple[float, ...]:
        return getattr(self, kind)

    @property
    def size(self) -> int:
        return len(self.he) * len(self.wi) * len(self.wt)

    def __contains__(self, rc: object) -> bool:
        return isinstance(rc, RestrictionTriple) and all(
            getattr(rc, kind) in self.values(kind) for kind in KINDS
        )


def combination_set(triples: Iterable[RestrictionTriple]) -> CombinationSet:
    return tuple(sorted(set(triples)))


def collect_catalog(cell: Cell) -> RestrictionCatalog:
    per_kind: dict[str, tuple[float, ...]] = {}
    for kind in KINDS:
        limits = [getattr(edge.limits, kind) for edge in cell.edges]
        values = sorted({x for x in limits if math.isfinite(x)})
        if not values or any(not math.isfinite(x) for x in limits):
            values.append(INF)
        per_kind[kind] = tuple(values)
    return RestrictionCatalog(**per_kind)


def _nearest(value: float, finite: Sequence[float]) -> float:
    """Closest catalog value by absolute difference; ties go to the larger value."""
    pos = bisect.bisect_left(finite, value)
    if pos == 0:
        return finite[0]
    if pos == len(finite):
        return finite[-1]
    below, above = finite[pos - 1], finite[pos]
    return above if above - value <= value - below else below


def map_vector(rv: Triple, cat: RestrictionCatalog) -> RestrictionTriple:
    mapped = []
    for kind in KINDS:
        finite = [x for x in cat.values(kind) if math.isfinite(x)]
        mapped.append(_nearest(getattr(rv, kind), finite) if finite else INF)
    return RestrictionTriple(*mapped)


def refine_all(
    rvs: Sequence[Sequence[RepresentationVector]],
    catalogs: Sequence[RestrictionCatalog],
) -> list[CombinationSet]:
    if len(rvs) != len(catalogs):
        raise InvalidParam("RV lists and catalogs must be aligned by cell")
    return [
        combination_set(map_vector(rv, cat) for rv in cell_rvs)
        for cell_rvs, cat in zip(rvs, catalogs)
    ]


class _Coverage:
    """Vehicle/combination domination matrix of a snapshot, for repeated θ evaluations."""

    def __init__(self, combinations: Sequence[RestrictionTriple], vehicles: Sequence[Vehicle]) -> None:
        self.rcs = np.asarray([rc.as_tuple() for rc in combinations], dtype=float).reshape(-1, 3)
        self.vehicles = np.asarray([v.as_tuple() for v in vehicles], dtype=float).reshape(-1, 3)
        self.dominated = (self.vehicles[:, None, :] <= self.rcs[None, :, :]).all(axis=2)

    def theta(self, rc: RestrictionTriple) -> int:
        if not len(self.vehicles):
            return 0
        r = np.asarray(rc.as_tuple(), dtype=float)
        fits = (self.vehicles <= r).all(axis=1)
        smaller = (self.rcs <= r).all(axis=1)
        covered = self.dominated[:, smaller].any(axis=1)
        return int((fits & ~covered).sum())


def theta(
    rc: RestrictionTriple,
    combinations: Sequence[RestrictionTriple],
    cell_traffic: Sequence[Vehicle],
) -> int:
    """Vehicles dominated by ``rc`` that no componentwise-smaller existing combination already serves."""
    return _Coverage(combinations, cell_traffic).theta(rc)


def rematch(
    combinations: Sequence[RestrictionTriple],
    cell_traffic: Sequence[Vehicle],
    f: float,
    cat: RestrictionCatalog | None = None,
) -> CombinationSet:
    """Swap single attributes with the 1st/2nd sorted neighbour values of the snapshot.

    A candidate is kept when θ reaches ``f * len(cell_traffic)``. Candidates are
    generated from the input snapshot only (added triples are not rematched
    again). With a catalog, candidates outside it are dropped.
    """
    if not 0.0 <= f <= 1.0:
        raise InvalidParam(f"f must lie in [0, 1], got {f}")
    snapshot = combination_set(combinations)
    if not snapshot or not cell_traffic:
        return snapshot
    coverage = _Coverage(snapshot, cell_traffic)
    threshold = f * len(cell_traffic)
    values = {kind: sorted({getattr(rc, kind) for rc in snapshot}) for kind in KINDS}
    existing = set(snapshot)
    kept: set[RestrictionTriple] = set()
    for rc in snapshot:
        for kind in KINDS:
            axis = values[kind]
            pos = axis.index(getattr(rc, kind))
            for j in (1, 2):
                for idx in (pos + j, pos - j):
                    if not 0 <= idx < len(axis):
                        continue
                    candidate = RestrictionTriple(**{**_fields(rc), kind: axis[idx]})
                    if candidate in existing or candidate in kept:
                        continue
                    if cat is not None and candidate not in cat:
                        continue
                    if coverage.theta(candidate) >= threshold:
                        kept.add(candidate)
    return combination_set(existing | kept)


def _fields(rc: RestrictionTriple) -> dict[str, float]:
    return {"he": rc.he, "wi": rc.wi, "wt": rc.wt}


def all_combinations(cat: RestrictionCatalog) -> CombinationSet:
    return tuple(RestrictionTriple(he, wi, wt) for he, wi, wt in itertools.product(cat.he, cat.wi, cat.wt))


def random_combinations(
    cat: RestrictionCatalog,
    budget: int,
    seed: int | Sequence[int] = 0,
) -> CombinationSet:
    """Uniform sample without replacement of ``min(budget, |all|)`` combinations."""
    if budget < 0:
        raise InvalidParam("budget must be non-negative")
    full = all_combinations(cat)
    take = min(budget, len(full))
    picks = np.random.default_rng(seed).choice(len(full), size=take, replace=False)
    return combination_set(full[i] for i in picks.tolist())


def select_combinations(
    decomp: CellDecomposition,
    traffic: TrafficFlow | None,
    params: BuildParams,
) -> list[CombinationSet]:
    """Run the combination pipeline of ``params.strategy`` for every cell."""
    catalogs = [collect_catalog(cell) for cell in decomp.cells]
    strategy = params.strategy
    if strategy is Strategy.all:
        sets = [all_combinations(cat) for cat in catalogs]
    elif strategy is Strategy.random:
        budgets = params.random_budgets or [params.random_budget] * decomp.n_cells
        if len(budgets) != decomp.n_cells:
            raise InvalidParam("one Random budget per cell is required")
        sets = [
            random_combinations(cat, budget, (params.seed, cell.id))
            for cat, budget, cell in zip(catalogs, budgets, decomp.cells)
        ]
    else:
        if traffic is None or not traffic.vehicles:
            raise InvalidParam(f"strategy {strategy.value} needs a traffic flow")
        rvs = representation_vectors_all(decomp, traffic, params.k, params.seed, params.max_iters)
        refine = strategy in (Strategy.trapp, Strategy.trapp_no_cr)
        if refine:
            sets = refine_all(rvs, catalogs)
        else:
            sets = [combination_set(rv.as_triple() for rv in cell_rvs) for cell_rvs in rvs]
        if strategy in (Strategy.trapp, Strategy.trapp_no_pr):
            sets = [
                rematch(rc_set, traffic.for_cell(cell.id), params.f, cat if refine else None)
                for rc_set, cell, cat in zip(sets, decomp.cells, catalogs)
            ]
    log_event(
        logger,
        "select_combinations",
        strategy=strategy.value,
        cells=decomp.n_cells,
        combinations=sum(len(s) for s in sets),
    )
    return sets