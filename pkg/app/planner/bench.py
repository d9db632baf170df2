"""Benchmark harness: replay a query set against indices and report quality, speed and storage."""

from __future__ import annotations

import json
import logging
import time
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path as FsPath
from typing import Any, Dict, List, Optional

import pandas as pd
from pydantic import BaseModel, Field

from app.core.logging_utils import log_event
from app.planner.combinations import BuildParams, Strategy
from app.planner.datagen import TrafficFlow
from app.planner.errors import InvalidParam, MismatchedIndex
from app.planner.model import Path, QuerySet, RoadNetwork
from app.planner.oracle import restricted_dijkstra
from app.planner.partitioner import CellDecomposition
from app.planner.pipeline import build_strategy_index, matched_random_params
from app.planner.query import QueryStatus, plan
from app.planner.shortcuts import ShortcutIndex, storage_stats

logger = logging.getLogger(__name__)

BASELINE = "dijkstra"
TIMING_COLUMNS = ("mean_query_time", "mean_oracle_time")


class Metrics(BaseModel):
    strategy: str
    params: Dict[str, Any] = Field(default_factory=dict)
    query_count: int = 0
    mean_query_time: float = 0.0
    mean_oracle_time: float = 0.0
    mean_error_rate: float = Field(0.0, ge=0.0)
    failure_rate: float = Field(0.0, ge=0.0, le=1.0)
    optimal_proportion: float = Field(0.0, ge=0.0, le=1.0)
    unreachable_count: int = 0
    total_entries: int = 0
    distinct_paths: int = 0
    total_path_vertices: int = 0
    unpooled_path_vertices: int = 0
    mean_scanned_entries: float = 0.0
    mean_full_scan_entries: float = 0.0
    mean_entries_per_shortcut: float = 0.0
    match_count: int = 0
    match_mismatches: int = 0


class QueryRecord(BaseModel):
    s: int
    d: int
    status: str
    distance: Optional[int]
    oracle_distance: Optional[int]
    scanned_entries: int = 0
    seconds: float = 0.0


class StrategyRun(BaseModel):
    metrics: Metrics
    queries: List[QueryRecord] = Field(default_factory=list)


class BenchReport(BaseModel):
    seed: Optional[int] = None
    runs: List[StrategyRun] = Field(default_factory=list)

    @property
    def rows(self) -> list[Metrics]:
        return [run.metrics for run in self.runs]

    def row(self, strategy: str) -> Metrics:
        for run in self.runs:
            if run.metrics.strategy == strategy:
                return run.metrics
        raise KeyError(strategy)


@dataclass(frozen=True)
class OracleAnswer:
    path: Path | None
    seconds: float

    @property
    def distance(self) -> int | None:
        return None if self.path is None else self.path.distance


def oracle_answers(net: RoadNetwork, queries: QuerySet, warmup: int = 0) -> list[OracleAnswer]:
    """Exact answers and their timings for every query."""
    for query in list(queries)[:warmup]:
        restricted_dijkstra(net, query.s, query.d, query.vehicle)
    answers = []
    for query in queries:
        start = time.perf_counter()
        path = restricted_dijkstra(net, query.s, query.d, query.vehicle)
        answers.append(OracleAnswer(path, time.perf_counter() - start))
    return answers


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def evaluate(
    net: RoadNetwork,
    decomp: CellDecomposition,
    index: ShortcutIndex,
    queries: QuerySet,
    oracle: Sequence[OracleAnswer] | None = None,
    warmup: int = 0,
    verify_matches: bool = True,
) -> StrategyRun:
    """Replay ``queries`` through ``plan`` and compare every answer with the exact one.

    Timings come from a pass without match verification; with ``verify_matches``
    every query is replayed once more, untimed, to count presorted matches that
    disagree with a full scan.
    """
    if index.meta.fingerprint != decomp.fingerprint or index.cell_of != decomp.cell_of:
        raise MismatchedIndex(
            f"index built for partition {index.meta.fingerprint}, got {decomp.fingerprint}"
        )
    if oracle is None:
        oracle = oracle_answers(net, queries, warmup)
    if len(oracle) != len(queries):
        raise InvalidParam("oracle answers must align with the query set")

    for query in list(queries)[:warmup]:
        plan(net, decomp, index, query)

    records = []
    errors: list[float] = []
    seconds: list[float] = []
    failures = optimal = unreachable = scanned = full_scan = matches = mismatches = 0
    for query, exact in zip(queries, oracle):
        result = plan(net, decomp, index, query, verify_matches=False)
        seconds.append(result.seconds)
        scanned += result.scanned_entries
        full_scan += result.full_scan_entries
        matches += result.matches
        if verify_matches:
            mismatches += plan(net, decomp, index, query, verify_matches=True).match_mismatches
        if result.status is QueryStatus.fallback:
            failures += 1
        elif result.distance == exact.distance:
            optimal += 1
        if result.status is QueryStatus.no_path:
            unreachable += 1
        if result.status is QueryStatus.overlay and exact.distance is not None:
            gap = result.distance - exact.distance
            errors.append(gap / exact.distance if exact.distance else 0.0)
        records.append(
            QueryRecord(
                s=query.s,
                d=query.d,
                status=result.status.value,
                distance=result.distance,
                oracle_distance=exact.distance,
                scanned_entries=result.scanned_entries,
                seconds=result.seconds,
            )
        )

    n = len(queries)
    stats = storage_stats(index)
    metrics = Metrics(
        strategy=index.meta.strategy,
        params=index.meta.params_dict,
        query_count=n,
        mean_query_time=_mean(seconds),
        mean_oracle_time=_mean([a.seconds for a in oracle]),
        mean_error_rate=_mean(errors),
        failure_rate=failures / n if n else 0.0,
        optimal_proportion=optimal / n if n else 0.0,
        unreachable_count=unreachable,
        total_entries=stats.total_entries,
        distinct_paths=stats.distinct_paths,
        total_path_vertices=stats.total_path_vertices,
        unpooled_path_vertices=stats.unpooled_path_vertices,
        mean_scanned_entries=scanned / matches if matches else 0.0,
        mean_full_scan_entries=full_scan / matches if matches else 0.0,
        mean_entries_per_shortcut=stats.total_entries / index.n_shortcuts if index.n_shortcuts else 0.0,
        match_count=matches,
        match_mismatches=mismatches,
    )
    log_event(
        logger,
        "evaluate",
        strategy=metrics.strategy,
        queries=n,
        failure_rate=metrics.failure_rate,
        optimal=metrics.optimal_proportion,
        mean_query_time=metrics.mean_query_time,
    )
    return StrategyRun(metrics=metrics, queries=records)


def evaluate_baseline(queries: QuerySet, oracle: Sequence[OracleAnswer]) -> StrategyRun:
    """The plain restricted Dijkstra row: exact by construction, no index."""
    n = len(queries)
    mean_time = _mean([a.seconds for a in oracle])
    unreachable = sum(1 for a in oracle if a.path is None)
    records = [
        QueryRecord(
            s=q.s,
            d=q.d,
            status=QueryStatus.exact.value if a.path is not None else QueryStatus.no_path.value,
            distance=a.distance,
            oracle_distance=a.distance,
            seconds=a.seconds,
        )
        for q, a in zip(queries, oracle)
    ]
    metrics = Metrics(
        strategy=BASELINE,
        query_count=n,
        mean_query_time=mean_time,
        mean_oracle_time=mean_time,
        optimal_proportion=1.0 if n else 0.0,
        unreachable_count=unreachable,
    )
    return StrategyRun(metrics=metrics, queries=records)


def compare(
    strategies: Sequence[str],
    net: RoadNetwork,
    decomp: CellDecomposition,
    traffic: TrafficFlow,
    queries: QuerySet,
    params: BuildParams,
    workers: int = 1,
    warmup: int = 0,
    match_trapp_budget: bool = True,
) -> BenchReport:
    """One row per strategy over the same network, cells and queries.

    With ``match_trapp_budget`` the Random build takes, per cell, as many
    combinations as the TRAPP build selected.
    """
    if not strategies:
        raise InvalidParam("at least one strategy is required")
    names = list(dict.fromkeys(strategies))
    unknown = [s for s in names if s != BASELINE and s not in Strategy._value2member_map_]
    if unknown:
        raise InvalidParam(f"unknown strategies: {', '.join(unknown)}")

    oracle = oracle_answers(net, queries, warmup)
    indices: dict[str, ShortcutIndex] = {}

    def index_for(name: str) -> ShortcutIndex:
        if name not in indices:
            build = params.model_copy(update={"strategy": Strategy(name)})
            if name == Strategy.random.value and match_trapp_budget:
                build = matched_random_params(index_for(Strategy.trapp.value), params)
            indices[name] = build_strategy_index(decomp, traffic, build, workers)
        return indices[name]

    report = BenchReport(seed=queries.seed)
    for name in names:
        if name == BASELINE:
            report.runs.append(evaluate_baseline(queries, oracle))
        else:
            report.runs.append(evaluate(net, decomp, index_for(name), queries, oracle, warmup))
    return report


def metrics_frame(report: BenchReport) -> pd.DataFrame:
    rows = []
    for metrics in report.rows:
        row = metrics.model_dump()
        row["params"] = json.dumps(row["params"], sort_keys=True)
        rows.append(row)
    return pd.DataFrame(rows, columns=list(Metrics.model_fields))


def write_report(report: BenchReport, out_dir: str | FsPath, tag: str = "") -> tuple[FsPath, FsPath]:
    """Write ``metrics{tag}.csv`` (one row per strategy) and ``details{tag}.json``."""
    out = FsPath(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"metrics{tag}.csv"
    json_path = out / f"details{tag}.json"
    metrics_frame(report).to_csv(csv_path, index=False, float_format="%.9g")
    json_path.write_text(report.model_dump_json(indent=2), encoding="utf-8")
    log_event(logger, "write_report", csv=csv_path, json=json_path, rows=len(report.runs))
    return csv_path, json_path
