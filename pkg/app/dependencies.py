"""Reusable dependency functions for FastAPI routes."""

import json
import threading
from functools import lru_cache
from typing import AsyncGenerator

from fastapi import HTTPException, status
from sqlalchemy.ext.asyncio import AsyncSession

from app.database import get_session
from app.models import Dataset as DatasetRecord
from app.models import DatasetSource, IndexBuild
from app.planner import formats
from app.planner.combinations import BuildParams
from app.planner.datagen import RestrictionPalette
from app.planner.errors import (
    FormatError,
    Infeasible,
    InvalidParam,
    MismatchedIndex,
    NonAdjacent,
    PlannerError,
)
from app.planner.partitioner import partition
from app.planner.pipeline import Dataset, DatasetParams, build_strategy_index, generate_dataset
from app.planner.shortcuts import ShortcutIndex


async def get_db_session() -> AsyncGenerator[AsyncSession, None]:
    async with get_session() as session:  # type: ignore[call-arg]
        yield session


class ArtifactRegistry:
    """In-memory datasets and indices keyed by their registry row ids.

    Every artifact is a pure function of its stored parameters, so a miss
    (e.g. after a restart) rebuilds it from the row.
    """

    def __init__(self) -> None:
        self._datasets: dict[int, Dataset] = {}
        self._indices: dict[int, ShortcutIndex] = {}
        self._lock = threading.Lock()

    def put_dataset(self, dataset_id: int, dataset: Dataset) -> None:
        with self._lock:
            self._datasets[dataset_id] = dataset

    def put_index(self, index_id: int, index: ShortcutIndex) -> None:
        with self._lock:
            self._indices[index_id] = index

    def dataset(self, record: DatasetRecord) -> Dataset:
        with self._lock:
            cached = self._datasets.get(record.id)
        if cached is None:
            cached = rebuild_dataset(record)
            self.put_dataset(record.id, cached)
        return cached

    def index(self, record: IndexBuild, dataset_record: DatasetRecord) -> ShortcutIndex:
        with self._lock:
            cached = self._indices.get(record.id)
        if cached is None:
            dataset = self.dataset(dataset_record)
            params = BuildParams(
                strategy=record.strategy, seed=record.seed, **json.loads(record.params_json)
            )
            cached = build_strategy_index(dataset.decomp, dataset.traffic, params)
            self.put_index(record.id, cached)
        return cached

    def clear(self) -> None:
        with self._lock:
            self._datasets.clear()
            self._indices.clear()


def rebuild_dataset(record: DatasetRecord) -> Dataset:
    if record.source is DatasetSource.uploaded:
        net = formats.load_graph((record.graph_text or "").encode("utf-8"))
        traffic = formats.load_traffic((record.traffic_text or "").encode("utf-8"))
        return Dataset(net=net, decomp=partition(net, record.target_cell_size, record.seed), traffic=traffic)
    palette = RestrictionPalette.model_validate_json(record.palette_json or "{}")
    params = DatasetParams(
        n_vertices=record.n_vertices,
        avg_degree=record.avg_degree,
        target_cell_size=record.target_cell_size,
        n_vehicles=record.n_vehicles,
        seed=record.seed,
        palette=palette,
        per_cell_traffic=record.per_cell_traffic,
    )
    return generate_dataset(params)


@lru_cache
def get_registry() -> ArtifactRegistry:
    return ArtifactRegistry()


def to_http_error(exc: PlannerError) -> HTTPException:
    if isinstance(exc, LookupError):
        code = status.HTTP_404_NOT_FOUND
    elif isinstance(exc, MismatchedIndex):
        code = status.HTTP_409_CONFLICT
    elif isinstance(exc, (FormatError, NonAdjacent)):
        code = status.HTTP_400_BAD_REQUEST
    elif isinstance(exc, (InvalidParam, Infeasible)):
        code = status.HTTP_422_UNPROCESSABLE_ENTITY
    else:
        code = status.HTTP_400_BAD_REQUEST
    return HTTPException(status_code=code, detail=str(exc))
