"""Shortcut index build and inspection endpoints."""

import json
import time

from fastapi import APIRouter, Depends, HTTPException, status
from fastapi.concurrency import run_in_threadpool
from sqlalchemy.ext.asyncio import AsyncSession
from sqlmodel import select

from app.core.config import get_settings
from app.dependencies import ArtifactRegistry, get_db_session, get_registry, to_http_error
from app.models import IndexBuild
from app.planner.errors import PlannerError
from app.planner.pipeline import build_params_from_settings, build_strategy_index
from app.planner.shortcuts import storage_stats
from app.routers.datasets import get_dataset_record
from app.schemas import IndexCreate, IndexRead

router = APIRouter(tags=["indices"])


def index_read(record: IndexBuild) -> IndexRead:
    return IndexRead(
        id=record.id,
        dataset_id=record.dataset_id,
        strategy=record.strategy,
        seed=record.seed,
        params=json.loads(record.params_json),
        n_shortcuts=record.n_shortcuts,
        total_entries=record.total_entries,
        distinct_paths=record.distinct_paths,
        total_path_vertices=record.total_path_vertices,
        unpooled_path_vertices=record.unpooled_path_vertices,
        build_seconds=record.build_seconds,
        created_at=record.created_at,
    )


async def get_index_record(session: AsyncSession, index_id: int) -> IndexBuild:
    result = await session.execute(select(IndexBuild).where(IndexBuild.id == index_id))
    record = result.scalar_one_or_none()
    if not record:
        raise HTTPException(status_code=status.HTTP_404_NOT_FOUND, detail="Index not found")
    return record


@router.post(
    "/datasets/{dataset_id}/indices",
    response_model=IndexRead,
    status_code=status.HTTP_201_CREATED,
)
async def create_index(
    dataset_id: int,
    payload: IndexCreate,
    session: AsyncSession = Depends(get_db_session),
    registry: ArtifactRegistry = Depends(get_registry),
) -> IndexRead:
    dataset_record = await get_dataset_record(session, dataset_id)
    settings = get_settings()
    params = build_params_from_settings(
        settings,
        strategy=payload.strategy,
        k=payload.k,
        f=payload.f,
        max_iters=payload.max_iters,
        random_budget=payload.random_budget,
        seed=payload.seed,
    )

    def build():
        dataset = registry.dataset(dataset_record)
        start = time.perf_counter()
        index = build_strategy_index(dataset.decomp, dataset.traffic, params, settings.workers)
        return index, time.perf_counter() - start

    try:
        index, seconds = await run_in_threadpool(build)
    except PlannerError as exc:
        raise to_http_error(exc) from exc

    stats = storage_stats(index)
    record = IndexBuild(
        dataset_id=dataset_record.id,
        strategy=params.strategy,
        seed=params.seed,
        params_json=index.meta.params,
        n_shortcuts=index.n_shortcuts,
        total_entries=stats.total_entries,
        distinct_paths=stats.distinct_paths,
        total_path_vertices=stats.total_path_vertices,
        unpooled_path_vertices=stats.unpooled_path_vertices,
        build_seconds=seconds,
    )
    session.add(record)
    await session.flush()
    await session.refresh(record)
    registry.put_index(record.id, index)
    return index_read(record)


@router.get("/indices/{index_id}", response_model=IndexRead)
async def get_index(
    index_id: int,
    session: AsyncSession = Depends(get_db_session),
) -> IndexRead:
    return index_read(await get_index_record(session, index_id))
