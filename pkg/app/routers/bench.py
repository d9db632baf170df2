"""Benchmark endpoints: compare strategies on a dataset and list recorded runs."""

from typing import List

from fastapi import APIRouter, Depends, status
from fastapi.concurrency import run_in_threadpool
from sqlalchemy.ext.asyncio import AsyncSession
from sqlmodel import select

from app.core.config import get_settings
from app.dependencies import ArtifactRegistry, get_db_session, get_registry, to_http_error
from app.models import BenchRun
from app.planner.bench import compare
from app.planner.datagen import gen_queries
from app.planner.errors import PlannerError
from app.planner.pipeline import QUERY_SEED_OFFSET, build_params_from_settings
from app.routers.datasets import get_dataset_record
from app.schemas import BenchCreate, BenchRunRead

router = APIRouter(prefix="/datasets", tags=["bench"])


@router.post(
    "/{dataset_id}/bench",
    response_model=List[BenchRunRead],
    status_code=status.HTTP_201_CREATED,
)
async def run_bench(
    dataset_id: int,
    payload: BenchCreate,
    session: AsyncSession = Depends(get_db_session),
    registry: ArtifactRegistry = Depends(get_registry),
) -> List[BenchRunRead]:
    dataset_record = await get_dataset_record(session, dataset_id)
    settings = get_settings()
    seed = payload.seed if payload.seed is not None else dataset_record.seed
    query_seed = seed + QUERY_SEED_OFFSET
    n_queries = payload.n_queries if payload.n_queries is not None else settings.n_queries
    params = build_params_from_settings(settings, k=payload.k, f=payload.f, seed=seed)

    def bench():
        dataset = registry.dataset(dataset_record)
        queries = gen_queries(dataset.net, dataset.decomp, dataset.traffic, n_queries, query_seed)
        return compare(
            payload.strategies,
            dataset.net,
            dataset.decomp,
            dataset.traffic,
            queries,
            params,
            workers=settings.workers,
            warmup=payload.warmup,
            match_trapp_budget=payload.match_trapp_budget,
        )

    try:
        report = await run_in_threadpool(bench)
    except PlannerError as exc:
        raise to_http_error(exc) from exc

    records = []
    for metrics in report.rows:
        record = BenchRun(
            dataset_id=dataset_record.id,
            query_seed=query_seed,
            **metrics.model_dump(
                include={
                    "strategy",
                    "query_count",
                    "mean_query_time",
                    "mean_oracle_time",
                    "mean_error_rate",
                    "failure_rate",
                    "optimal_proportion",
                    "unreachable_count",
                    "total_entries",
                    "distinct_paths",
                    "mean_scanned_entries",
                    "mean_full_scan_entries",
                    "match_mismatches",
                }
            ),
        )
        session.add(record)
        records.append(record)
    await session.flush()
    for record in records:
        await session.refresh(record)
    return [BenchRunRead.model_validate(record) for record in records]


@router.get("/{dataset_id}/bench", response_model=List[BenchRunRead])
async def list_bench_runs(
    dataset_id: int,
    session: AsyncSession = Depends(get_db_session),
) -> List[BenchRunRead]:
    await get_dataset_record(session, dataset_id)
    result = await session.execute(
        select(BenchRun).where(BenchRun.dataset_id == dataset_id).order_by(BenchRun.id)
    )
    return [BenchRunRead.model_validate(record) for record in result.scalars().all()]
