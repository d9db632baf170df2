"""Route query endpoint."""

from fastapi import APIRouter, Depends, status
from fastapi.concurrency import run_in_threadpool
from sqlalchemy.ext.asyncio import AsyncSession

from app.dependencies import ArtifactRegistry, get_db_session, get_registry, to_http_error
from app.planner.errors import MismatchedIndex, PlannerError
from app.planner.model import Query, Vehicle
from app.planner.query import plan, plan_exact
from app.routers.datasets import get_dataset_record
from app.routers.indices import get_index_record
from app.schemas import RouteRead, RouteRequest

router = APIRouter(prefix="/indices", tags=["routes"])


@router.post("/{index_id}/routes", response_model=RouteRead, status_code=status.HTTP_200_OK)
async def find_route(
    index_id: int,
    payload: RouteRequest,
    session: AsyncSession = Depends(get_db_session),
    registry: ArtifactRegistry = Depends(get_registry),
) -> RouteRead:
    index_record = await get_index_record(session, index_id)
    dataset_record = await get_dataset_record(session, index_record.dataset_id)

    def answer():
        dataset = registry.dataset(dataset_record)
        index = registry.index(index_record, dataset_record)
        if index.meta.fingerprint != dataset.decomp.fingerprint:
            raise MismatchedIndex("index does not belong to this dataset's partition")
        query = Query(payload.s, payload.d, Vehicle(payload.he, payload.wi, payload.wt))
        if payload.exact:
            return plan_exact(dataset.net, query)
        return plan(dataset.net, dataset.decomp, index, query)

    try:
        result = await run_in_threadpool(answer)
    except PlannerError as exc:
        raise to_http_error(exc) from exc

    return RouteRead(
        status=result.status.value,
        distance=result.distance,
        vertices=list(result.path.vertices) if result.path is not None else [],
        scanned_entries=result.scanned_entries,
        matches=result.matches,
        overlay_seconds=result.overlay_seconds,
        fallback_seconds=result.fallback_seconds,
    )
