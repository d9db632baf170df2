"""Dataset generation and upload endpoints."""

from typing import List, Optional

from fastapi import APIRouter, Depends, File, Form, HTTPException, UploadFile, status
from fastapi.concurrency import run_in_threadpool
from sqlalchemy.ext.asyncio import AsyncSession
from sqlmodel import select

from app.core.config import get_settings
from app.dependencies import ArtifactRegistry, get_db_session, get_registry, to_http_error
from app.models import Dataset as DatasetRecord
from app.models import DatasetSource
from app.planner import formats
from app.planner.datagen import DEFAULT_PALETTE, gen_traffic
from app.planner.errors import PlannerError
from app.planner.partitioner import partition
from app.planner.pipeline import TRAFFIC_SEED_OFFSET, Dataset, DatasetParams, generate_dataset
from app.schemas import DatasetCreate, DatasetRead

router = APIRouter(prefix="/datasets", tags=["datasets"])


def _record(dataset: Dataset, **fields) -> DatasetRecord:
    return DatasetRecord(
        n_vertices=dataset.net.n_vertices,
        n_edges=dataset.net.n_edges,
        n_vehicles=len(dataset.traffic),
        n_cells=dataset.decomp.n_cells,
        inter_cell_edges=len(dataset.decomp.inter_cell_edges),
        boundary_vertices=sum(len(b) for b in dataset.decomp.boundary),
        fingerprint=dataset.decomp.fingerprint,
        **fields,
    )


async def get_dataset_record(session: AsyncSession, dataset_id: int) -> DatasetRecord:
    result = await session.execute(select(DatasetRecord).where(DatasetRecord.id == dataset_id))
    record = result.scalar_one_or_none()
    if not record:
        raise HTTPException(status_code=status.HTTP_404_NOT_FOUND, detail="Dataset not found")
    return record


@router.post("", response_model=DatasetRead, status_code=status.HTTP_201_CREATED)
async def create_dataset(
    payload: DatasetCreate,
    session: AsyncSession = Depends(get_db_session),
    registry: ArtifactRegistry = Depends(get_registry),
) -> DatasetRead:
    fractions = {
        f"{kind}_fraction": getattr(payload, f"{kind}_fraction")
        for kind in ("he", "wi", "wt")
        if getattr(payload, f"{kind}_fraction") is not None
    }
    palette = DEFAULT_PALETTE.model_copy(update=fractions)
    params = DatasetParams.from_settings(
        get_settings(),
        n_vertices=payload.n_vertices,
        avg_degree=payload.avg_degree,
        target_cell_size=payload.target_cell_size,
        n_vehicles=payload.n_vehicles,
        seed=payload.seed,
        palette=palette,
        per_cell_traffic=payload.per_cell_traffic,
    )
    try:
        dataset = await run_in_threadpool(generate_dataset, params)
    except PlannerError as exc:
        raise to_http_error(exc) from exc

    record = _record(
        dataset,
        source=DatasetSource.generated,
        avg_degree=params.avg_degree,
        target_cell_size=params.target_cell_size,
        seed=params.seed,
        per_cell_traffic=params.per_cell_traffic,
        palette_json=params.palette.model_dump_json(),
    )
    session.add(record)
    await session.flush()
    await session.refresh(record)
    registry.put_dataset(record.id, dataset)
    return DatasetRead.model_validate(record)


@router.post("/upload", response_model=DatasetRead, status_code=status.HTTP_201_CREATED)
async def upload_dataset(
    graph: UploadFile = File(...),
    traffic: Optional[UploadFile] = File(default=None),
    target_cell_size: Optional[int] = Form(default=None, ge=2),
    seed: int = Form(default=0, ge=0),
    n_vehicles: Optional[int] = Form(default=None, ge=1),
    session: AsyncSession = Depends(get_db_session),
    registry: ArtifactRegistry = Depends(get_registry),
) -> DatasetRead:
    settings = get_settings()
    target = target_cell_size or settings.target_cell_size
    graph_bytes = await graph.read()
    traffic_bytes = await traffic.read() if traffic is not None else None

    def load() -> tuple[Dataset, bytes]:
        net = formats.load_graph(graph_bytes)
        if traffic_bytes is not None:
            flow_bytes = traffic_bytes
            flow = formats.load_traffic(traffic_bytes)
        else:
            flow = gen_traffic(n_vehicles or settings.n_vehicles, seed=seed + TRAFFIC_SEED_OFFSET)
            flow_bytes = formats.dump_traffic(flow).encode("utf-8")
        return Dataset(net=net, decomp=partition(net, target, seed), traffic=flow), flow_bytes

    try:
        dataset, flow_bytes = await run_in_threadpool(load)
    except PlannerError as exc:
        raise to_http_error(exc) from exc

    record = _record(
        dataset,
        source=DatasetSource.uploaded,
        target_cell_size=target,
        seed=seed,
        graph_text=graph_bytes.decode("utf-8"),
        traffic_text=flow_bytes.decode("utf-8"),
    )
    session.add(record)
    await session.flush()
    await session.refresh(record)
    registry.put_dataset(record.id, dataset)
    return DatasetRead.model_validate(record)


@router.get("", response_model=List[DatasetRead])
async def list_datasets(session: AsyncSession = Depends(get_db_session)) -> List[DatasetRead]:
    result = await session.execute(select(DatasetRecord).order_by(DatasetRecord.id))
    return [DatasetRead.model_validate(record) for record in result.scalars().all()]


@router.get("/{dataset_id}", response_model=DatasetRead)
async def get_dataset(
    dataset_id: int,
    session: AsyncSession = Depends(get_db_session),
) -> DatasetRead:
    return DatasetRead.model_validate(await get_dataset_record(session, dataset_id))
