"""Pydantic schemas for request and response payloads."""

from datetime import datetime
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field, field_validator

from app.models import DatasetSource
from app.planner.bench import BASELINE
from app.planner.combinations import Strategy


# Datasets ---------------------------------------------------------------------------


class DatasetCreate(BaseModel):
    n_vertices: Optional[int] = Field(default=None, ge=2, le=200_000)
    avg_degree: Optional[float] = Field(default=None, ge=2.0, le=20.0)
    target_cell_size: Optional[int] = Field(default=None, ge=2)
    n_vehicles: Optional[int] = Field(default=None, ge=1, le=1_000_000)
    seed: Optional[int] = Field(default=None, ge=0)
    he_fraction: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    wi_fraction: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    wt_fraction: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    per_cell_traffic: bool = False


class DatasetRead(BaseModel):
    id: int
    source: DatasetSource
    n_vertices: int
    n_edges: int
    target_cell_size: int
    n_vehicles: int
    seed: int
    per_cell_traffic: bool
    n_cells: int
    inter_cell_edges: int
    boundary_vertices: int
    fingerprint: str
    created_at: datetime

    class Config:
        from_attributes = True


# Indices ----------------------------------------------------------------------------


class IndexCreate(BaseModel):
    strategy: Strategy = Strategy.trapp
    k: Optional[int] = Field(default=None, ge=1)
    f: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    max_iters: Optional[int] = Field(default=None, ge=1)
    random_budget: Optional[int] = Field(default=None, ge=0)
    seed: Optional[int] = Field(default=None, ge=0)


class IndexRead(BaseModel):
    id: int
    dataset_id: int
    strategy: Strategy
    seed: int
    params: Dict[str, Any]
    n_shortcuts: int
    total_entries: int
    distinct_paths: int
    total_path_vertices: int
    unpooled_path_vertices: int
    build_seconds: float
    created_at: datetime


# Routes -----------------------------------------------------------------------------


class RouteRequest(BaseModel):
    s: int = Field(ge=0)
    d: int = Field(ge=0)
    he: float = Field(gt=0, allow_inf_nan=False)
    wi: float = Field(gt=0, allow_inf_nan=False)
    wt: float = Field(gt=0, allow_inf_nan=False)
    exact: bool = False


class RouteRead(BaseModel):
    status: str
    distance: Optional[int]
    vertices: List[int]
    scanned_entries: int
    matches: int
    overlay_seconds: float
    fallback_seconds: float


# Benchmarks -------------------------------------------------------------------------


class BenchCreate(BaseModel):
    strategies: List[str] = Field(
        default_factory=lambda: [BASELINE, Strategy.random.value, Strategy.all.value, Strategy.trapp.value],
        min_length=1,
    )
    n_queries: Optional[int] = Field(default=None, ge=0, le=10_000)
    seed: Optional[int] = Field(default=None, ge=0)
    warmup: int = Field(default=0, ge=0)
    match_trapp_budget: bool = True
    k: Optional[int] = Field(default=None, ge=1)
    f: Optional[float] = Field(default=None, ge=0.0, le=1.0)

    @field_validator("strategies")
    @classmethod
    def _known(cls, names: List[str]) -> List[str]:
        known = {BASELINE, *(s.value for s in Strategy)}
        unknown = [name for name in names if name not in known]
        if unknown:
            raise ValueError(f"unknown strategies: {', '.join(unknown)}")
        return names


class BenchRunRead(BaseModel):
    id: int
    dataset_id: int
    strategy: str
    query_seed: int
    query_count: int
    mean_query_time: float
    mean_oracle_time: float
    mean_error_rate: float
    failure_rate: float
    optimal_proportion: float
    unreachable_count: int
    total_entries: int
    distinct_paths: int
    mean_scanned_entries: float
    mean_full_scan_entries: float
    match_mismatches: int
    created_at: datetime

    class Config:
        from_attributes = True
