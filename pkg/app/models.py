"""Database models for the route planner run registry.

Rows hold the parameters and seeds each artifact was produced from plus the
summary numbers reported back to clients; networks and indices themselves are
rebuilt on demand.
"""

from datetime import datetime
from enum import Enum
from typing import List, Optional

from sqlalchemy import Enum as SAEnum, Text
from sqlmodel import Column, Field, Relationship, SQLModel

from app.planner.combinations import Strategy


class DatasetSource(str, Enum):
    generated = "generated"
    uploaded = "uploaded"


class Dataset(SQLModel, table=True):
    __tablename__ = "datasets"

    id: Optional[int] = Field(default=None, primary_key=True)
    source: DatasetSource = Field(
        sa_column=Column(SAEnum(DatasetSource, name="dataset_source"), nullable=False)
    )
    n_vertices: int
    n_edges: int
    avg_degree: Optional[float] = None
    target_cell_size: int
    n_vehicles: int
    seed: int
    per_cell_traffic: bool = Field(default=False)
    palette_json: Optional[str] = Field(default=None, sa_column=Column(Text))
    graph_text: Optional[str] = Field(default=None, sa_column=Column(Text))
    traffic_text: Optional[str] = Field(default=None, sa_column=Column(Text))
    n_cells: int
    inter_cell_edges: int
    boundary_vertices: int
    fingerprint: str = Field(max_length=40, index=True)
    created_at: datetime = Field(default_factory=datetime.utcnow)

    indices: List["IndexBuild"] = Relationship(back_populates="dataset")
    bench_runs: List["BenchRun"] = Relationship(back_populates="dataset")


class IndexBuild(SQLModel, table=True):
    __tablename__ = "index_builds"

    id: Optional[int] = Field(default=None, primary_key=True)
    dataset_id: int = Field(foreign_key="datasets.id", index=True)
    strategy: Strategy = Field(
        sa_column=Column(SAEnum(Strategy, name="build_strategy"), nullable=False)
    )
    seed: int
    params_json: str = Field(sa_column=Column(Text, nullable=False))
    n_shortcuts: int
    total_entries: int
    distinct_paths: int
    total_path_vertices: int
    unpooled_path_vertices: int
    build_seconds: float
    created_at: datetime = Field(default_factory=datetime.utcnow)

    dataset: Dataset = Relationship(back_populates="indices")


class BenchRun(SQLModel, table=True):
    __tablename__ = "bench_runs"

    id: Optional[int] = Field(default=None, primary_key=True)
    dataset_id: int = Field(foreign_key="datasets.id", index=True)
    strategy: str = Field(max_length=32)
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
    created_at: datetime = Field(default_factory=datetime.utcnow)

    dataset: Dataset = Relationship(back_populates="bench_runs")
