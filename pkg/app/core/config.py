"""Application configuration using pydantic settings."""

from functools import lru_cache
from pathlib import Path
from typing import List

from pydantic import AnyUrl, Field
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    app_name: str = "TRAPP Route Planner"
    api_prefix: str = "/api"
    database_url: AnyUrl = Field("sqlite+aiosqlite:///./trapp.db")
    allowed_origins: List[str] = Field(default_factory=lambda: ["*"])
    log_level: str = "INFO"
    data_dir: Path = Path("./data")

    # Dataset generation defaults.
    n_vertices: int = Field(20_000, ge=2)
    avg_degree: float = Field(4.4, ge=2.0)
    target_cell_size: int = Field(64, ge=2)
    n_vehicles: int = Field(10_000, ge=1)
    seed: int = Field(1, ge=0)

    # Index build defaults.
    k: int = Field(30, ge=1)
    f: float = Field(0.03, ge=0.0, le=1.0)
    max_iters: int = Field(100, ge=1)
    random_budget: int = Field(30, ge=0)
    workers: int = Field(1, ge=1)

    # Benchmark defaults.
    n_queries: int = Field(300, ge=0)
    warmup_queries: int = Field(10, ge=0)

    class Config:
        env_prefix = "TRAPP_"
        env_file = ".env"
        env_file_encoding = "utf-8"


@lru_cache
def get_settings() -> Settings:
    """Return cached application settings."""
    return Settings()
