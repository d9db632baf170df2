"""Reproducible datasets (network, restrictions, cells, traffic) and strategy index builds."""

from __future__ import annotations

import logging
from dataclasses import dataclass

from pydantic import BaseModel, Field

from app.core.config import Settings
from app.core.logging_utils import log_event
from app.planner.combinations import BuildParams, Strategy, select_combinations
from app.planner.datagen import (
    DEFAULT_PALETTE,
    RestrictionPalette,
    TrafficFlow,
    assign_restrictions,
    assign_traffic_cells,
    gen_network,
    gen_traffic,
)
from app.planner.model import RoadNetwork
from app.planner.partitioner import CellDecomposition, partition
from app.planner.shortcuts import ShortcutIndex, build_index

logger = logging.getLogger(__name__)

# Sub-seed offsets so each generator draws from its own stream.
RESTRICTION_SEED_OFFSET = 1
PARTITION_SEED_OFFSET = 2
TRAFFIC_SEED_OFFSET = 3
QUERY_SEED_OFFSET = 4


class DatasetParams(BaseModel):
    n_vertices: int = Field(20_000, ge=2)
    avg_degree: float = Field(4.4, ge=2.0)
    target_cell_size: int = Field(64, ge=2)
    n_vehicles: int = Field(10_000, ge=1)
    seed: int = Field(1, ge=0)
    palette: RestrictionPalette = DEFAULT_PALETTE
    per_cell_traffic: bool = False

    @classmethod
    def from_settings(cls, settings: Settings, **overrides) -> DatasetParams:
        values = {
            "n_vertices": settings.n_vertices,
            "avg_degree": settings.avg_degree,
            "target_cell_size": settings.target_cell_size,
            "n_vehicles": settings.n_vehicles,
            "seed": settings.seed,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass(frozen=True)
class Dataset:
    net: RoadNetwork
    decomp: CellDecomposition
    traffic: TrafficFlow


def generate_dataset(params: DatasetParams) -> Dataset:
    seed = params.seed
    net = gen_network(params.n_vertices, params.avg_degree, seed)
    net = assign_restrictions(net, params.palette, seed + RESTRICTION_SEED_OFFSET)
    decomp = partition(net, params.target_cell_size, seed + PARTITION_SEED_OFFSET)
    traffic = gen_traffic(params.n_vehicles, seed=seed + TRAFFIC_SEED_OFFSET)
    if params.per_cell_traffic:
        traffic = assign_traffic_cells(traffic, decomp.n_cells, seed + TRAFFIC_SEED_OFFSET)
    return Dataset(net=net, decomp=decomp, traffic=traffic)


def build_params_from_settings(settings: Settings, **overrides) -> BuildParams:
    values = {
        "k": settings.k,
        "f": settings.f,
        "max_iters": settings.max_iters,
        "random_budget": settings.random_budget,
        "seed": settings.seed,
    }
    values.update({k: v for k, v in overrides.items() if v is not None})
    return BuildParams(**values)


def build_strategy_index(
    decomp: CellDecomposition,
    traffic: TrafficFlow | None,
    params: BuildParams,
    workers: int = 1,
) -> ShortcutIndex:
    """Select combinations for ``params.strategy`` and build the index over them."""
    combinations = select_combinations(decomp, traffic, params)
    return build_index(
        decomp,
        combinations,
        strategy=params.strategy.value,
        params=params.model_dump(mode="json", exclude={"strategy", "seed"}),
        seed=params.seed,
        workers=workers,
    )


def matched_random_params(trapp_index: ShortcutIndex, params: BuildParams) -> BuildParams:
    """Random build params whose per-cell budget equals the given index's per-cell combination count."""
    budgets = [len(cell.combinations) for cell in trapp_index.cells]
    log_event(logger, "matched_random_budget", cells=len(budgets), combinations=sum(budgets))
    return params.model_copy(update={"strategy": Strategy.random, "random_budgets": budgets})
