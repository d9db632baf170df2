import os

import pytest
import pytest_asyncio
from httpx import AsyncClient, ASGITransport

os.environ.setdefault("TRAPP_DATABASE_URL", "sqlite+aiosqlite:///./test_app.db")
os.environ.setdefault("TRAPP_LOG_LEVEL", "WARNING")

from app.main import app  # noqa: E402
from app.database import reset_db  # noqa: E402
from app.dependencies import get_registry  # noqa: E402
from app.planner.datagen import gen_queries  # noqa: E402
from app.planner.model import INF, Edge, RestrictionTriple, RoadNetwork  # noqa: E402
from app.planner.partitioner import from_assignment  # noqa: E402
from app.planner.pipeline import QUERY_SEED_OFFSET, DatasetParams, generate_dataset  # noqa: E402

# Seven-vertex cell (vertices 1..7) with entry 7 and exit 6, plus one outside
# vertex on each side: 0 -- 7 and 6 -- 8.
REF_EDGES = [
    (0, 7, 1, RestrictionTriple()),
    (7, 4, 1, RestrictionTriple()),
    (4, 6, 1, RestrictionTriple(1.8, INF, INF)),
    (4, 2, 1, RestrictionTriple(2.0, 2.0, 15)),
    (2, 6, 1, RestrictionTriple(INF, 2.4, 15)),
    (4, 1, 1, RestrictionTriple(2.5, 3.0, 20)),
    (1, 2, 1, RestrictionTriple(3.0, INF, 40)),
    (1, 3, 2, RestrictionTriple(4.0, 3.0, 10)),
    (3, 5, 2, RestrictionTriple()),
    (5, 6, 3, RestrictionTriple(INF, INF, 20)),
    (6, 8, 1, RestrictionTriple()),
]
REF_CELLS = [1, 0, 0, 0, 0, 0, 0, 0, 2]

PI1 = RestrictionTriple(1.8, INF, 40)
PI2 = RestrictionTriple(2.0, 2.0, 15)
PI3 = RestrictionTriple(2.5, 2.4, 10)
PI3_TWIN = RestrictionTriple(2.0, 2.4, 10)


@pytest.fixture
def ref_net() -> RoadNetwork:
    return RoadNetwork(9, [Edge(u, v, length, limits) for u, v, length, limits in REF_EDGES])


@pytest.fixture
def ref_decomp(ref_net):
    return from_assignment(ref_net, REF_CELLS)


@pytest.fixture
def ref_combinations():
    """Per-cell sets for the reference network: only the middle cell has edges."""
    return [(PI1, PI2, PI3, PI3_TWIN), (), ()]


@pytest.fixture(scope="session")
def small_dataset():
    params = DatasetParams(
        n_vertices=300, avg_degree=4.4, target_cell_size=16, n_vehicles=400, seed=3
    )
    return generate_dataset(params)


@pytest.fixture(scope="session")
def small_queries(small_dataset):
    return gen_queries(
        small_dataset.net,
        small_dataset.decomp,
        small_dataset.traffic,
        60,
        seed=3 + QUERY_SEED_OFFSET,
    )


@pytest_asyncio.fixture
async def setup_database() -> None:
    await reset_db()
    get_registry().clear()


@pytest_asyncio.fixture
async def client(setup_database) -> AsyncClient:
    transport = ASGITransport(app=app)
    async with AsyncClient(transport=transport, base_url="http://test") as ac:
        yield ac
