import pytest
from httpx import AsyncClient

from app.dependencies import get_registry
from app.planner import formats
from app.planner.datagen import gen_network

DATASET = {"n_vertices": 160, "target_cell_size": 12, "n_vehicles": 150, "seed": 2}


async def create_dataset(client: AsyncClient, **overrides) -> dict:
    response = await client.post("/api/datasets", json={**DATASET, **overrides})
    assert response.status_code == 201, response.text
    return response.json()


async def create_index(client: AsyncClient, dataset_id: int, **payload) -> dict:
    response = await client.post(f"/api/datasets/{dataset_id}/indices", json=payload)
    assert response.status_code == 201, response.text
    return response.json()


@pytest.mark.asyncio
async def test_healthcheck(client: AsyncClient) -> None:
    response = await client.get("/")
    assert response.status_code == 200
    assert response.json() == {"message": "TRAPP Route Planner ready"}


@pytest.mark.asyncio
async def test_end_to_end_route_planning_flow(client: AsyncClient) -> None:
    """Generate a dataset, build two indices, route on them and benchmark."""
    dataset = await create_dataset(client)
    assert dataset["source"] == "generated"
    assert dataset["n_vertices"] == 160
    assert dataset["n_cells"] > 1
    assert len(dataset["fingerprint"]) == 40

    listing = await client.get("/api/datasets")
    assert [d["id"] for d in listing.json()] == [dataset["id"]]
    fetched = await client.get(f"/api/datasets/{dataset['id']}")
    assert fetched.json()["fingerprint"] == dataset["fingerprint"]

    all_index = await create_index(client, dataset["id"], strategy="all")
    assert all_index["strategy"] == "all"
    assert all_index["total_entries"] >= all_index["distinct_paths"] > 0
    trapp_index = await create_index(client, dataset["id"], strategy="trapp", k=5, f=0.05)
    assert trapp_index["params"]["k"] == 5
    assert trapp_index["total_entries"] <= all_index["total_entries"]

    route = {"s": 0, "d": 159, "he": 1.6, "wi": 1.8, "wt": 1.8}
    planned = await client.post(f"/api/indices/{all_index['id']}/routes", json=route)
    assert planned.status_code == 200, planned.text
    exact = await client.post(f"/api/indices/{all_index['id']}/routes", json={**route, "exact": True})
    assert exact.status_code == 200, exact.text
    assert planned.json()["distance"] == exact.json()["distance"]
    if planned.json()["distance"] is not None:
        assert planned.json()["vertices"][0] == 0
        assert planned.json()["vertices"][-1] == 159

    trapp_route = await client.post(f"/api/indices/{trapp_index['id']}/routes", json=route)
    assert trapp_route.status_code == 200, trapp_route.text
    assert trapp_route.json()["status"] in {"overlay", "fallback", "no_path"}

    bench = await client.post(
        f"/api/datasets/{dataset['id']}/bench",
        json={"strategies": ["dijkstra", "all", "trapp"], "n_queries": 12, "k": 5},
    )
    assert bench.status_code == 201, bench.text
    rows = {row["strategy"]: row for row in bench.json()}
    assert set(rows) == {"dijkstra", "all", "trapp"}
    assert rows["all"]["optimal_proportion"] == 1.0
    assert rows["all"]["failure_rate"] == 0.0
    assert all(row["query_count"] == 12 for row in rows.values())

    history = await client.get(f"/api/datasets/{dataset['id']}/bench")
    assert len(history.json()) == 3


@pytest.mark.asyncio
async def test_upload_dataset_and_route(client: AsyncClient) -> None:
    graph_text = formats.dump_graph(gen_network(80, seed=6))
    response = await client.post(
        "/api/datasets/upload",
        files={"graph": ("graph.txt", graph_text.encode("utf-8"), "text/plain")},
        data={"target_cell_size": "10", "seed": "1", "n_vehicles": "50"},
    )
    assert response.status_code == 201, response.text
    dataset = response.json()
    assert dataset["source"] == "uploaded"
    assert dataset["n_vehicles"] == 50

    index = await create_index(client, dataset["id"], strategy="random", random_budget=3)
    routed = await client.post(
        f"/api/indices/{index['id']}/routes",
        json={"s": 1, "d": 78, "he": 2.0, "wi": 2.0, "wt": 3.0},
    )
    assert routed.status_code == 200, routed.text
    # No restrictions were assigned, so every vertex pair is connected.
    assert routed.json()["distance"] is not None


@pytest.mark.asyncio
async def test_registry_rebuilds_after_cache_loss(client: AsyncClient) -> None:
    dataset = await create_dataset(client)
    index = await create_index(client, dataset["id"], strategy="all")
    route = {"s": 3, "d": 150, "he": 2.0, "wi": 2.0, "wt": 3.0}
    before = await client.post(f"/api/indices/{index['id']}/routes", json=route)
    get_registry().clear()
    after = await client.post(f"/api/indices/{index['id']}/routes", json=route)
    assert after.status_code == 200, after.text
    assert after.json()["vertices"] == before.json()["vertices"]


@pytest.mark.asyncio
async def test_error_mapping(client: AsyncClient) -> None:
    missing = await client.get("/api/datasets/999")
    assert missing.status_code == 404
    missing_index = await client.get("/api/indices/999")
    assert missing_index.status_code == 404

    dataset = await create_dataset(client)
    index = await create_index(client, dataset["id"], strategy="all")
    unknown_vertex = await client.post(
        f"/api/indices/{index['id']}/routes",
        json={"s": 0, "d": 10_000, "he": 2.0, "wi": 2.0, "wt": 3.0},
    )
    assert unknown_vertex.status_code == 404, unknown_vertex.text
    bad_vehicle = await client.post(
        f"/api/indices/{index['id']}/routes",
        json={"s": 0, "d": 1, "he": -1.0, "wi": 2.0, "wt": 3.0},
    )
    assert bad_vehicle.status_code == 422
    bad_strategy = await client.post(
        f"/api/datasets/{dataset['id']}/bench", json={"strategies": ["fastest"]}
    )
    assert bad_strategy.status_code == 422

    malformed = await client.post(
        "/api/datasets/upload",
        files={"graph": ("graph.txt", b"2 E=1\n0 1 oops - - -\n", "text/plain")},
    )
    assert malformed.status_code == 400, malformed.text
