import numpy as np
import pytest

from app.planner.combinations import BuildParams, Strategy, select_combinations
from app.planner.errors import DanglingRef, FormatError, InvalidParam, UnknownCell
from app.planner.model import Path, RestrictionTriple, Vehicle, dominates, path_feasible
from app.planner.oracle import cell_shortest_path
from app.planner.pipeline import build_strategy_index
from app.planner.shortcuts import (
    PathPool,
    Shortcut,
    build_cell_shortcuts,
    build_index,
    deserialize,
    infeasible_entries,
    load_index,
    match,
    match_full_scan,
    monotonicity_violations,
    save_index,
    serialize,
    storage_stats,
)
from tests.conftest import PI1, PI2, PI3, PI3_TWIN


@pytest.fixture
def ref_index(ref_decomp, ref_combinations):
    return build_index(ref_decomp, ref_combinations, strategy="manual", params={"note": "reference"})


def test_path_pool_interns_sequences_and_their_reverse() -> None:
    pool = PathPool()
    assert pool.add((7, 4, 6), 2) == (0, True)
    assert pool.add((6, 4, 7), 2) == (0, False)
    assert pool.add((7, 4, 2, 6), 3) == (1, True)
    assert len(pool) == 2
    assert pool.path(0, reversed_=True) == Path((7, 4, 6), 2)
    assert pool.total_vertices == 7
    with pytest.raises(DanglingRef):
        pool.get(5)


def test_reference_cell_entries(ref_decomp) -> None:
    cell = ref_decomp.cell(0)
    built = build_cell_shortcuts(cell, ref_decomp.boundary[0], [PI3, PI1, PI2, PI3_TWIN])
    assert built.combinations == (PI1, PI2, PI3_TWIN, PI3)
    assert set(built.shortcuts) == {(6, 7), (7, 6)}
    forward = built.shortcuts[(7, 6)]
    assert [e.rc for e in forward.entries] == [PI1, PI2, PI3_TWIN, PI3]
    assert [e.distance for e in forward.entries] == [2, 3, 4, 4]
    paths = [built.path(e, forward).vertices for e in forward.entries]
    assert paths == [(7, 4, 6), (7, 4, 2, 6), (7, 4, 1, 2, 6), (7, 4, 1, 2, 6)]
    # The two widest combinations share one pooled sequence.
    assert forward.entries[2].path_ref == forward.entries[3].path_ref
    assert len(built.pool) == 3


def test_entries_match_per_combination_searches(small_dataset) -> None:
    decomp, traffic = small_dataset.decomp, small_dataset.traffic
    sets = select_combinations(decomp, traffic, BuildParams(strategy=Strategy.trapp, k=10))
    for cell, combos in list(zip(decomp.cells, sets))[:6]:
        built = build_cell_shortcuts(cell, decomp.boundary[cell.id], combos)
        for (u, v), shortcut in built.shortcuts.items():
            for entry in shortcut.entries:
                expected = cell_shortest_path(cell, u, v, entry.rc)
                assert expected is not None
                assert entry.distance == expected.distance
                assert built.path(entry, shortcut) == expected
        assert infeasible_entries(cell, built) == 0


def test_match_returns_shortest_feasible_entry(ref_index) -> None:
    shortcut = ref_index.cell(0).shortcuts[(7, 6)]
    entry, scanned = match(shortcut, Vehicle(2.0, 2.0, 10))
    assert entry.rc == PI2
    assert entry.distance == 3
    assert scanned == 2
    assert match(shortcut, Vehicle(1.0, 1.0, 1.0))[0].rc == PI1
    assert match(shortcut, Vehicle(2.6, 2.0, 10)) == (None, 4)
    for vehicle in (Vehicle(2.0, 2.0, 10), Vehicle(2.4, 2.3, 9), Vehicle(1.7, 5.0, 30)):
        assert match(shortcut, vehicle)[0] == match_full_scan(shortcut, vehicle)[0]


def test_shortcut_rejects_duplicate_combinations() -> None:
    with pytest.raises(InvalidParam):
        Shortcut.from_rows(0, 1, [(0, 3, 0, False), (0, 4, 1, False)], (PI1,))


def test_distance_is_monotone_in_the_combination(ref_decomp) -> None:
    index = build_strategy_index(ref_decomp, None, BuildParams(strategy=Strategy.all))
    cell = index.cell(0)
    assert len(cell.combinations) == 120
    for shortcut in cell.shortcuts.values():
        assert monotonicity_violations(shortcut) == 0
    assert infeasible_entries(ref_decomp.cell(0), cell) == 0


def test_storage_stats(ref_index) -> None:
    stats = storage_stats(ref_index)
    assert stats.total_entries == 8
    assert stats.distinct_paths == 3
    assert stats.total_path_vertices == 3 + 4 + 5
    assert stats.unpooled_path_vertices == 2 * (3 + 4 + 5 + 5)
    assert ref_index.n_shortcuts == 2


def test_index_lookup_and_metadata(ref_index, ref_decomp) -> None:
    assert ref_index.meta.fingerprint == ref_decomp.fingerprint
    assert ref_index.meta.strategy == "manual"
    assert ref_index.meta.params_dict == {"note": "reference"}
    assert ref_index.cell(1).shortcuts == {}
    with pytest.raises(UnknownCell):
        ref_index.cell(7)


def test_build_rejects_misaligned_sets(ref_decomp) -> None:
    with pytest.raises(InvalidParam):
        build_index(ref_decomp, [(PI1,)], strategy="manual")
    with pytest.raises(InvalidParam):
        build_index(ref_decomp, [(PI1,), (), ()], strategy="manual", workers=0)


def test_parallel_build_equals_serial(small_dataset) -> None:
    params = BuildParams(strategy=Strategy.trapp, k=8, seed=2)
    serial = build_strategy_index(small_dataset.decomp, small_dataset.traffic, params, workers=1)
    parallel = build_strategy_index(small_dataset.decomp, small_dataset.traffic, params, workers=2)
    assert serialize(serial) == serialize(parallel)


def test_serialization_round_trip(ref_index, tmp_path) -> None:
    data = serialize(ref_index)
    assert data.startswith(b"# restriction-aware shortcut index\n")
    restored = deserialize(data)
    assert restored == ref_index
    assert serialize(restored) == data
    save_index(ref_index, tmp_path / "reference.idx")
    assert load_index(tmp_path / "reference.idx") == ref_index


def test_deserialize_reports_offsets(ref_index) -> None:
    data = serialize(ref_index)
    with pytest.raises(FormatError) as excinfo:
        deserialize(data.replace(b"[end]", b"[done]"))
    assert excinfo.value.offset == data.index(b"[end]")
    dangling = data.replace(b" 0 -\n", b" 9 -\n", 1)
    with pytest.raises(FormatError):
        deserialize(dangling)
    with pytest.raises(FormatError):
        deserialize(data.replace(b"version 1", b"version 2"))
    with pytest.raises(FormatError):
        deserialize(b"")


def test_index_is_deterministic(small_dataset) -> None:
    params = BuildParams(strategy=Strategy.trapp, k=8, seed=4)
    first = build_strategy_index(small_dataset.decomp, small_dataset.traffic, params)
    second = build_strategy_index(small_dataset.decomp, small_dataset.traffic, params)
    assert serialize(first) == serialize(second)


def test_rv_combinations_serve_their_cluster_members(small_dataset) -> None:
    # A path stored for a combination is feasible for every vehicle it dominates.
    decomp, traffic = small_dataset.decomp, small_dataset.traffic
    index = build_strategy_index(decomp, traffic, BuildParams(strategy=Strategy.trapp_no_cr_pr, k=6))
    vehicles = traffic.vehicles[:40]
    for cell in index.cells[:5]:
        assert all(any(dominates(v, rc) for rc in cell.combinations) for v in vehicles)
        for shortcut in cell.shortcuts.values():
            for vehicle in vehicles:
                entry, _ = match(shortcut, vehicle)
                if entry is not None:
                    assert path_feasible(cell.path(entry, shortcut), vehicle, small_dataset.net)
    assert np.all(index.cell(0).fits(RestrictionTriple(0.01, 0.01, 0.01)))
