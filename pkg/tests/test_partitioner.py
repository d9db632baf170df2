import pytest

from app.planner.datagen import gen_network
from app.planner.errors import InvalidParam, UnknownCell
from app.planner.partitioner import boundary_vertices, fingerprint, from_assignment, partition
from app.planner.pipeline import PARTITION_SEED_OFFSET


def test_every_vertex_lands_in_exactly_one_cell(small_dataset) -> None:
    net, decomp = small_dataset.net, small_dataset.decomp
    seen = sorted(v for cell in decomp.cells for v in cell.vertices)
    assert seen == list(range(net.n_vertices))
    for cell in decomp.cells:
        assert all(decomp.cell_of[v] == cell.id for v in cell.vertices)
        assert 1 <= len(cell) <= 2 * 16


def test_edges_split_into_induced_and_crossing(small_dataset) -> None:
    net, decomp = small_dataset.net, small_dataset.decomp
    inside = sum(len(cell.edges) for cell in decomp.cells)
    assert inside + len(decomp.inter_cell_edges) == net.n_edges
    for eid in decomp.inter_cell_edges:
        edge = net.edges[eid]
        assert decomp.cell_of[edge.u] != decomp.cell_of[edge.v]
        assert decomp.is_boundary(edge.u) and decomp.is_boundary(edge.v)


def test_boundary_is_vertices_with_foreign_neighbours(small_dataset) -> None:
    net, decomp = small_dataset.net, small_dataset.decomp
    for cell in decomp.cells:
        expected = {
            v for v in cell.vertices if any(decomp.cell_of[w] != cell.id for w in net.neighbors(v))
        }
        assert boundary_vertices(decomp, cell.id) == expected


def test_partition_is_deterministic(small_dataset) -> None:
    again = partition(small_dataset.net, 16, seed=3 + PARTITION_SEED_OFFSET)
    assert again.cell_of == small_dataset.decomp.cell_of
    assert again.fingerprint == small_dataset.decomp.fingerprint


def test_reference_assignment(ref_net, ref_decomp) -> None:
    assert ref_decomp.n_cells == 3
    assert ref_decomp.cell(0).vertices == (1, 2, 3, 4, 5, 6, 7)
    assert len(ref_decomp.cell(0).edges) == 9
    assert boundary_vertices(ref_decomp, 0) == {6, 7}
    assert boundary_vertices(ref_decomp, 1) == {0}
    assert len(ref_decomp.inter_cell_edges) == 2
    with pytest.raises(UnknownCell):
        ref_decomp.cell(3)


def test_single_cell_has_no_boundary(ref_net) -> None:
    decomp = from_assignment(ref_net, [0] * ref_net.n_vertices)
    assert decomp.n_cells == 1
    assert decomp.boundary == (frozenset(),)
    assert decomp.inter_cell_edges == ()


def test_assignment_validation(ref_net) -> None:
    with pytest.raises(InvalidParam):
        from_assignment(ref_net, [0, 1])
    with pytest.raises(InvalidParam):
        from_assignment(ref_net, [0, 2, 2, 2, 2, 2, 2, 2, 2])
    with pytest.raises(InvalidParam):
        partition(ref_net, target_cell_size=1)


def test_fingerprint_tracks_assignment() -> None:
    assert fingerprint([0, 0, 1]) == fingerprint((0, 0, 1))
    assert fingerprint([0, 0, 1]) != fingerprint([0, 1, 1])


@pytest.mark.parametrize(("n", "seed"), [(2000, 1), (3000, 2), (5000, 3)])
def test_cell_sizes_stay_within_half_and_double_target(n: int, seed: int) -> None:
    decomp = partition(gen_network(n, seed=seed), 64, seed)
    sizes = [len(cell.vertices) for cell in decomp.cells]
    assert sum(sizes) == n
    assert min(sizes) >= 32
    assert max(sizes) <= 128
