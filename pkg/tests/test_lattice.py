import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rclattice.lattice import (
    bipartition,
    bond_sets,
    boundary,
    build_box,
    build_custom,
    build_tree,
    build_triangular,
    from_descriptor,
    star_bonds,
)

from conftest import block


def test_box_sizes():
    g = build_box(2, 2)
    assert (g.n_vertices, g.n_bonds) == (4, 4)
    p = build_box(1, 5)
    assert (p.n_vertices, p.n_bonds) == (5, 4)
    t = build_box(2, 4, "periodic")
    assert t.n_bonds == 32
    assert np.all(t.degree == 4)


def test_small_periodic_box_rejected():
    with pytest.raises(ValueError):
        build_box(2, 2, "periodic")


def test_bad_bonds_rejected():
    with pytest.raises(ValueError):
        build_custom(3, [(0, 0)])
    with pytest.raises(ValueError):
        build_custom(3, [(0, 1), (1, 0)])
    with pytest.raises(ValueError):
        build_custom(2, [(0, 2)])


def test_row_major_index():
    g = build_box(2, (3, 4))
    assert g.index((1, 2)) == 6
    assert g.coord(6) == (1, 2)


def test_boundary_examples(box5):
    c = box5.index((2, 2))
    assert boundary(box5, [c]) == frozenset(box5.neighbors[c].tolist())
    assert boundary(box5, None) == frozenset()
    inner = block(box5, range(1, 4), range(1, 4))
    bd = boundary(box5, inner)
    assert len(bd) == 12
    corners = {box5.index(x) for x in [(0, 0), (0, 4), (4, 0), (4, 4)]}
    assert not bd & corners


def test_bond_sets_examples(box5):
    c = box5.index((2, 2))
    inner, touching = bond_sets(box5, [c])
    assert len(inner) == 0 and len(touching) == 4
    inner, touching = bond_sets(box5, None)
    assert len(inner) == len(touching) == box5.n_bonds
    g4 = build_box(2, 4)
    inner, touching = bond_sets(g4, block(g4, range(2), range(2)))
    assert (len(inner), len(touching)) == (4, 8)


def test_tree_degrees():
    t = build_tree(2, 3)
    deg = t.degree
    leaves = set(t.params["leaves"])
    assert all(deg[v] == 3 for v in range(t.n_vertices) if v not in leaves)
    assert all(deg[v] == 1 for v in leaves)
    assert t.n_bonds == t.n_vertices - 1


def test_triangular_interior_degree():
    g = build_triangular(5)
    assert g.degree[2 * 5 + 2] == 6


def test_star_bonds_count():
    g = build_box(2, 3)
    # 12 lattice bonds plus 8 diagonals
    assert len(star_bonds(g)) == 20


def test_descriptor_round_trip():
    for g in (build_box(2, 4, "periodic"), build_tree(2, 2), build_triangular(3),
              build_custom(3, [(0, 1), (1, 2)])):
        h = from_descriptor(g.descriptor())
        assert h.n_vertices == g.n_vertices
        assert np.array_equal(h.bonds, g.bonds)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.integers(2, 5))
def test_box_is_bipartite_and_bonds_sorted(d, n):
    g = build_box(d, n)
    color = bipartition(g)
    assert np.all(color[g.bonds[:, 0]] != color[g.bonds[:, 1]])
    assert np.all(g.bonds[:, 0] < g.bonds[:, 1])
    assert g.degree.sum() == 2 * g.n_bonds


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 6), st.data())
def test_region_bond_partition(n, data):
    g = build_box(2, n)
    mask = np.array(data.draw(st.lists(st.booleans(), min_size=g.n_vertices, max_size=g.n_vertices)))
    inner, touching = bond_sets(g, mask)
    assert set(inner) <= set(touching)
    bd = boundary(g, mask)
    assert not any(mask[v] for v in bd)
    # every touching bond that is not inner has exactly one endpoint on the boundary
    for b in set(touching) - set(inner):
        x, y = g.bonds[b]
        assert (x in bd) != (y in bd)
