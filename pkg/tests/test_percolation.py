import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import ndimage

from rclattice.lattice import build_box, build_custom
from rclattice.model import make_model
from rclattice.percolation import (
    UnionFind,
    agreement_map,
    components,
    connected,
    crossing,
    crossing_frequency,
    ground_energy_bonds,
    label_clusters,
    read_configs,
    sample_bernoulli,
    star_label_clusters,
    write_configs,
)


def test_sample_extremes(box5, rng):
    assert sample_bernoulli(box5, 0.0, rng=rng).sum() == 0
    assert sample_bernoulli(box5, 1.0, "site", rng).sum() == 25


def test_sample_mean(rng):
    g = build_custom(2, [(0, 1)])
    n = 10**6
    x = (rng.random(n) < 0.37)
    draws = np.array([sample_bernoulli(g, 0.37, rng=rng)[0] for _ in range(2000)])
    assert abs(x.mean() - 0.37) < 3 * np.sqrt(0.37 * 0.63 / n)
    assert abs(draws.mean() - 0.37) < 3 * np.sqrt(0.37 * 0.63 / 2000)


def test_cluster_counts(box5):
    closed = label_clusters(box5, np.zeros(box5.n_bonds))
    assert closed.k == 25
    assert label_clusters(box5, np.ones(box5.n_bonds)).k == 1


def test_boundary_touching_counts():
    g = build_box(2, 4)
    ring = [v for v in range(16) if min(g.coord(v)) == 0 or max(g.coord(v)) == 3]
    inner = [g.index((1, 1)), g.index((1, 2)), g.index((2, 1)), g.index((2, 2))]
    cfg = np.zeros(g.n_bonds, np.uint8)
    # open the whole ring plus the bonds from three inner sites to the ring;
    # (2, 2) stays a singleton
    for b, (x, y) in enumerate(g.bonds):
        if x in ring and y in ring:
            cfg[b] = 1
        if {x, y} & set(inner[:3]) and not {x, y} & {inner[3]}:
            cfg[b] = 1
    lab = label_clusters(g, cfg, boundary=ring)
    assert lab.k == 2
    assert lab.k_hat == 1
    assert lab.k_wired == 2


def test_connected_examples():
    g = build_box(2, 3)
    assert connected(g, np.zeros(g.n_bonds), 0, 0)
    assert not connected(g, np.zeros(g.n_bonds), 0, 8)
    cfg = np.zeros(g.n_bonds, np.uint8)
    for a, b in [((0, 0), (1, 0)), ((1, 0), (2, 0)), ((2, 0), (2, 1)), ((2, 1), (2, 2))]:
        cfg[g.find_bond(g.index(a), g.index(b))] = 1
    assert connected(g, cfg, 0, 8)


def test_star_clusters():
    g = build_box(2, 4)
    s = np.ones(16, int)
    s[[g.index((0, 0)), g.index((1, 1))]] = 0
    lab = star_label_clusters(g, s, 0)
    assert lab.k == 1 and lab.sizes[0] == 2
    chess = np.array([(r + c) % 2 for r in range(4) for c in range(4)])
    assert star_label_clusters(g, chess, 0).k == 1
    assert star_label_clusters(g, np.ones(16, int), 0).k == 0


def test_crossing_examples():
    g = build_box(2, 6)
    assert crossing(g, np.ones(g.n_bonds))
    assert not crossing(g, np.zeros(g.n_bonds))
    row = np.zeros(g.n_bonds, np.uint8)
    for c in range(5):
        row[g.find_bond(g.index((3, c)), g.index((3, c + 1)))] = 1
    assert crossing(g, row, "left-right")
    assert not crossing(g, row, "top-bottom")


def test_crossing_frequency_monotone(rng):
    f = crossing_frequency(16, [0.3, 0.5, 0.7], 200, rng)
    assert f[0] <= f[1] <= f[2]


def test_agreement_and_ground_bonds(box5):
    s = np.ones(25, int)
    assert agreement_map(s, s).all()
    assert not agreement_map(-s, s).any()
    p = np.array([1, 2, 3, 1, 2])
    p2 = p.copy()
    p2[3] = 2
    assert (agreement_map(p2, p) == 0).sum() == 1
    _, ising = make_model("ising")
    assert ground_energy_bonds(box5, ising, s).all()
    flip = s.copy()
    flip[box5.index((2, 2))] = -1
    assert (ground_energy_bonds(box5, ising, flip) == 0).sum() == 4
    _, af = make_model("antiferro_ising")
    chess = np.array([1 - 2 * ((r + c) % 2) for r in range(5) for c in range(5)])
    assert ground_energy_bonds(box5, af, chess).all()
    _, cls = ground_energy_bonds(box5, ising, s, partition=[[(1, 1)], [(-1, -1)]])
    assert np.all(cls == 0)


def test_config_io_round_trip(tmp_path, box5, rng):
    rows = np.array([sample_bernoulli(box5, 0.4, rng=rng) for _ in range(7)])
    write_configs(tmp_path / "c.txt", box5, "bond", rows)
    header, back = read_configs(tmp_path / "c.txt")
    assert header["count"] == 7
    assert np.array_equal(back, rows)


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 7), st.integers(0, 2**32 - 1), st.floats(0.0, 1.0))
def test_union_find_matches_scipy(n, seed, p):
    g = build_box(2, n)
    cfg = np.random.default_rng(seed).random(g.n_bonds) < p
    uf = UnionFind(g.n_vertices)
    for (x, y) in g.bonds[cfg]:
        uf.union(int(x), int(y))
    roots = np.array([uf.find(v) for v in range(g.n_vertices)])
    lab = components(g.n_vertices, g.bonds, cfg)
    # same partition: labels map one to one
    pairs = set(zip(roots.tolist(), lab.tolist()))
    assert len(pairs) == len(set(roots.tolist())) == len(set(lab.tolist()))


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**32 - 1), st.floats(0.2, 0.8))
def test_site_labels_match_ndimage(n, seed, p):
    g = build_box(2, n)
    occ = (np.random.default_rng(seed).random(g.n_vertices) < p).astype(np.uint8)
    ours = label_clusters(g, occ, structure="site")
    img, k = ndimage.label(occ.reshape(n, n))
    assert ours.k == k
    assert sorted(ours.sizes.tolist()) == sorted(np.bincount(img.ravel())[1:].tolist())


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 10), st.integers(0, 2**32 - 1), st.floats(0.0, 1.0))
def test_bond_crossing_matches_union_find(n, seed, p):
    g = build_box(2, n)
    cfg = np.random.default_rng(seed).random(g.n_bonds) < p
    left = [g.index((r, 0)) for r in range(n)]
    right = [g.index((r, n - 1)) for r in range(n)]
    lab = components(g.n_vertices, g.bonds, cfg)
    via_uf = bool(set(lab[left]) & set(lab[right]))
    assert crossing(g, cfg) == via_uf
