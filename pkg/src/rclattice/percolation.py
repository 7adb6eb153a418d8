"""Bond/site configurations, cluster labelling and connectivity queries.

Two labelling routes exist on purpose. :func:`label_clusters` is a
union-find over an explicit graph and is the reference. :func:`crossing`
and the batched helpers go through ``scipy.ndimage`` / ``scipy.sparse``
for speed; the test-suite checks them against the union-find route.
"""
from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .lattice import Graph, as_mask, star_bonds
from .model import Interaction

__all__ = [
    "UnionFind",
    "ClusterLabeling",
    "sample_bernoulli",
    "uniform_field",
    "label_clusters",
    "connected",
    "star_label_clusters",
    "crossing",
    "crossing_frequency",
    "agreement_map",
    "ground_energy_bonds",
    "components",
    "batch_component_labels",
    "write_configs",
    "read_configs",
]


class UnionFind:
    """Array-backed disjoint sets: path halving, union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True


@dataclass
class ClusterLabeling:
    """Partition of the participating vertices into open clusters.

    ``labels[v]`` is a dense cluster id (clusters ordered by their smallest
    vertex) or -1 for a closed site. ``k_wired`` merges every cluster that
    touches the boundary set into one; ``k_hat`` counts only clusters that
    do not touch it.
    """
    labels: np.ndarray
    sizes: np.ndarray
    roots: np.ndarray
    touches_boundary: np.ndarray

    @property
    def k(self) -> int:
        return len(self.sizes)

    @property
    def k_hat(self) -> int:
        return int(np.count_nonzero(~self.touches_boundary))

    @property
    def k_wired(self) -> int:
        return self.k_hat + int(self.touches_boundary.any())

    def members(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.labels == cluster)

    @property
    def largest(self) -> int:
        return int(self.sizes.max()) if len(self.sizes) else 0


def sample_bernoulli(g: Graph, p, mode: str = "bond", rng=None) -> np.ndarray:
    """I.i.d. Bernoulli(p) marks on bonds or sites (uint8 0/1)."""
    rng = np.random.default_rng(rng)
    n = g.n_bonds if mode == "bond" else g.n_vertices
    if mode not in ("bond", "site"):
        raise ValueError("mode must be 'bond' or 'site'")
    return (uniform_field(n, rng) < np.asarray(p)).astype(np.uint8)


def uniform_field(n: int, rng) -> np.ndarray:
    """One uniform per element; thresholding it at p couples all p at once."""
    return np.random.default_rng(rng).random(n)


def label_clusters(g: Graph, config, boundary=(), structure: str = "bond") -> ClusterLabeling:
    """Union-find labelling of the open clusters of a bond or site config.

    For bond configurations every vertex takes part (isolated vertices are
    singleton clusters). For site configurations only open sites do, and a
    bond is usable when both endpoints are open.
    """
    cfg = np.asarray(config)
    V = g.n_vertices
    if structure == "bond":
        if cfg.shape != (g.n_bonds,):
            raise ValueError("bond config has wrong length")
        active = np.ones(V, dtype=bool)
        use = cfg.astype(bool)
    elif structure == "site":
        if cfg.shape != (V,):
            raise ValueError("site config has wrong length")
        active = cfg.astype(bool)
        use = active[g.bonds[:, 0]] & active[g.bonds[:, 1]]
    else:
        raise ValueError("structure must be 'bond' or 'site'")
    uf = UnionFind(V)
    for x, y in g.bonds[use].tolist():
        uf.union(x, y)
    return _labeling_from_roots(np.array([uf.find(v) for v in range(V)]),
                                active, as_mask(g, boundary) if len(boundary) else np.zeros(V, bool))


def _labeling_from_roots(root: np.ndarray, active: np.ndarray,
                         bmask: np.ndarray) -> ClusterLabeling:
    V = len(root)
    labels = -np.ones(V, dtype=np.int64)
    # canonical representative: smallest vertex of each cluster
    first = np.full(V, V, dtype=np.int64)
    verts = np.flatnonzero(active)
    np.minimum.at(first, root[verts], verts)
    rep = first[root]
    uniq = np.unique(rep[verts])
    labels[verts] = np.searchsorted(uniq, rep[verts])
    sizes = np.bincount(labels[verts], minlength=len(uniq))
    touches = np.zeros(len(uniq), dtype=bool)
    hit = verts[bmask[verts]]
    touches[labels[hit]] = True
    return ClusterLabeling(labels, sizes, uniq, touches)


def components(n_vertices: int, bonds: np.ndarray, open_mask=None) -> np.ndarray:
    """Component label per vertex via scipy (fast path for large graphs)."""
    b = bonds if open_mask is None else bonds[np.asarray(open_mask, bool)]
    m = coo_matrix((np.ones(len(b), dtype=np.int8), (b[:, 0], b[:, 1])),
                   shape=(n_vertices, n_vertices))
    return connected_components(m, directed=False)[1]


def batch_component_labels(n_vertices: int, bonds: np.ndarray, open_rows: np.ndarray,
                           active_rows: np.ndarray | None = None) -> np.ndarray:
    """Minimum-label propagation over many configurations at once.

    ``open_rows`` is (N, E) bool. Returns (N, V) labels where each vertex
    carries the smallest vertex index of its component; inactive vertices
    get label ``V``. Independent of the union-find code path.
    """
    open_rows = np.asarray(open_rows, dtype=bool)
    N = open_rows.shape[0]
    lab = np.broadcast_to(np.arange(n_vertices), (N, n_vertices)).copy()
    if active_rows is not None:
        lab[~active_rows] = n_vertices
        open_rows = open_rows & active_rows[:, bonds[:, 0]] & active_rows[:, bonds[:, 1]]
    changed = True
    while changed:
        changed = False
        for e, (x, y) in enumerate(bonds.tolist()):
            m = open_rows[:, e]
            if not m.any():
                continue
            lo = np.minimum(lab[:, x], lab[:, y])
            upd = m & ((lab[:, x] != lo) | (lab[:, y] != lo))
            if upd.any():
                lab[upd, x] = lo[upd]
                lab[upd, y] = lo[upd]
                changed = True
    return lab


def connected(g: Graph, config, x: int, target, structure: str = "bond") -> bool:
    """Is ``x`` joined by an open path to vertex or region ``target``?

    For site configurations ``x`` and the reached target vertex must be open.
    ``x`` is trivially connected to itself.
    """
    targets = {int(target)} if np.isscalar(target) else {int(t) for t in target}
    if x in targets and (structure == "bond" or np.asarray(config)[x]):
        return True
    lab = label_clusters(g, config, structure=structure)
    if lab.labels[x] < 0:
        return False
    t = np.fromiter(targets, dtype=np.int64)
    return bool(np.any(lab.labels[t] == lab.labels[x]))


def star_label_clusters(g: Graph, site_config, value: int = 0) -> ClusterLabeling:
    """Clusters of sites holding ``value`` under 8-neighbour adjacency."""
    sb = star_bonds(g)
    star = Graph(g.n_vertices, sb, kind="star")
    active = (np.asarray(site_config) == value).astype(np.uint8)
    return label_clusters(star, active, structure="site")


def _grid_labels(g: Graph, config, structure: str) -> np.ndarray:
    """2-d label image; bonds become sites of a (2R-1)x(2C-1) grid."""
    if g.kind != "box" or g.params["d"] != 2 or g.params["topology"] != "free":
        raise ValueError("crossings are defined on free 2-d boxes")
    R, C = g.shape
    cfg = np.asarray(config)
    if structure == "site":
        img = cfg.reshape(R, C).astype(bool)
        return ndimage.label(img)[0]
    if structure != "bond":
        raise ValueError("structure must be 'bond' or 'site'")
    img = np.zeros((2 * R - 1, 2 * C - 1), dtype=bool)
    img[::2, ::2] = True
    ends = g.bonds
    r = (g.coords[ends[:, 0], 0] + g.coords[ends[:, 1], 0])
    c = (g.coords[ends[:, 0], 1] + g.coords[ends[:, 1], 1])
    img[r, c] = cfg.astype(bool)
    return ndimage.label(img)[0]


def crossing(g: Graph, config, mode: str = "left-right", structure: str = "bond") -> bool:
    """Open crossing between opposite faces of a free 2-d box."""
    lab = _grid_labels(g, config, structure)
    if mode == "left-right":
        a, b = lab[:, 0], lab[:, -1]
    elif mode == "top-bottom":
        a, b = lab[0, :], lab[-1, :]
    else:
        raise ValueError("mode must be 'left-right' or 'top-bottom'")
    a, b = a[a > 0], b[b > 0]
    return bool(np.intersect1d(a, b).size)


def crossing_frequency(n: int, ps, samples: int, rng, structure: str = "bond",
                       mode: str = "left-right") -> np.ndarray:
    """Crossing frequency on an n x n box at each p, one uniform field per sample.

    Thresholding the same field at every p gives nested open sets, so the
    per-sample crossing indicator is nondecreasing in p.
    """
    rng = np.random.default_rng(rng)
    g = _box_cache(n)
    ps = np.atleast_1d(np.asarray(ps, dtype=float))
    size = g.n_bonds if structure == "bond" else g.n_vertices
    hits = np.zeros(len(ps), dtype=np.int64)
    for _ in range(samples):
        u = rng.random(size)
        for i, p in enumerate(ps):
            hits[i] += crossing(g, u < p, mode, structure)
    return hits / samples


_BOXES: dict[int, Graph] = {}


def _box_cache(n: int) -> Graph:
    from .lattice import build_box
    if n not in _BOXES:
        _BOXES[n] = build_box(2, n)
    return _BOXES[n]


def agreement_map(sigma, eta) -> np.ndarray:
    """1 where ``sigma`` agrees with the reference ``eta``, 0 elsewhere."""
    sigma, eta = np.asarray(sigma), np.asarray(eta)
    if sigma.shape != eta.shape:
        raise ValueError("configurations must live on the same graph")
    return (sigma == eta).astype(np.uint8)


def ground_energy_bonds(g: Graph, inter: Interaction, sigma, partition=None):
    """Bonds whose spin pair attains min U; optionally classify open bonds.

    ``partition`` is a sequence of collections of spin-value pairs that
    together partition ``{(a, b): U(a, b) = m}``. Returns the bond config,
    plus an array of class indices (-1 for closed bonds) when a partition is
    given.
    """
    S = inter.alphabet
    idx = S.index(sigma)
    u = inter.U[idx[g.bonds[:, 0]], idx[g.bonds[:, 1]]]
    m = inter.m
    is_open = np.isclose(u, m, rtol=0, atol=1e-12)
    if partition is None:
        return is_open.astype(np.uint8)
    ground = {(a, b) for i, a in enumerate(S.values) for j, b in enumerate(S.values)
              if np.isclose(inter.U[i, j], m, rtol=0, atol=1e-12)}
    lookup: dict[tuple[int, int], int] = {}
    for c, part in enumerate(partition):
        for pair in part:
            pair = (int(pair[0]), int(pair[1]))
            if pair in lookup:
                raise ValueError(f"pair {pair} appears in two classes")
            lookup[pair] = c
    if set(lookup) != ground:
        raise ValueError("classes must partition the set of bond ground states")
    sv = np.asarray(sigma)
    cls = -np.ones(g.n_bonds, dtype=np.int64)
    for b in np.flatnonzero(is_open):
        x, y = g.bonds[b]
        cls[b] = lookup.get((int(sv[x]), int(sv[y])), lookup.get((int(sv[y]), int(sv[x]))))
    return is_open.astype(np.uint8), cls


def write_configs(path, g: Graph, structure: str, configs) -> None:
    """Header line (JSON) followed by one base64 packed-bit row per config."""
    configs = np.atleast_2d(np.asarray(configs, dtype=np.uint8))
    header = {"graph": g.descriptor(), "structure": structure,
              "length": int(configs.shape[1]), "count": int(configs.shape[0])}
    with open(Path(path), "w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for row in configs:
            fh.write(base64.b64encode(np.packbits(row).tobytes()).decode() + "\n")


def read_configs(path) -> tuple[dict, np.ndarray]:
    with open(Path(path)) as fh:
        header = json.loads(fh.readline())
        rows = [np.unpackbits(np.frombuffer(base64.b64decode(line.strip()), np.uint8))
                [: header["length"]] for line in fh if line.strip()]
    arr = np.array(rows, dtype=np.uint8).reshape(-1, header["length"])
    return header, arr
