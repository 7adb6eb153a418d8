"""Finite graphs, regions and bond-set conventions.

Vertices are dense integers ``0..V-1``. Bonds are stored once, as sorted
pairs ``(x, y)`` with ``x < y``, in a fixed construction order. Boxes use
row-major coordinates: ``index = sum(c[i] * stride[i])`` with the last axis
varying fastest, so on a 2-d box ``index = row * ncols + col``.
"""
from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Graph",
    "build_box",
    "build_tree",
    "build_triangular",
    "build_custom",
    "boundary",
    "bond_sets",
    "as_mask",
    "bipartition",
    "from_descriptor",
]

_MAX_VERTICES = 2**62


@dataclass(frozen=True, eq=False)
class Graph:
    n_vertices: int
    bonds: np.ndarray
    kind: str = "custom"
    params: dict = field(default_factory=dict)
    coords: np.ndarray | None = None

    def __post_init__(self):
        bonds = np.asarray(self.bonds, dtype=np.int64).reshape(-1, 2)
        if bonds.size and (bonds.min() < 0 or bonds.max() >= self.n_vertices):
            raise ValueError("bond endpoint out of range")
        if np.any(bonds[:, 0] == bonds[:, 1]):
            raise ValueError("self-loops are not allowed")
        lo = np.minimum(bonds[:, 0], bonds[:, 1])
        hi = np.maximum(bonds[:, 0], bonds[:, 1])
        bonds = np.stack([lo, hi], axis=1)
        keys = lo * self.n_vertices + hi
        if len(np.unique(keys)) != len(keys):
            raise ValueError("duplicate bonds are not allowed")
        bonds.setflags(write=False)
        object.__setattr__(self, "bonds", bonds)

    @property
    def n_bonds(self) -> int:
        return len(self.bonds)

    @cached_property
    def _adjacency(self) -> tuple[list[np.ndarray], list[np.ndarray]]:
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.n_vertices)]
        for b, (x, y) in enumerate(self.bonds.tolist()):
            adj[x].append((y, b))
            adj[y].append((x, b))
        nbrs, inc = [], []
        for a in adj:
            a.sort()
            nbrs.append(np.array([w for w, _ in a], dtype=np.int64))
            inc.append(np.array([b for _, b in a], dtype=np.int64))
        return nbrs, inc

    @property
    def neighbors(self) -> list[np.ndarray]:
        """Sorted neighbour lists."""
        return self._adjacency[0]

    @property
    def incident(self) -> list[np.ndarray]:
        """Bond indices per vertex, aligned with ``neighbors``."""
        return self._adjacency[1]

    @cached_property
    def degree(self) -> np.ndarray:
        return np.array([len(n) for n in self.neighbors], dtype=np.int64)

    @cached_property
    def padded_neighbors(self) -> np.ndarray:
        """(V, max_degree) neighbor table padded with -1."""
        width = int(self.degree.max()) if self.n_vertices and self.n_bonds else 0
        table = -np.ones((self.n_vertices, width), dtype=np.int64)
        for v, nb in enumerate(self.neighbors):
            table[v, : len(nb)] = nb
        return table

    @cached_property
    def bond_index(self) -> dict[tuple[int, int], int]:
        return {(int(x), int(y)): b for b, (x, y) in enumerate(self.bonds)}

    def find_bond(self, x: int, y: int) -> int:
        return self.bond_index[(min(x, y), max(x, y))]

    @property
    def shape(self) -> tuple[int, ...]:
        if self.kind != "box":
            raise ValueError(f"graph of kind {self.kind!r} has no box shape")
        return tuple(self.params["sides"])

    def index(self, coord: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(coord), self.shape))

    def coord(self, v: int) -> tuple[int, ...]:
        return tuple(int(c) for c in np.unravel_index(v, self.shape))

    def descriptor(self) -> dict:
        if self.kind == "custom":
            return {
                "kind": "custom",
                "n_vertices": int(self.n_vertices),
                "bonds": self.bonds.tolist(),
            }
        return {"kind": self.kind, **self.params}

    def __repr__(self):
        return f"Graph(kind={self.kind!r}, V={self.n_vertices}, B={self.n_bonds})"


def build_box(d: int, n: int | Sequence[int], topology: str = "free") -> Graph:
    """The box {0..n-1}^d with nearest-neighbour bonds.

    ``n`` may be a single side length or one per axis. Periodic boxes wrap
    every axis and need side >= 3 so that no multi-edges arise.
    """
    if d < 1:
        raise ValueError("dimension must be >= 1")
    sides = (n,) * d if np.isscalar(n) else tuple(n)
    if len(sides) != d:
        raise ValueError("need one side length per axis")
    sides = tuple(int(s) for s in sides)
    if min(sides) < 1:
        raise ValueError("side lengths must be >= 1")
    if topology not in ("free", "periodic"):
        raise ValueError(f"unknown topology {topology!r}")
    if sum(math.log2(s) for s in sides) >= math.log2(_MAX_VERTICES):
        raise ValueError("box too large for the vertex index type")
    if topology == "periodic" and min(sides) < 3:
        raise ValueError("periodic boxes need side >= 3 on every axis")

    V = math.prod(sides)
    idx = np.arange(V, dtype=np.int64).reshape(sides)
    parts = []
    for axis in range(d):
        if topology == "periodic":
            nxt = np.roll(idx, -1, axis=axis)
            parts.append(np.stack([idx.ravel(), nxt.ravel()], axis=1))
        else:
            lo = np.take(idx, np.arange(sides[axis] - 1), axis=axis)
            hi = np.take(idx, np.arange(1, sides[axis]), axis=axis)
            parts.append(np.stack([lo.ravel(), hi.ravel()], axis=1))
    bonds = np.concatenate(parts) if parts else np.zeros((0, 2), np.int64)
    coords = np.stack(np.unravel_index(np.arange(V), sides), axis=1)
    params = {"d": d, "sides": list(sides), "topology": topology}
    return Graph(V, bonds, kind="box", params=params, coords=coords)


def build_tree(d: int, depth: int) -> Graph:
    """Ball of radius ``depth`` around an edge midpoint of the (d+1)-regular tree.

    Vertices 0 and 1 are the two roots joined by the central edge. Every
    vertex at distance < depth from the central edge has d+1 neighbours; the
    leaves (distance == depth) are listed in ``params["leaves"]``.
    """
    if d < 1 or depth < 0:
        raise ValueError("need d >= 1 and depth >= 0")
    bonds = [(0, 1)]
    frontier = [0, 1]
    nxt_id = 2
    for _ in range(depth):
        new = []
        for v in frontier:
            for _ in range(d):
                bonds.append((v, nxt_id))
                new.append(nxt_id)
                nxt_id += 1
        frontier = new
    params = {"d": d, "depth": depth, "leaves": list(frontier) if depth else [0, 1]}
    return Graph(nxt_id, np.array(bonds), kind="tree", params=params)


def build_triangular(side: int) -> Graph:
    """Rhombus of the triangular lattice: square grid plus one diagonal per cell."""
    if side < 1:
        raise ValueError("side must be >= 1")
    sq = build_box(2, side)
    idx = np.arange(side * side).reshape(side, side)
    diag = np.stack([idx[:-1, :-1].ravel(), idx[1:, 1:].ravel()], axis=1)
    bonds = np.concatenate([sq.bonds, diag])
    return Graph(side * side, bonds, kind="triangular",
                 params={"side": side}, coords=sq.coords)


def build_custom(n_vertices: int, bonds: Iterable[Sequence[int]]) -> Graph:
    return Graph(int(n_vertices), np.array(list(bonds), dtype=np.int64).reshape(-1, 2))


def from_descriptor(desc: dict) -> Graph:
    kind = desc.get("kind")
    if kind == "box":
        sides = desc.get("sides", desc.get("n"))
        return build_box(int(desc["d"]), sides, desc.get("topology", "free"))
    if kind == "tree":
        return build_tree(int(desc["d"]), int(desc["depth"]))
    if kind == "triangular":
        return build_triangular(int(desc["side"]))
    if kind == "custom":
        return build_custom(desc["n_vertices"], desc["bonds"])
    raise ValueError(f"unknown graph kind {kind!r}")


def as_mask(g: Graph, region: Iterable[int] | np.ndarray | None) -> np.ndarray:
    """Boolean vertex mask; ``None`` means the whole vertex set."""
    if region is None:
        return np.ones(g.n_vertices, dtype=bool)
    arr = np.asarray(region)
    if arr.dtype == bool:
        if arr.shape != (g.n_vertices,):
            raise ValueError("mask has wrong length")
        return arr.copy()
    mask = np.zeros(g.n_vertices, dtype=bool)
    idx = np.fromiter((int(v) for v in np.ravel(arr)), dtype=np.int64) if arr.size else np.zeros(0, np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= g.n_vertices):
        raise ValueError("region is not a subset of the graph's vertices")
    mask[idx] = True
    return mask


def boundary(g: Graph, region) -> frozenset[int]:
    """Outer vertex boundary: vertices outside ``region`` adjacent to it."""
    inside = as_mask(g, region)
    x, y = g.bonds[:, 0], g.bonds[:, 1]
    out = np.concatenate([y[inside[x] & ~inside[y]], x[inside[y] & ~inside[x]]])
    return frozenset(int(v) for v in np.unique(out))


def bond_sets(g: Graph, region) -> tuple[np.ndarray, np.ndarray]:
    """Indices of (inner, touching) bonds: both endpoints / at least one in region."""
    inside = as_mask(g, region)
    a, b = inside[g.bonds[:, 0]], inside[g.bonds[:, 1]]
    return np.flatnonzero(a & b), np.flatnonzero(a | b)


def bipartition(g: Graph) -> np.ndarray:
    """0/1 colouring with the smallest vertex of each component coloured 0.

    Raises ValueError if the graph is not bipartite.
    """
    color = -np.ones(g.n_vertices, dtype=np.int64)
    for start in range(g.n_vertices):
        if color[start] >= 0:
            continue
        color[start] = 0
        queue = deque([start])
        while queue:
            v = queue.popleft()
            for w in g.neighbors[v]:
                if color[w] < 0:
                    color[w] = 1 - color[v]
                    queue.append(w)
                elif color[w] == color[v]:
                    raise ValueError("graph is not bipartite")
    return color


def star_bonds(g: Graph) -> np.ndarray:
    """Bonds of the d_inf = 1 (8-neighbour) adjacency on a 2-d box."""
    if g.kind != "box" or g.params["d"] != 2:
        raise ValueError("*-adjacency is defined for 2-dimensional boxes only")
    R, C = g.shape
    idx = np.arange(R * C).reshape(R, C)
    pairs = []
    for dr, dc in itertools.product((-1, 0, 1), repeat=2):
        if (dr, dc) <= (0, 0):
            continue
        r0, r1 = max(0, -dr), min(R, R - dr)
        c0, c1 = max(0, -dc), min(C, C - dc)
        a = idx[r0:r1, c0:c1].ravel()
        b = idx[r0 + dr:r1 + dr, c0 + dc:c1 + dc].ravel()
        pairs.append(np.stack([a, b], axis=1))
    return np.concatenate(pairs)
