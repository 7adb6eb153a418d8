"""Exact enumeration oracles on small spaces.

Configurations are enumerated in a fixed order: coordinates sorted by index,
the first coordinate most significant, values in alphabet order. The integer
``code`` of an outcome is its position in that order over the full product
space, so two runs always produce the same byte-identical CSV.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence

import networkx as nx
import numpy as np
from scipy.special import logsumexp

from .lattice import Graph, as_mask, bond_sets, boundary
from .model import Interaction
from .percolation import batch_component_labels, components

__all__ = [
    "DEFAULT_CAP",
    "CapExceeded",
    "EmptySupport",
    "FiniteDistribution",
    "Coupling",
    "PartialOrder",
    "Domination",
    "exact_gibbs",
    "exact_rc",
    "exact_site_rc",
    "bernoulli_product",
    "tv_distance",
    "dominates",
    "up_sets",
    "dominates_exhaustive",
    "rc_geometry",
]

DEFAULT_CAP = 2**24
_CHUNK = 2**16


class CapExceeded(ValueError):
    pass


class EmptySupport(ValueError):
    pass


@dataclass(eq=False)
class FiniteDistribution:
    """Law on ``values^labels`` given by unnormalised log weights.

    ``outcomes`` holds one row of coordinate values per listed outcome;
    outcomes that are not listed have probability zero.
    """
    outcomes: np.ndarray
    log_weights: np.ndarray
    labels: tuple[int, ...]
    values: tuple[int, ...] = (0, 1)

    def __post_init__(self):
        self.outcomes = np.asarray(self.outcomes, dtype=np.int64).reshape(len(self.log_weights), len(self.labels))
        self.log_weights = np.asarray(self.log_weights, dtype=float)
        self.labels = tuple(int(x) for x in self.labels)
        self.values = tuple(int(v) for v in self.values)

    @cached_property
    def log_z(self) -> float:
        if len(self.log_weights) == 0 or np.all(self.log_weights == -np.inf):
            raise EmptySupport("distribution has empty support")
        return float(logsumexp(self.log_weights))

    @cached_property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_weights - self.log_z)

    @property
    def n(self) -> int:
        return len(self.labels)

    @cached_property
    def positions(self) -> np.ndarray:
        """Outcomes translated to alphabet positions."""
        vals = np.array(self.values)
        pos = np.searchsorted(vals, self.outcomes)
        if not np.array_equal(vals[np.clip(pos, 0, len(vals) - 1)], self.outcomes):
            raise ValueError("outcome outside the value alphabet")
        return pos

    @cached_property
    def codes(self) -> np.ndarray:
        k = len(self.values)
        weights = k ** np.arange(self.n - 1, -1, -1, dtype=np.int64)
        return self.positions @ weights

    def same_space(self, other: "FiniteDistribution") -> bool:
        return self.labels == other.labels and self.values == other.values

    def full_vector(self) -> np.ndarray:
        """Probability of every point of the product space, indexed by code."""
        size = len(self.values) ** self.n
        if size > DEFAULT_CAP:
            raise CapExceeded("product space too large for a dense vector")
        return np.bincount(self.codes, weights=self.probs, minlength=size)

    def marginal(self, labels: Sequence[int]) -> "FiniteDistribution":
        cols = [self.labels.index(int(x)) for x in labels]
        sub = self.outcomes[:, cols]
        uniq, inv = np.unique(sub, axis=0, return_inverse=True)
        p = np.bincount(inv.ravel(), weights=self.probs, minlength=len(uniq))
        with np.errstate(divide="ignore"):
            return FiniteDistribution(uniq, np.log(p), tuple(labels), self.values)

    def prob(self, event: Callable[[np.ndarray], np.ndarray] | np.ndarray) -> float:
        """Probability of an event given as a row predicate or a boolean mask."""
        mask = event(self.outcomes) if callable(event) else np.asarray(event, bool)
        return float(self.probs[mask].sum())

    def expect(self, f: Callable[[np.ndarray], np.ndarray] | np.ndarray) -> float:
        vals = f(self.outcomes) if callable(f) else np.asarray(f, float)
        return float(np.dot(self.probs, vals))

    def prob_of(self, config) -> float:
        hit = np.all(self.outcomes == np.asarray(config), axis=1)
        return float(self.probs[hit].sum())

    def sample(self, size: int, rng=None) -> np.ndarray:
        rng = np.random.default_rng(rng)
        return self.outcomes[rng.choice(len(self.probs), size=size, p=self.probs)]

    def to_csv(self, path) -> None:
        order = np.argsort(self.codes, kind="stable")
        with open(Path(path), "w") as fh:
            fh.write("outcome_id,probability\n")
            for i in order:
                fh.write(f"{int(self.codes[i])},{self.probs[i]:.17g}\n")

    @classmethod
    def from_probs(cls, outcomes, probs, labels, values=(0, 1)) -> "FiniteDistribution":
        with np.errstate(divide="ignore"):
            return cls(np.asarray(outcomes), np.log(np.asarray(probs, float)), labels, values)


@dataclass(eq=False)
class Coupling:
    """Joint law on pairs, stored as a list of (left, right, probability)."""
    left: np.ndarray
    right: np.ndarray
    probs: np.ndarray
    labels: tuple[int, ...]
    values: tuple[int, ...] = (0, 1)

    def __post_init__(self):
        self.left = np.asarray(self.left, dtype=np.int64)
        self.right = np.asarray(self.right, dtype=np.int64)
        self.probs = np.asarray(self.probs, dtype=float)

    def marginals(self) -> tuple[FiniteDistribution, FiniteDistribution]:
        out = []
        for rows in (self.left, self.right):
            uniq, inv = np.unique(rows, axis=0, return_inverse=True)
            p = np.bincount(inv.ravel(), weights=self.probs, minlength=len(uniq))
            out.append(FiniteDistribution.from_probs(uniq, p, self.labels, self.values))
        return out[0], out[1]

    def p_differ(self) -> float:
        return float(self.probs[np.any(self.left != self.right, axis=1)].sum())

    def disagreement_law(self) -> FiniteDistribution:
        """Law of the 0/1 indicator field of coordinates where the pair differs."""
        d = (self.left != self.right).astype(np.int64)
        uniq, inv = np.unique(d, axis=0, return_inverse=True)
        p = np.bincount(inv.ravel(), weights=self.probs, minlength=len(uniq))
        return FiniteDistribution.from_probs(uniq, p, self.labels, (0, 1))

    def is_ordered(self, order: "PartialOrder | None" = None, tol: float = 0.0) -> bool:
        """Does the coupling put all its mass on ordered pairs left <= right?"""
        order = order or PartialOrder()
        vals = np.array(self.values)
        ok = order.pairwise(np.searchsorted(vals, self.left), np.searchsorted(vals, self.right))
        return float(self.probs[~ok].sum()) <= tol

    def to_csv(self, path) -> None:
        with open(Path(path), "w") as fh:
            fh.write("left,right,probability\n")
            for a, b, p in zip(self.left, self.right, self.probs):
                fh.write(f"{''.join(map(str, a))},{''.join(map(str, b))},{p:.17g}\n")


class PartialOrder:
    """Order on outcomes given in alphabet positions; coordinatewise by default."""

    def __init__(self, leq: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None):
        self._leq = leq
        self.coordinatewise = leq is None

    def pairwise(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Row-by-row comparison of two equally long stacks."""
        if self._leq is None:
            return np.all(a <= b, axis=1)
        return np.asarray(self._leq(a, b), dtype=bool)

    def matrix(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """(len(a), len(b)) table of a[i] <= b[j]."""
        if self._leq is None:
            return np.all(a[:, None, :] <= b[None, :, :], axis=2)
        ii, jj = np.meshgrid(np.arange(len(a)), np.arange(len(b)), indexing="ij")
        return self.pairwise(a[ii.ravel()], b[jj.ravel()]).reshape(len(a), len(b))


@dataclass
class Domination:
    holds: bool
    coupling: Coupling | None
    deficit: float

    def __bool__(self):
        return self.holds


# ---------------------------------------------------------------- enumeration

def _product_rows(n: int, k: int) -> np.ndarray:
    """All of range(k)^n in code order (first column most significant)."""
    if n == 0:
        return np.zeros((1, 0), dtype=np.int64)
    grids = np.indices((k,) * n).reshape(n, -1).T
    return grids.astype(np.int64)


def exact_gibbs(g: Graph, inter: Interaction, region=None, eta=None,
                couplings=None, cap: int = DEFAULT_CAP) -> FiniteDistribution:
    """Finite-volume Gibbs law on ``region`` with exterior ``eta``.

    Outcomes carry spin values; labels are the sorted region sites.
    Configurations violating a hard constraint are pruned while the
    enumeration is built, so ``cap`` bounds the surviving support, not
    ``|S|^|region|``. ``log_z`` is the log of the relative partition
    function whenever ``eta`` itself has finite energy near the region.
    """
    S = inter.alphabet
    k = len(S)
    inside = as_mask(g, region)
    sites = np.flatnonzero(inside)
    if eta is None:
        if not inside.all():
            raise ValueError("a boundary condition is needed when the region is not the whole graph")
        eta = np.full(g.n_vertices, S.values[0])
    base = S.index(eta)
    _, touching = bond_sets(g, inside)
    J = None if couplings is None else np.asarray(couplings, float)
    tb = g.bonds[touching]
    tJ = None if J is None else J[touching]
    if tJ is not None:
        keep = tJ != 0
        tb, tJ = tb[keep], tJ[keep]
    hard = np.isinf(inter.U)

    # position of each site in the row; -1 means fixed by eta
    pos = -np.ones(g.n_vertices, dtype=np.int64)
    pos[sites] = np.arange(len(sites))
    rows = np.zeros((1, 0), dtype=np.int64)
    for i, x in enumerate(sites):
        rows = np.concatenate([np.repeat(rows, k, axis=0),
                               np.tile(np.arange(k), len(rows))[:, None]], axis=1)
        if hard.any():
            # bonds from x to an already assigned site or to the exterior
            sel = (tb[:, 0] == x) | (tb[:, 1] == x)
            ok = np.ones(len(rows), dtype=bool)
            for a, b in tb[sel].tolist():
                y = b if a == x else a
                if pos[y] > i:
                    continue
                vy = rows[:, pos[y]] if pos[y] >= 0 else np.full(len(rows), base[y])
                ok &= ~hard[rows[:, i], vy]
            rows = rows[ok]
        if len(rows) > cap:
            raise CapExceeded(f"support exceeds cap {cap} after {i + 1} sites")
    if len(rows) == 0:
        raise EmptySupport("empty support: the boundary condition forbids every configuration")

    energy = np.empty(len(rows))
    for s in range(0, len(rows), _CHUNK):
        chunk = rows[s:s + _CHUNK]
        full = np.broadcast_to(base, (len(chunk), g.n_vertices)).copy()
        full[:, sites] = chunk
        u = inter.U[full[:, tb[:, 0]], full[:, tb[:, 1]]]
        if tJ is not None:
            u = u * tJ
        energy[s:s + _CHUNK] = u.sum(axis=1) + inter.V[chunk].sum(axis=1)
    with np.errstate(invalid="ignore"):
        logw = np.where(np.isinf(energy), -np.inf, -inter.beta * energy)
    ub = inter.U[base[tb[:, 0]], base[tb[:, 1]]]
    if tJ is not None:
        ub = ub * tJ
    e_eta = ub.sum() + inter.V[base[sites]].sum()
    if np.isfinite(e_eta):
        logw = logw + inter.beta * e_eta
    dist = FiniteDistribution(S.array[rows], logw, tuple(sites.tolist()), S.values)
    if dist.log_z == -np.inf:
        raise EmptySupport("empty support")
    return dist


@dataclass(frozen=True)
class RCGeometry:
    """Bond coordinates and the contracted graph used for cluster counting."""
    bond_ids: np.ndarray
    n_nodes: int
    edges: np.ndarray
    super_nodes: np.ndarray
    counting: str
    node_of: np.ndarray


def rc_geometry(g: Graph, counting: str = "free", region=None,
                exterior: str = "joined") -> RCGeometry:
    """Coordinates and cluster-count graph for the three boundary conventions.

    ``free``: bonds inside ``region`` (all bonds by default); every region
    vertex counts, isolated ones included. ``wired``: the bonds touching
    ``region``, with the exterior contracted and every cluster meeting the
    region or its boundary counted. ``compactified``: the exterior is one
    node and only clusters avoiding it count.

    ``exterior`` controls wired contraction: ``joined`` merges the whole
    exterior into one node; ``pieces`` contracts each connected component
    of the exterior separately (they differ on trees, not on boxes).
    """
    inside = as_mask(g, region)
    inner, touching = bond_sets(g, inside)
    sites = np.flatnonzero(inside)
    remap = -np.ones(g.n_vertices, dtype=np.int64)
    remap[sites] = np.arange(len(sites))
    none = np.zeros(0, np.int64)
    if counting == "free":
        return RCGeometry(inner, len(sites), remap[g.bonds[inner]], none, counting, remap)
    if counting not in ("wired", "compactified"):
        raise ValueError(f"unknown counting {counting!r}")
    if exterior not in ("joined", "pieces"):
        raise ValueError(f"unknown exterior mode {exterior!r}")
    bd = np.array(sorted(boundary(g, inside)), dtype=np.int64)
    if not len(bd):
        return RCGeometry(touching, len(sites), remap[g.bonds[touching]], none, counting, remap)
    outside = ~inside
    if counting == "wired" and exterior == "pieces":
        ob = g.bonds[outside[g.bonds[:, 0]] & outside[g.bonds[:, 1]]]
        comp = components(g.n_vertices, ob)
        pieces = np.unique(comp[bd])
        touched = outside & np.isin(comp, pieces)
        remap[touched] = len(sites) + np.searchsorted(pieces, comp[touched])
        supers = len(sites) + np.arange(len(pieces))
    else:
        remap[outside] = len(sites)
        supers = np.array([len(sites)])
    edges = remap[g.bonds[touching]]
    return RCGeometry(touching, len(sites) + len(supers), edges, supers, counting, remap)


def _rc_counts(geo: RCGeometry, rows: np.ndarray) -> np.ndarray:
    out = np.empty(len(rows), dtype=np.int64)
    for s in range(0, len(rows), _CHUNK):
        lab = batch_component_labels(geo.n_nodes, geo.edges, rows[s:s + _CHUNK].astype(bool))
        k = np.count_nonzero(lab == np.arange(geo.n_nodes), axis=1)
        if geo.counting == "compactified" and len(geo.super_nodes):
            k = k - 1
        out[s:s + _CHUNK] = k
    return out


def _log_pq(p_arr: np.ndarray, rows: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        lp, lq = np.log(p_arr), np.log1p(-p_arr)
    terms = np.where(rows == 1, lp, lq)
    return terms.sum(axis=1)


def _per_bond(p, g: Graph, ids: np.ndarray) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if arr.ndim == 0:
        arr = np.full(len(ids), float(arr))
    elif len(arr) == g.n_bonds:
        arr = arr[ids]
    elif len(arr) != len(ids):
        raise ValueError("per-bond p must have one entry per graph bond or per coordinate")
    if np.any((arr < 0) | (arr > 1)):
        raise ValueError("p must lie in [0, 1]")
    return arr


def exact_rc(g: Graph, p, q: float, counting: str = "free", region=None,
             cap: int = DEFAULT_CAP, exterior: str = "joined") -> FiniteDistribution:
    """Random-cluster law on the coordinate bonds of the chosen convention.

    ``p`` is a scalar or one value per bond. Labels are graph bond indices.
    """
    if q <= 0:
        raise ValueError("q must be positive")
    geo = rc_geometry(g, counting, region, exterior)
    E = len(geo.bond_ids)
    if 2**E > cap:
        raise CapExceeded(f"2^{E} bond configurations exceed cap {cap}")
    p_arr = _per_bond(p, g, geo.bond_ids)
    rows = _product_rows(E, 2)
    logw = _log_pq(p_arr, rows) + _rc_counts(geo, rows) * math.log(q)
    return FiniteDistribution(rows, logw, tuple(geo.bond_ids.tolist()), (0, 1))


def exact_site_rc(g: Graph, p, q: float, cap: int = DEFAULT_CAP) -> FiniteDistribution:
    """Site random-cluster law: p^open (1-p)^closed q^(number of open clusters)."""
    if q <= 0:
        raise ValueError("q must be positive")
    V = g.n_vertices
    if 2**V > cap:
        raise CapExceeded(f"2^{V} site configurations exceed cap {cap}")
    p_arr = np.asarray(p, float) * np.ones(V)
    if np.any((p_arr < 0) | (p_arr > 1)):
        raise ValueError("p must lie in [0, 1]")
    rows = _product_rows(V, 2)
    k = np.empty(len(rows), dtype=np.int64)
    ones = np.ones(g.n_bonds, dtype=bool)
    for s in range(0, len(rows), _CHUNK):
        act = rows[s:s + _CHUNK].astype(bool)
        lab = batch_component_labels(V, g.bonds, np.broadcast_to(ones, (len(act), g.n_bonds)), act)
        k[s:s + _CHUNK] = np.count_nonzero(lab == np.arange(V), axis=1)
    logw = _log_pq(p_arr, rows) + k * math.log(q)
    return FiniteDistribution(rows, logw, tuple(range(V)), (0, 1))


def bernoulli_product(p, labels: Sequence[int]) -> FiniteDistribution:
    """Independent 0/1 coordinates with P(1) = p (scalar or per coordinate)."""
    n = len(labels)
    p_arr = np.asarray(p, float) * np.ones(n)
    rows = _product_rows(n, 2)
    return FiniteDistribution(rows, _log_pq(p_arr, rows), tuple(labels), (0, 1))


# ------------------------------------------------------------ comparisons

def tv_distance(mu: FiniteDistribution, nu: FiniteDistribution, restriction=None) -> float:
    """Half L1 distance, optionally between the marginals on ``restriction``."""
    if not mu.same_space(nu):
        raise ValueError("distributions live on different outcome spaces")
    if restriction is not None:
        mu, nu = mu.marginal(restriction), nu.marginal(restriction)
    codes = np.concatenate([mu.codes, nu.codes])
    uniq, inv = np.unique(codes, return_inverse=True)
    inv = inv.ravel()
    a = np.bincount(inv[: len(mu.codes)], weights=mu.probs, minlength=len(uniq))
    b = np.bincount(inv[len(mu.codes):], weights=nu.probs, minlength=len(uniq))
    return float(min(1.0, 0.5 * np.abs(a - b).sum()))


_SCALE = 2**52
_SLACK = 1e-9
_MAX_BIPARTITE_EDGES = 400_000
_MAX_GRID = 2**16


def dominates(mu: FiniteDistribution, nu: FiniteDistribution,
              order: PartialOrder | None = None, max_outcomes: int = 20_000) -> Domination:
    """Decide ``mu <= nu`` stochastically by max-flow feasibility.

    Masses are scaled to integers so the flow is computed exactly; the
    decision tolerates a deficit of ``1e-9`` for float noise in the inputs.
    A witness coupling (on ordered pairs) is returned when the answer is yes.
    """
    if not mu.same_space(nu):
        raise ValueError("distributions live on different outcome spaces")
    order = order or PartialOrder()
    xs, px = _support(mu)
    ys, py = _support(nu)
    if len(xs) > max_outcomes or len(ys) > max_outcomes:
        raise CapExceeded("supports too large for the flow decision")
    cx = [int(round(v * _SCALE)) for v in px]
    cy = [int(round(v * _SCALE)) for v in py]
    G = nx.DiGraph()
    for i, c in enumerate(cx):
        G.add_edge("s", ("x", i), capacity=c)
    for j, c in enumerate(cy):
        G.add_edge(("y", j), "t", capacity=c)
    pos_x, pos_y = xs, ys
    n_pairs = len(xs) * len(ys)
    k, n = len(mu.values), mu.n
    if n_pairs <= _MAX_BIPARTITE_EDGES or not order.coordinatewise or k**n > _MAX_GRID:
        if n_pairs > 4 * _MAX_BIPARTITE_EDGES * 10:
            raise CapExceeded("too many outcome pairs for the flow decision")
        leq = order.matrix(pos_x, pos_y)
        for i, j in zip(*np.nonzero(leq)):
            G.add_edge(("x", int(i)), ("y", int(j)))
        mode = "bipartite"
    else:
        # cover graph of the product order: flow moves one coordinate up a step
        weights = k ** np.arange(n - 1, -1, -1, dtype=np.int64)
        grid = _product_rows(n, k)
        for code, row in enumerate(grid):
            for i in range(n):
                if row[i] < k - 1:
                    G.add_edge(("g", code), ("g", code + int(weights[i])))
        for i, code in enumerate((pos_x @ weights).tolist()):
            G.add_edge(("x", i), ("g", code))
        for j, code in enumerate((pos_y @ weights).tolist()):
            G.add_edge(("g", code), ("y", j))
        mode = "grid"
    value, flow = nx.maximum_flow(G, "s", "t")
    need = min(sum(cx), sum(cy))
    deficit = (need - value) / _SCALE
    holds = deficit <= _SLACK + (len(cx) + len(cy)) / _SCALE
    if not holds:
        return Domination(False, None, float(deficit))
    pairs = _pairs_from_flow(flow, mode)
    vals = np.array(mu.values)
    left = np.array([vals[xs[i]] for i, _, _ in pairs]).reshape(-1, n)
    right = np.array([vals[ys[j]] for _, j, _ in pairs]).reshape(-1, n)
    probs = np.array([f / _SCALE for _, _, f in pairs])
    return Domination(True, Coupling(left, right, probs, mu.labels, mu.values), float(max(deficit, 0.0)))


def _support(d: FiniteDistribution) -> tuple[np.ndarray, np.ndarray]:
    full = np.zeros(0)
    order = np.argsort(d.codes, kind="stable")
    codes, probs, pos = d.codes[order], d.probs[order], d.positions[order]
    uniq, first, inv = np.unique(codes, return_index=True, return_inverse=True)
    full = np.bincount(inv.ravel(), weights=probs, minlength=len(uniq))
    keep = full > 0
    return pos[first][keep], full[keep]


def _pairs_from_flow(flow: dict, mode: str) -> list[tuple[int, int, int]]:
    """Deterministic path decomposition of an x -> y flow."""
    pairs: dict[tuple[int, int], int] = {}
    if mode == "bipartite":
        for u in sorted((u for u in flow if isinstance(u, tuple) and u[0] == "x"), key=lambda t: t[1]):
            for v, f in sorted(flow[u].items(), key=lambda kv: kv[0][1]):
                if f > 0:
                    pairs[(u[1], v[1])] = pairs.get((u[1], v[1]), 0) + f
        return [(i, j, f) for (i, j), f in sorted(pairs.items())]
    residual = {u: {v: f for v, f in nbrs.items() if f > 0} for u, nbrs in flow.items()}
    for u in sorted((u for u in residual if isinstance(u, tuple) and u[0] == "x"), key=lambda t: t[1]):
        while residual[u]:
            path = [u]
            node = u
            while not (isinstance(node, tuple) and node[0] == "y"):
                node = min(residual[node], key=_node_key)
                path.append(node)
            f = min(residual[a][b] for a, b in zip(path, path[1:]))
            for a, b in zip(path, path[1:]):
                residual[a][b] -= f
                if residual[a][b] == 0:
                    del residual[a][b]
            key = (u[1], node[1])
            pairs[key] = pairs.get(key, 0) + f
    return [(i, j, f) for (i, j), f in sorted(pairs.items())]


def _node_key(node):
    return (node[0], node[1]) if isinstance(node, tuple) else (str(node), -1)


def up_sets(n: int) -> list[int]:
    """All up-closed subsets of {0,1}^n as bitmasks over outcome codes.

    Built recursively: an up-set splits by its first coordinate into two
    up-sets ``A0 <= A1`` of one dimension less. Limited to n <= 5
    (7581 sets); the count grows doubly exponentially.
    """
    if n > 5:
        raise CapExceeded("up-set enumeration is limited to 5 coordinates")
    sets = [0, 1]  # n = 0: empty set and the single point
    for m in range(1, n + 1):
        half = 2 ** (m - 1)
        sets = [a0 | (a1 << half) for a1 in sets for a0 in sets if a0 & ~a1 == 0]
    return sorted(sets)


def dominates_exhaustive(mu: FiniteDistribution, nu: FiniteDistribution,
                         tol: float = 1e-12) -> bool:
    """mu(A) <= nu(A) + tol for every increasing event A (binary, n <= 5)."""
    if not mu.same_space(nu) or mu.values != (0, 1):
        raise ValueError("need two laws on the same binary space")
    a, b = mu.full_vector(), nu.full_vector()
    size = len(a)
    for mask in up_sets(mu.n):
        sel = np.array([(mask >> c) & 1 for c in range(size)], dtype=bool)
        if a[sel].sum() > b[sel].sum() + tol:
            return False
    return True
