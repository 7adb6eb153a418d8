"""Random-cluster conditionals, the site version, and the grey representation."""
from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import logsumexp

from .exact import DEFAULT_CAP, CapExceeded, FiniteDistribution, RCGeometry, rc_geometry, _product_rows
from .lattice import Graph, as_mask, bond_sets
from .model import Interaction
from .percolation import label_clusters

__all__ = [
    "RCParams",
    "rc_conditional_edge",
    "rc_heatbath_step",
    "src_conditional_site",
    "GreyParams",
    "grey_params",
    "grey_weight",
    "exact_grey",
    "cyclic_table",
    "grey_brute_check",
]


@dataclass(frozen=True)
class RCParams:
    p: float
    q: float
    boundary: str = "free"
    region: tuple[int, ...] | None = None
    exterior: str = "joined"

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if self.q <= 0:
            raise ValueError("q must be positive")
        if self.boundary not in ("free", "wired", "compactified"):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.region is not None:
            object.__setattr__(self, "region", tuple(int(v) for v in self.region))

    @property
    def p_disconnected(self) -> float:
        """Open probability of a bond whose endpoints are not otherwise joined."""
        return self.p / (self.p + (1.0 - self.p) * self.q)


_GEOMETRY_CACHE: dict = {}


def _geometry(g: Graph, params: RCParams) -> RCGeometry:
    key = (id(g), params.boundary, params.region, params.exterior)
    geo = _GEOMETRY_CACHE.get(key)
    if geo is None:
        geo = rc_geometry(g, params.boundary, params.region, params.exterior)
        _GEOMETRY_CACHE.clear() if len(_GEOMETRY_CACHE) > 64 else None
        _GEOMETRY_CACHE[key] = (geo, g)
        return geo
    return geo[0]


def _joined_elsewhere(geo: RCGeometry, g: Graph, eta, e: int) -> bool:
    """BFS on the contracted graph with every coordinate bond but ``e`` as in ``eta``."""
    eta = np.asarray(eta)
    pos = np.flatnonzero(geo.bond_ids == e)
    if not len(pos):
        raise ValueError(f"bond {e} is not a coordinate of this boundary convention")
    skip = int(pos[0])
    adj: list[list[int]] = [[] for _ in range(geo.n_nodes)]
    for i, (a, b) in enumerate(geo.edges.tolist()):
        if i != skip and eta[geo.bond_ids[i]] and a != b:
            adj[a].append(b)
            adj[b].append(a)
    src, dst = geo.edges[skip]
    if src == dst:
        return True
    seen = {int(src)}
    queue = deque([int(src)])
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if w == dst:
                return True
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return False


def rc_conditional_edge(g: Graph, params: RCParams, eta, e: int) -> float:
    """P(bond e open | all other bonds as in ``eta``).

    ``eta`` is indexed by graph bond; its value at ``e`` is ignored. Under
    wired and compactified boundaries the exterior counts as joined.
    """
    geo = _geometry(g, params)
    if _joined_elsewhere(geo, g, eta, e):
        return params.p
    return params.p_disconnected


def rc_heatbath_step(g: Graph, params: RCParams, eta, e: int, rng) -> np.ndarray:
    """Resample bond ``e`` from its conditional law; other bonds are untouched."""
    out = np.array(eta, dtype=np.uint8, copy=True)
    out[e] = np.random.default_rng(rng).random() < rc_conditional_edge(g, params, out, e)
    return out


def src_conditional_site(g: Graph, p: float, q: float, eta, x: int) -> float:
    """P(site x open | other sites) for the site random-cluster measure.

    Opening x merges the kappa distinct open clusters next to it into one,
    which changes the cluster count by 1 - kappa.
    """
    eta = np.array(eta, dtype=np.uint8, copy=True)
    eta[x] = 0
    lab = label_clusters(g, eta, structure="site")
    nb = lab.labels[g.neighbors[x]]
    kappa = len(np.unique(nb[nb >= 0]))
    a = p * q ** (1 - kappa)
    return a / (a + 1.0 - p)


# ------------------------------------------------------------ grey representation

def cyclic_table(k: int) -> np.ndarray:
    """Multiplication table of Z_k on alphabet positions."""
    i = np.arange(k)
    return (i[:, None] + i[None, :]) % k


def _check_group(table: np.ndarray) -> tuple[int, np.ndarray]:
    k = len(table)
    if table.shape != (k, k) or table.min() < 0 or table.max() >= k:
        raise ValueError("multiplication table must be k x k over 0..k-1")
    ids = [e for e in range(k) if np.array_equal(table[e], np.arange(k))
           and np.array_equal(table[:, e], np.arange(k))]
    if len(ids) != 1:
        raise ValueError("table has no two-sided identity")
    e = ids[0]
    inv = np.empty(k, dtype=np.int64)
    for a in range(k):
        hits = np.flatnonzero(table[a] == e)
        if len(hits) != 1 or table[hits[0], a] != e:
            raise ValueError("table is not a group: missing inverse")
        inv[a] = hits[0]
    assoc = table[table[:, :, None], np.arange(k)[None, None, :]]
    if not np.array_equal(assoc, table[np.arange(k)[:, None, None], table[None, :, :]]):
        raise ValueError("table is not associative")
    return e, inv


@dataclass(frozen=True, eq=False)
class GreyParams:
    R: np.ndarray
    u: np.ndarray
    table: np.ndarray
    identity: int
    inverse: np.ndarray
    beta: float

    @property
    def R_star(self) -> float:
        return float(self.R.max())

    @property
    def R_bar(self) -> float:
        return float(self.R.mean())

    @property
    def p(self) -> float:
        return self.R_star / (1.0 + self.R_star)

    @property
    def q(self) -> float:
        # with every R_a = 0 the measure is the empty configuration; q is irrelevant
        return self.R_star / self.R_bar if self.R_bar > 0 else 1.0

    @cached_property
    def pair_R(self) -> np.ndarray:
        """R_{a^{-1} b} indexed by the alphabet positions of a and b."""
        return self.R[self.table[self.inverse[:, None], np.arange(len(self.R))[None, :]]]


def grey_params(inter: Interaction, table=None, shift: bool = False) -> GreyParams:
    """Difference weights R_a = exp(-beta u(a)) - 1 for a group-invariant pair energy.

    ``table`` is the group law on alphabet positions (cyclic by default).
    ``U(a, b)`` must equal ``u(a^{-1} b)``; ``u`` must be <= 0 unless
    ``shift`` subtracts max U first. The self-energy must be constant.
    """
    k = len(inter.alphabet)
    table = cyclic_table(k) if table is None else np.asarray(table, dtype=np.int64)
    e, inv = _check_group(table)
    U = inter.U - inter.U[np.isfinite(inter.U)].max() if shift else inter.U
    if np.isinf(U).any():
        raise ValueError("hard-core pair energies have no grey representation")
    u = U[e].copy()
    expect = u[table[inv[:, None], np.arange(k)[None, :]]]
    if not np.allclose(U, expect, rtol=0, atol=1e-12):
        raise ValueError("pair energy is not invariant under the group")
    if np.any(u > 1e-15):
        raise ValueError("u must be <= 0 everywhere; use shift=True")
    if not np.allclose(inter.V, inter.V[0]):
        raise ValueError("grey representation needs a constant self-energy")
    R = np.expm1(-inter.beta * np.minimum(u, 0.0)) + 0.0
    return GreyParams(R, u, table, e, inv, inter.beta)


def _grey_setup(g: Graph, region, eta, alphabet_size: int):
    inside = as_mask(g, region)
    if eta is None:
        if not inside.all():
            raise ValueError("a boundary condition is needed when the region is not the whole graph")
        eta_idx = np.zeros(g.n_vertices, dtype=np.int64)
    else:
        eta_idx = np.asarray(eta, dtype=np.int64)
    _, touching = bond_sets(g, inside)
    return inside, eta_idx, touching


def grey_weight(g: Graph, inter: Interaction, eta, region, omega, gp: GreyParams | None = None,
                method: str = "factorized", cap: int = DEFAULT_CAP) -> float:
    """log W(omega): sum over sigma = eta off region of prod over open bonds of R.

    ``eta`` holds spin values (or ``None`` when the region is everything);
    ``omega`` is indexed by graph bond and only bonds touching the region
    are read. ``factorized`` sums each open cluster separately; ``brute``
    sums over all of S^region.
    """
    gp = gp or grey_params(inter, shift=True)
    k = len(inter.alphabet)
    eta_pos = None if eta is None else inter.alphabet.index(eta)
    inside, eta_idx, touching = _grey_setup(g, region, eta_pos, k)
    omega = np.asarray(omega)
    open_b = touching[omega[touching].astype(bool)]
    with np.errstate(divide="ignore"):
        logR = np.log(gp.pair_R)
    if method == "brute":
        sites = np.flatnonzero(inside)
        if k ** len(sites) > cap:
            raise CapExceeded("brute-force grey weight exceeds cap")
        return _cluster_sum(g, sites, open_b, eta_idx, logR, k)
    if method != "factorized":
        raise ValueError(f"unknown method {method!r}")
    sub = Graph(g.n_vertices, g.bonds[open_b])
    lab = label_clusters(sub, np.ones(len(open_b), np.uint8))
    total = 0.0
    for c in range(lab.k):
        members = lab.members(c)
        free = members[inside[members]]
        if len(members) == 1:
            total += math.log(k) if len(free) else 0.0
            continue
        bsel = open_b[np.isin(g.bonds[open_b, 0], members)]
        if k ** len(free) > cap:
            raise CapExceeded("cluster too large for exact summation")
        total += _cluster_sum(g, free, bsel, eta_idx, logR, k)
    return float(total)


def _cluster_sum(g: Graph, free: np.ndarray, bonds: np.ndarray, eta_idx: np.ndarray,
                 logR: np.ndarray, k: int) -> float:
    rows = _product_rows(len(free), k)
    full = np.broadcast_to(eta_idx, (len(rows), g.n_vertices)).copy()
    full[:, free] = rows
    ends = g.bonds[bonds]
    terms = logR[full[:, ends[:, 0]], full[:, ends[:, 1]]].sum(axis=1)
    return float(logsumexp(terms))


def exact_grey(g: Graph, inter: Interaction, eta=None, region=None,
               gp: GreyParams | None = None, cap: int = DEFAULT_CAP) -> FiniteDistribution:
    """Grey bond law on the bonds touching ``region``, weight W(omega)."""
    gp = gp or grey_params(inter, shift=True)
    inside = as_mask(g, region)
    _, touching = bond_sets(g, inside)
    E = len(touching)
    if 2**E > cap:
        raise CapExceeded(f"2^{E} bond configurations exceed cap {cap}")
    rows = _product_rows(E, 2)
    logw = np.empty(len(rows))
    omega = np.zeros(g.n_bonds, dtype=np.uint8)
    for i, r in enumerate(rows):
        omega[touching] = r
        logw[i] = grey_weight(g, inter, eta, inside, omega, gp)
    return FiniteDistribution(rows, logw, tuple(touching.tolist()), (0, 1))


def grey_brute_check(g: Graph, inter: Interaction, eta=None, region=None) -> float:
    """Largest |factorized - brute| log weight over all omega (tiny graphs)."""
    gp = grey_params(inter, shift=True)
    inside = as_mask(g, region)
    _, touching = bond_sets(g, inside)
    worst = 0.0
    omega = np.zeros(g.n_bonds, dtype=np.uint8)
    for bits in itertools.product((0, 1), repeat=len(touching)):
        omega[touching] = bits
        a = grey_weight(g, inter, eta, inside, omega, gp)
        b = grey_weight(g, inter, eta, inside, omega, gp, method="brute")
        if math.isinf(a) or math.isinf(b):
            if a != b:
                return math.inf
            continue
        worst = max(worst, abs(a - b))
    return worst
