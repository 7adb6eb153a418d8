"""Couplings between spin, bond and site systems, and the checks built on them.

Exact-mode routines return kernels or :class:`~rclattice.exact.Coupling`
objects whose marginals can be compared with the enumeration oracles;
sampled-mode routines draw one configuration per call.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import networkx as nx
import numpy as np

from .exact import (
    Coupling,
    FiniteDistribution,
    PartialOrder,
    CapExceeded,
    DEFAULT_CAP,
    _product_rows,
    exact_gibbs,
    rc_geometry,
    tv_distance,
    up_sets,
)
from .lattice import Graph, as_mask, boundary
from .model import Interaction, site_conditional
from .percolation import label_clusters
from .random_cluster import RCParams, rc_conditional_edge, src_conditional_site

__all__ = [
    "Coupling",
    "es_p",
    "es_beta",
    "potts_to_rc",
    "rc_to_potts",
    "potts_to_rc_kernel",
    "rc_to_potts_kernel",
    "ESJoint",
    "es_joint",
    "wr_site_maps",
    "wr_to_rc_law",
    "rc_to_wr_law",
    "optimal_coupling",
    "SiteLaw",
    "gibbs_site_law",
    "rc_edge_law",
    "src_site_law",
    "product_law",
    "distribution_law",
    "holley_coupled_chain",
    "HolleyRun",
    "holley_check",
    "HolleyResult",
    "fkg_check",
    "FKGResult",
    "oscillation_px",
    "dobrushin_coefficient",
    "disagreement_coupling",
    "disagreement_path_ok",
    "duplicated_disagreement_prob",
    "duplicated_disagreement_exact",
]


def es_p(beta: float) -> float:
    """Bond parameter matching a Potts inverse temperature: 1 - exp(-2 beta)."""
    return -math.expm1(-2.0 * beta)


def es_beta(p: float) -> float:
    """Inverse of :func:`es_p`: beta = -log(1 - p) / 2."""
    return -0.5 * math.log1p(-p)


# ------------------------------------------------------------- Edwards-Sokal

def potts_to_rc(g: Graph, beta: float, sigma, rng) -> np.ndarray:
    """Open each bond with equal end spins independently with probability es_p(beta)."""
    sigma = np.asarray(sigma)
    rng = np.random.default_rng(rng)
    same = sigma[g.bonds[:, 0]] == sigma[g.bonds[:, 1]]
    return (same & (rng.random(g.n_bonds) < es_p(beta))).astype(np.uint8)


def rc_to_potts(g: Graph, q: int, omega, rng, forced_spin: int | None = None,
                forced_vertices=()) -> np.ndarray:
    """Uniform spin in {1..q} per open cluster; clusters meeting ``forced_vertices`` get ``forced_spin``."""
    rng = np.random.default_rng(rng)
    lab = label_clusters(g, omega, boundary=forced_vertices)
    colors = rng.integers(1, q + 1, size=lab.k)
    if forced_spin is not None:
        colors[lab.touches_boundary] = forced_spin
    return colors[lab.labels]


def potts_to_rc_kernel(g: Graph, beta: float, sigma_rows: np.ndarray) -> np.ndarray:
    """Exact transition matrix from spin rows to all 2^E bond rows (code order)."""
    p = es_p(beta)
    omega = _product_rows(g.n_bonds, 2)
    same = sigma_rows[:, g.bonds[:, 0]] == sigma_rows[:, g.bonds[:, 1]]
    # P(omega | sigma) = prod_e [omega_e ? p*same_e : 1 - p*same_e]
    po = np.where(same, p, 0.0)
    K = np.ones((len(sigma_rows), len(omega)))
    for e in range(g.n_bonds):
        col = omega[:, e][None, :]
        K *= np.where(col == 1, po[:, e][:, None], 1.0 - po[:, e][:, None])
    return K


def rc_to_potts_kernel(g: Graph, q: int, omega_rows: np.ndarray, sigma_rows: np.ndarray,
                       forced_spin: int | None = None, forced_vertices=()) -> np.ndarray:
    """Exact transition matrix from bond rows to the listed spin rows."""
    K = np.zeros((len(omega_rows), len(sigma_rows)))
    fv = np.asarray(list(forced_vertices), dtype=np.int64)
    for i, w in enumerate(omega_rows):
        lab = label_clusters(g, w, boundary=fv)
        L = lab.labels
        # constant on clusters?
        ok = np.ones(len(sigma_rows), dtype=bool)
        for (x, y) in g.bonds[np.asarray(w, bool)].tolist():
            ok &= sigma_rows[:, x] == sigma_rows[:, y]
        free = lab.k
        if forced_spin is not None and len(fv):
            hit = np.isin(L, np.flatnonzero(lab.touches_boundary))
            ok &= np.all(np.where(hit[None, :], sigma_rows == forced_spin, True), axis=1)
            free -= int(lab.touches_boundary.sum())
        K[i, ok] = float(q) ** (-free)
    return K


@dataclass
class ESJoint:
    """Joint spin/bond law on a graph, kept as a weight matrix."""
    spins: np.ndarray
    bonds: np.ndarray
    probs: np.ndarray
    values: tuple[int, ...]

    def spin_marginal(self) -> FiniteDistribution:
        return FiniteDistribution.from_probs(self.spins, self.probs.sum(axis=1),
                                             tuple(range(self.spins.shape[1])), self.values)

    def bond_marginal(self) -> FiniteDistribution:
        return FiniteDistribution.from_probs(self.bonds, self.probs.sum(axis=0),
                                             tuple(range(self.bonds.shape[1])), (0, 1))


def es_joint(g: Graph, beta: float, q: int, cap: int = DEFAULT_CAP) -> ESJoint:
    """Edwards-Sokal weights prod_e [(1-p) 1{w_e=0} + p 1{w_e=1} 1{s_x=s_y}], free boundary."""
    if q ** g.n_vertices * 2 ** g.n_bonds > cap:
        raise CapExceeded("joint space exceeds cap")
    p = es_p(beta)
    spins = _product_rows(g.n_vertices, q) + 1
    bonds = _product_rows(g.n_bonds, 2)
    same = spins[:, g.bonds[:, 0]] == spins[:, g.bonds[:, 1]]
    W = np.ones((len(spins), len(bonds)))
    for e in range(g.n_bonds):
        on = bonds[:, e] == 1
        W[:, on] *= np.where(same[:, e], p, 0.0)[:, None]
        W[:, ~on] *= 1.0 - p
    return ESJoint(spins, bonds, W / W.sum(), tuple(range(1, q + 1)))


# ------------------------------------------------------------ Widom-Rowlinson

def wr_site_maps(g: Graph, direction: str, config, rng=None) -> np.ndarray:
    """``wr->rc``: Y = |X|. ``rc->wr``: a fair sign per open site cluster, 0 elsewhere."""
    config = np.asarray(config)
    if direction == "wr->rc":
        return np.abs(config).astype(np.uint8)
    if direction != "rc->wr":
        raise ValueError("direction must be 'wr->rc' or 'rc->wr'")
    rng = np.random.default_rng(rng)
    lab = label_clusters(g, config, structure="site")
    signs = rng.choice(np.array([-1, 1]), size=lab.k)
    out = np.zeros(g.n_vertices, dtype=np.int64)
    on = lab.labels >= 0
    out[on] = signs[lab.labels[on]]
    return out


def wr_to_rc_law(wr: FiniteDistribution) -> FiniteDistribution:
    """Exact push-forward of a Widom-Rowlinson law under X -> |X|."""
    rows = np.abs(wr.outcomes)
    uniq, inv = np.unique(rows, axis=0, return_inverse=True)
    p = np.bincount(inv.ravel(), weights=wr.probs, minlength=len(uniq))
    return FiniteDistribution.from_probs(uniq, p, wr.labels, (0, 1))


def rc_to_wr_law(g: Graph, site_rc: FiniteDistribution) -> FiniteDistribution:
    """Exact push-forward of a site law under independent cluster signs."""
    out: dict[tuple, float] = {}
    for row, pr in zip(site_rc.outcomes, site_rc.probs):
        if pr == 0:
            continue
        lab = label_clusters(g, row, structure="site")
        share = pr / 2**lab.k
        for signs in itertools.product((-1, 1), repeat=lab.k):
            s = np.array(signs)
            cfg = np.where(lab.labels >= 0, s[np.clip(lab.labels, 0, None)] if lab.k else 0, 0)
            key = tuple(int(v) for v in cfg)
            out[key] = out.get(key, 0.0) + share
    keys = sorted(out)
    return FiniteDistribution.from_probs(np.array(keys), [out[k] for k in keys],
                                         site_rc.labels, (-1, 0, 1))


# ---------------------------------------------------------- optimal coupling

def optimal_coupling(mu: FiniteDistribution, nu: FiniteDistribution) -> Coupling:
    """Maximal coupling: common mass on the diagonal, residuals independent."""
    if not mu.same_space(nu):
        raise ValueError("distributions live on different outcome spaces")
    codes = np.concatenate([mu.codes, nu.codes])
    uniq, first, inv = np.unique(codes, return_index=True, return_inverse=True)
    inv = inv.ravel()
    rows = np.concatenate([mu.outcomes, nu.outcomes])[first]
    a = np.bincount(inv[: len(mu.codes)], weights=mu.probs, minlength=len(uniq))
    b = np.bincount(inv[len(mu.codes):], weights=nu.probs, minlength=len(uniq))
    common = np.minimum(a, b)
    ra, rb = a - common, b - common
    mass = ra.sum()
    left, right, probs = [], [], []
    for i in np.flatnonzero(common > 0):
        left.append(rows[i]); right.append(rows[i]); probs.append(common[i])
    if mass > 0:
        for i in np.flatnonzero(ra > 0):
            for j in np.flatnonzero(rb > 0):
                left.append(rows[i]); right.append(rows[j]); probs.append(ra[i] * rb[j] / mass)
    n = mu.n
    return Coupling(np.array(left).reshape(-1, n), np.array(right).reshape(-1, n),
                    np.array(probs), mu.labels, mu.values)


def _optimal_pairs(a: np.ndarray, b: np.ndarray) -> list[tuple[int, int, float]]:
    """Optimal coupling of two probability vectors on range(k), as (i, j, mass)."""
    common = np.minimum(a, b)
    ra, rb = a - common, b - common
    mass = ra.sum()
    out = [(i, i, float(common[i])) for i in range(len(a)) if common[i] > 0]
    if mass > 1e-300:
        out += [(i, j, float(ra[i] * rb[j] / mass)) for i in range(len(a)) for j in range(len(b))
                if ra[i] > 0 and rb[j] > 0]
    return out


# ------------------------------------------------------- conditional oracles

@dataclass
class SiteLaw:
    """Single-site conditionals of a law on range(k)^n (alphabet positions).

    ``conditional(config, x)`` returns the law of coordinate x given the
    others, or ``None`` when that conditioning event has probability zero.
    """
    n_sites: int
    k: int
    conditional: Callable[[np.ndarray, int], np.ndarray | None]


def gibbs_site_law(g: Graph, inter: Interaction, couplings=None) -> SiteLaw:
    vals = inter.alphabet.array

    def cond(cfg, x):
        try:
            return site_conditional(g, inter, vals[cfg], x, couplings)
        except ValueError:
            return None
    return SiteLaw(g.n_vertices, len(vals), cond)


def rc_edge_law(g: Graph, params: RCParams) -> SiteLaw:
    """Bond conditionals; coordinates are the convention's bonds in index order."""
    ids = rc_geometry(g, params.boundary, params.region, params.exterior).bond_ids

    def cond(cfg, i):
        full = np.zeros(g.n_bonds, dtype=np.uint8)
        full[ids] = cfg
        p1 = rc_conditional_edge(g, params, full, int(ids[i]))
        return np.array([1.0 - p1, p1])
    return SiteLaw(len(ids), 2, cond)


def src_site_law(g: Graph, p: float, q: float) -> SiteLaw:
    def cond(cfg, x):
        p1 = src_conditional_site(g, p, q, cfg, x)
        return np.array([1.0 - p1, p1])
    return SiteLaw(g.n_vertices, 2, cond)


def product_law(p) -> SiteLaw:
    p = np.asarray(p, float)
    return SiteLaw(len(p), 2, lambda cfg, x: np.array([1.0 - p[x], p[x]]))


def distribution_law(d: FiniteDistribution) -> SiteLaw:
    """Exact conditionals of an enumerated law (zero-mass conditions give None)."""
    k, n = len(d.values), d.n
    vec = d.full_vector().reshape((k,) * n)

    def cond(cfg, x):
        idx = list(int(c) for c in cfg)
        idx[x] = slice(None)
        col = vec[tuple(idx)]
        s = col.sum()
        return None if s <= 0 else col / s
    return SiteLaw(n, k, cond)


def _upper_tails(law: SiteLaw, x: int) -> tuple[np.ndarray, np.ndarray]:
    """Tail probabilities P(X_x >= a | rest) for every configuration of the rest."""
    n, k = law.n_sites, law.k
    rest = _product_rows(n - 1, k)
    tails = np.full((len(rest), k), np.nan)
    for r, row in enumerate(rest):
        cfg = np.insert(row, x, 0)
        pr = law.conditional(cfg, x)
        if pr is not None:
            tails[r] = np.cumsum(pr[::-1])[::-1]
    return rest, tails


@dataclass
class HolleyResult:
    holds: bool
    site: int | None = None
    level: int | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    gap: float = 0.0

    def __bool__(self):
        return self.holds


def holley_check(mu: SiteLaw, nu: SiteLaw, tol: float = 1e-12, cap: int = 2**16) -> HolleyResult:
    """Check mu(X_x >= a | xi) <= nu(X_x >= a | eta) for all x, a and xi <= eta.

    The minimum of the right side over all eta above xi is computed by a
    sweep over the configurations in decreasing code order, so the check is
    linear in the size of the space rather than quadratic.
    """
    if (mu.n_sites, mu.k) != (nu.n_sites, nu.k):
        raise ValueError("laws live on different spaces")
    n, k = mu.n_sites, mu.k
    if k ** (n - 1) > cap:
        raise CapExceeded("conditioning space too large for exhaustive check")
    weights = k ** np.arange(n - 2, -1, -1, dtype=np.int64) if n > 1 else np.zeros(0, np.int64)
    for x in range(n):
        rest, tm = _upper_tails(mu, x)
        _, tn = _upper_tails(nu, x)
        # best[c] = min over configurations above c of the nu tails (undefined rows ignored)
        best = np.where(np.isnan(tn), np.inf, tn)
        arg = np.broadcast_to(np.arange(len(rest))[:, None], best.shape).copy()
        for c in range(len(rest) - 1, -1, -1):
            for i in range(n - 1):
                if rest[c, i] < k - 1:
                    up = c + int(weights[i])
                    better = best[up] < best[c]
                    best[c] = np.where(better, best[up], best[c])
                    arg[c] = np.where(better, arg[up], arg[c])
        gap = np.where(np.isnan(tm), -np.inf, tm - best)
        c, a = np.unravel_index(np.argmax(gap), gap.shape)
        if gap[c, a] > tol:
            return HolleyResult(False, x, int(a), np.insert(rest[c], x, -1),
                                np.insert(rest[arg[c, a]], x, -1), float(gap[c, a]))
    return HolleyResult(True)


@dataclass
class HolleyRun:
    lower: np.ndarray
    upper: np.ndarray
    ordered: bool
    ordered_since: int | None
    violations: int
    certified: bool


def holley_coupled_chain(mu: SiteLaw, nu: SiteLaw, x0, y0, steps: int, rng,
                         certified: bool | None = None) -> HolleyRun:
    """Heat-bath chains for mu and nu driven by a shared site and uniform.

    Each update sets the new value to the smallest a with F(a) >= U, using
    the same U for both chains, so the order is kept whenever the Holley
    condition holds. ``violations`` counts steps where the order, once
    reached, broke; it is meaningful only when ``certified`` (a passed
    :func:`holley_check`) is true.
    """
    rng = np.random.default_rng(rng)
    X = np.array(x0, dtype=np.int64, copy=True)
    Y = np.array(y0, dtype=np.int64, copy=True)
    sites = rng.integers(0, mu.n_sites, size=steps)
    us = rng.random(steps)
    ordered_since = 0 if np.all(X <= Y) else None
    violations = 0
    for t in range(steps):
        x, u = int(sites[t]), us[t]
        for Z, law in ((X, mu), (Y, nu)):
            pr = law.conditional(Z, x)
            if pr is None:
                raise ValueError("chain entered a zero-probability configuration")
            Z[x] = min(int(np.searchsorted(np.cumsum(pr), u, side="right")), law.k - 1)
        now = bool(np.all(X <= Y))
        if now and ordered_since is None:
            ordered_since = t + 1
        elif not now and ordered_since is not None:
            violations += 1
            ordered_since = None
    return HolleyRun(X, Y, ordered_since is not None, ordered_since, violations, bool(certified))


# ------------------------------------------------------------------ FKG

@dataclass
class FKGResult:
    holds: bool
    exhaustive: bool
    f_set: np.ndarray | None = None
    g_set: np.ndarray | None = None
    covariance: float = 0.0

    def __bool__(self):
        return self.holds


def fkg_check(mu: FiniteDistribution, tol: float = 1e-12, trials: int = 64, rng=None) -> FKGResult:
    """Positive correlations for increasing indicators on a 0/1 space.

    Up to 5 coordinates every pair of up-sets is tried. Above that, up-sets
    A are drawn at random (up-closures of random points) and for each the
    up-set B minimising cov(1_A, 1_B) is found exactly by a min-cut, so a
    violation is missed only if no sampled A belongs to one.
    """
    if mu.values != (0, 1):
        raise ValueError("fkg_check expects a 0/1 outcome space")
    n = mu.n
    vec = mu.full_vector()
    size = len(vec)
    pts = _product_rows(n, 2)
    if n <= 5:
        masks = up_sets(n)
        M = np.array([[(m >> c) & 1 for c in range(size)] for m in masks], dtype=float)
        pa = M @ vec
        worst, wa, wb = np.inf, None, None
        for s in range(0, len(M), 512):
            joint = (M[s:s + 512] * vec) @ M.T
            cov = joint - np.outer(pa[s:s + 512], pa)
            i, j = np.unravel_index(np.argmin(cov), cov.shape)
            if cov[i, j] < worst:
                worst, wa, wb = cov[i, j], s + i, j
        ok = worst >= -tol
        return FKGResult(bool(ok), True, None if ok else pts[M[wa] > 0],
                         None if ok else pts[M[wb] > 0], float(worst))
    if size > 2**12:
        raise CapExceeded("fkg_check supports at most 12 coordinates")
    rng = np.random.default_rng(rng)
    leq = np.all(pts[:, None, :] <= pts[None, :, :], axis=2)
    for _ in range(trials):
        seeds = rng.random(size) < rng.uniform(0.02, 0.3)
        A = leq[seeds].any(axis=0)
        w = vec * (A - vec[A].sum())
        B, value = _min_up_set(pts, w)
        if value < -tol:
            return FKGResult(False, False, pts[A], pts[B], float(value))
    return FKGResult(True, False)


def _min_up_set(pts: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, float]:
    """Up-set B minimising sum_{y in B} w(y), by max-closure min-cut."""
    size, n = pts.shape
    weights = 2 ** np.arange(n - 1, -1, -1)
    G = nx.DiGraph()
    G.add_nodes_from(["s", "t"])
    for y in range(size):
        c = -w[y]
        if c > 0:
            G.add_edge("s", y, capacity=c)
        elif c < 0:
            G.add_edge(y, "t", capacity=-c)
        for i in range(n):
            if pts[y, i] == 0:
                G.add_edge(y, y + int(weights[i]))
    _, (src_side, _) = nx.minimum_cut(G, "s", "t")
    B = np.zeros(size, dtype=bool)
    B[[v for v in src_side if v != "s"]] = True
    return B, float(w[B].sum())


# ------------------------------------------------- oscillation and Dobrushin

def _neighbor_patterns(g: Graph, inter: Interaction, x: int, couplings=None):
    nb = g.neighbors[x]
    vals = inter.alphabet.values
    cfg = np.full(g.n_vertices, vals[0])
    out = {}
    for pat in itertools.product(range(len(vals)), repeat=len(nb)):
        cfg[nb] = np.array(vals)[list(pat)] if len(nb) else cfg[nb]
        try:
            out[pat] = site_conditional(g, inter, cfg, x, couplings)
        except ValueError:
            continue
    return out


def oscillation_px(g: Graph, inter: Interaction, x: int, couplings=None) -> float:
    """Largest total variation between conditional laws at x over neighbour patterns."""
    laws = np.array(list(_neighbor_patterns(g, inter, x, couplings).values()))
    diff = 0.5 * np.abs(laws[:, None, :] - laws[None, :, :]).sum(axis=2)
    return float(diff.max())


def dobrushin_coefficient(g: Graph, inter: Interaction, x: int, couplings=None) -> float:
    """Sum over neighbours y of the largest response to changing the spin at y alone."""
    pats = _neighbor_patterns(g, inter, x, couplings)
    total = 0.0
    for j in range(len(g.neighbors[x])):
        worst = 0.0
        for pat, law in pats.items():
            for a in range(len(inter.alphabet)):
                other = pat[:j] + (a,) + pat[j + 1:]
                if other in pats:
                    worst = max(worst, 0.5 * float(np.abs(law - pats[other]).sum()))
        total += worst
    return total


# ------------------------------------------------------ disagreement coupling

def disagreement_coupling(g: Graph, inter: Interaction, region, eta, eta2,
                          mode: str = "exact", rng=None, cap: int = 2**16):
    """Site-by-site coupling of the laws with exteriors ``eta`` and ``eta2``.

    At each stage the smallest undecided site of the region next to a
    current disagreement (on the boundary or among decided sites) is
    decided by the optimal coupling of its two conditional marginals given
    the decided sites. When no such site remains, the undecided sites see
    identical surroundings and are drawn jointly from their common
    conditional law. ``exact`` returns the full :class:`Coupling`;
    ``sampled`` returns one pair ``(X, X2)`` of region configurations.
    """
    mu = exact_gibbs(g, inter, region, eta, cap=cap)
    nu = exact_gibbs(g, inter, region, eta2, cap=cap)
    sites = np.array(mu.labels)
    n = len(sites)
    pos_of = {int(v): i for i, v in enumerate(sites)}
    inside = as_mask(g, region)
    bd_dis = {int(z) for z in boundary(g, inside) if eta[z] != eta2[z]}
    nbr_lists = [list(g.neighbors[int(v)]) for v in sites]
    A, B = mu.positions, nu.positions
    pa, pb = mu.probs, nu.probs
    k = len(inter.alphabet)
    rng = np.random.default_rng(rng)

    def next_site(decided: dict[int, tuple[int, int]]) -> int | None:
        for i in range(n):
            if i in decided:
                continue
            for w in nbr_lists[i]:
                w = int(w)
                if w in bd_dis:
                    return i
                j = pos_of.get(w)
                if j is not None and j in decided and decided[j][0] != decided[j][1]:
                    return i
        return None

    leaves: list[tuple[np.ndarray, np.ndarray, float]] = []

    def expand(decided, ma, mb, weight):
        i = next_site(decided)
        if i is None:
            # remaining sites: identical conditional law, couple on the diagonal
            wa = pa * ma
            wa = wa / wa.sum()
            if mode == "sampled":
                r = rng.choice(len(wa), p=wa)
                rest = A[r]
                left, right = rest.copy(), rest.copy()
                for j, (a, b) in decided.items():
                    left[j], right[j] = a, b
                leaves.append((left, right, weight))
                return
            for r in np.flatnonzero(wa > 0):
                left, right = A[r].copy(), A[r].copy()
                for j, (a, b) in decided.items():
                    left[j], right[j] = a, b
                leaves.append((left, right, weight * wa[r]))
            return
        ca = np.bincount(A[ma, i], weights=pa[ma], minlength=k)
        cb = np.bincount(B[mb, i], weights=pb[mb], minlength=k)
        pairs = _optimal_pairs(ca / ca.sum(), cb / cb.sum())
        if mode == "sampled":
            pr = np.array([m for _, _, m in pairs])
            pairs = [pairs[rng.choice(len(pairs), p=pr / pr.sum())]]
            pairs = [(pairs[0][0], pairs[0][1], 1.0)]
        for a, b, m in pairs:
            d2 = dict(decided)
            d2[i] = (a, b)
            expand(d2, ma & (A[:, i] == a), mb & (B[:, i] == b), weight * m)

    expand({}, np.ones(len(pa), bool), np.ones(len(pb), bool), 1.0)
    vals = inter.alphabet.array
    if mode == "sampled":
        left, right, _ = leaves[0]
        return vals[left], vals[right]
    if mode != "exact":
        raise ValueError("mode must be 'exact' or 'sampled'")
    left = np.array([l for l, _, _ in leaves])
    right = np.array([r for _, r, _ in leaves])
    probs = np.array([w for _, _, w in leaves])
    return Coupling(vals[left], vals[right], probs, mu.labels, inter.alphabet.values)


def disagreement_path_ok(g: Graph, region, eta, eta2, sites, left, right) -> bool:
    """Every disagreeing site reaches a disagreeing boundary site through disagreements."""
    inside = as_mask(g, region)
    dis = np.zeros(g.n_vertices, dtype=bool)
    dis[np.asarray(sites)] = np.asarray(left) != np.asarray(right)
    bd = np.array(sorted(boundary(g, inside)), dtype=np.int64)
    bd_dis = bd[np.asarray(eta)[bd] != np.asarray(eta2)[bd]] if len(bd) else bd
    active = dis.copy()
    active[bd_dis] = True
    lab = label_clusters(g, active.astype(np.uint8), structure="site")
    good = set(lab.labels[bd_dis].tolist())
    return all(lab.labels[v] in good for v in np.flatnonzero(dis))


def _reaches(g: Graph, inside: np.ndarray, eta, eta2, delta: np.ndarray, dis: np.ndarray,
             reach: str) -> np.ndarray:
    """Row-wise: does a disagreement path join delta to the target set?

    ``dis`` is (N, V) with region disagreements. Disagreeing boundary sites
    are added as disagreements. Targets: boundary disagreements
    (``reach="boundary"``) or any region site next to the boundary
    (``reach="adjacent"``).
    """
    bd = np.array(sorted(boundary(g, inside)), dtype=np.int64)
    eta, eta2 = np.asarray(eta), np.asarray(eta2)
    bd_dis = bd[eta[bd] != eta2[bd]] if len(bd) else bd
    if reach == "boundary":
        targets = bd_dis
    elif reach == "adjacent":
        near = np.zeros(g.n_vertices, bool)
        for z in bd:
            near[g.neighbors[z]] = True
        targets = np.flatnonzero(near & inside)
    else:
        raise ValueError("reach must be 'boundary' or 'adjacent'")
    out = np.zeros(len(dis), dtype=bool)
    if not len(targets):
        return out
    dsel = np.flatnonzero(delta)
    for r in range(len(dis)):
        active = dis[r].copy()
        active[bd_dis] = True
        active &= inside | np.isin(np.arange(g.n_vertices), bd_dis)
        if not active[dsel].any():
            continue
        lab = label_clusters(g, active.astype(np.uint8), structure="site")
        a = lab.labels[dsel]
        t = lab.labels[targets]
        out[r] = bool(np.intersect1d(a[a >= 0], t[t >= 0]).size)
    return out


def duplicated_disagreement_exact(g: Graph, inter: Interaction, region, eta, eta2, delta,
                                  reach: str = "boundary") -> float:
    """Exact probability, under the product of the two laws, of a disagreement path from delta."""
    mu = exact_gibbs(g, inter, region, eta)
    nu = exact_gibbs(g, inter, region, eta2)
    sites = np.array(mu.labels)
    law: dict[bytes, float] = {}
    for i in range(len(mu.probs)):
        d = (mu.outcomes[i][None, :] != nu.outcomes)
        codes = np.packbits(d, axis=1)
        uniq, inv = np.unique(codes, axis=0, return_inverse=True)
        w = np.bincount(inv.ravel(), weights=nu.probs * mu.probs[i], minlength=len(uniq))
        for u, m in zip(uniq, w):
            key = u.tobytes()
            law[key] = law.get(key, 0.0) + m
    keys = list(law)
    pats = np.array([np.unpackbits(np.frombuffer(k_, np.uint8))[: len(sites)] for k_ in keys], dtype=bool)
    dis = np.zeros((len(keys), g.n_vertices), dtype=bool)
    dis[:, sites] = pats
    inside = as_mask(g, region)
    hit = _reaches(g, inside, eta, eta2, _delta_mask(g, delta), dis, reach)
    return float(sum(law[k_] for k_, h in zip(keys, hit) if h))


def _delta_mask(g: Graph, delta) -> np.ndarray:
    return as_mask(g, delta)


def duplicated_disagreement_prob(g: Graph, inter: Interaction, region, eta, eta2, delta,
                                 samples: int, rng, reach: str = "boundary",
                                 sweeps: int = 200) -> float:
    """Monte Carlo frequency of a disagreement path from delta in independent pairs.

    The two laws are sampled independently by heat-bath chains (``sweeps``
    sweeps per draw from fresh random starts).
    """
    from .sampler import gibbs_batch
    rng = np.random.default_rng(rng)
    inside = as_mask(g, region)
    X = gibbs_batch(g, inter, inside, eta, samples, sweeps, rng)
    Y = gibbs_batch(g, inter, inside, eta2, samples, sweeps, rng)
    dis = (X != Y) & inside[None, :]
    hit = _reaches(g, inside, eta, eta2, _delta_mask(g, delta), dis, reach)
    return float(hit.mean())
