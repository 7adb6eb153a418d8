"""Exhaustive small-instance verification suites.

Each check returns :class:`CheckItem` records; ``run_suite`` groups them as
the ``check`` subcommand does. The same functions back the acceptance
tests, so the command line and the test-suite verify identical things.
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, asdict

import networkx as nx
import numpy as np

from .coupling import es_joint, es_p, optimal_coupling, potts_to_rc_kernel, rc_to_potts_kernel
from .exact import (
    FiniteDistribution,
    bernoulli_product,
    dominates,
    exact_gibbs,
    exact_rc,
    rc_geometry,
    tv_distance,
    _product_rows,
)
from .lattice import Graph, boundary, build_box, build_custom
from .model import make_model
from .percolation import batch_component_labels
from .random_cluster import RCParams, exact_grey, grey_params, rc_conditional_edge

__all__ = [
    "CheckItem",
    "small_graphs",
    "es_marginal_deviation",
    "single_edge_deviation",
    "potts_pair_margin",
    "rc_domination_items",
    "concavity_max_second_difference",
    "magnetization_connection_deviation",
    "run_suite",
    "SUITES",
]


@dataclass
class CheckItem:
    suite: str
    name: str
    anchor: str
    value: float
    tol: float
    passed: bool
    seconds: float = 0.0

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.suite}/{self.name}: {self.value:.3e} (tol {self.tol:g}; {self.anchor})"

    def as_dict(self) -> dict:
        return asdict(self)


def small_graphs(max_bonds: int) -> list[Graph]:
    """Every connected graph with 1..max_bonds bonds (up to isomorphism)."""
    out = []
    for h in nx.graph_atlas_g():
        if h.number_of_nodes() == 0 or h.number_of_edges() == 0:
            continue
        if h.number_of_edges() <= max_bonds and nx.is_connected(h):
            out.append(build_custom(h.number_of_nodes(), list(h.edges())))
    return out


def exterior_region(g: Graph) -> np.ndarray:
    """All vertices but the last one, so that wired counting has an exterior."""
    return np.arange(g.n_vertices - 1)


# ------------------------------------------------------------ identities

def es_marginal_deviation(g: Graph, beta: float, q: int) -> float:
    """Largest gap between the joint's marginals and the exact Potts / RC laws."""
    joint = es_joint(g, beta, q)
    _, potts = make_model("potts", beta=beta, q=q)
    spins = joint.spin_marginal().full_vector()
    bonds = joint.bond_marginal().full_vector()
    ref_s = exact_gibbs(g, potts).full_vector()
    ref_b = exact_rc(g, es_p(beta), q).full_vector()
    return float(max(np.abs(spins - ref_s).max(), np.abs(bonds - ref_b).max()))


def es_round_trip_deviation(g: Graph, beta: float, q: int) -> float:
    """Potts law pushed to bonds and back, compared with the Potts law and the RC law."""
    _, potts = make_model("potts", beta=beta, q=q)
    mu = exact_gibbs(g, potts)
    K1 = potts_to_rc_kernel(g, beta, mu.outcomes)
    rc = mu.probs @ K1
    K2 = rc_to_potts_kernel(g, q, _product_rows(g.n_bonds, 2), mu.outcomes)
    back = rc @ K2
    ref_rc = exact_rc(g, es_p(beta), q).full_vector()
    return float(max(np.abs(rc - ref_rc).max(), np.abs(back - mu.probs).max()))


def single_edge_deviation(g: Graph, p: float, q: float, counting: str = "free", region=None) -> float:
    """Largest gap between enumerated single-bond conditionals and the closed form."""
    d = exact_rc(g, p, q, counting, region)
    vec = d.full_vector()
    n = d.n
    ids = np.array(d.labels)
    params = RCParams(p, q, counting, None if region is None else tuple(np.atleast_1d(region)))
    worst = 0.0
    for i in range(n):
        bit = 1 << (n - 1 - i)
        for code in range(2**n):
            if code & bit:
                continue
            w0, w1 = vec[code], vec[code | bit]
            if w0 + w1 == 0:
                continue
            emp = w1 / (w0 + w1)
            full = np.zeros(g.n_bonds, dtype=np.uint8)
            full[ids] = [(code >> (n - 1 - j)) & 1 for j in range(n)]
            worst = max(worst, abs(emp - rc_conditional_edge(g, params, full, int(ids[i]))))
    return worst


def potts_pair_margin(g: Graph, beta: float, q: int) -> float:
    """min over x, y, i of mu(X_x = i, X_y = i) - 1/q^2."""
    _, potts = make_model("potts", beta=beta, q=q)
    mu = exact_gibbs(g, potts)
    X = mu.outcomes
    worst = math.inf
    for x, y in itertools.combinations(range(g.n_vertices), 2):
        for i in range(1, q + 1):
            pr = float(mu.probs[(X[:, x] == i) & (X[:, y] == i)].sum())
            worst = min(worst, pr - 1.0 / q**2)
    return worst


def magnetization_connection_deviation(n_box: int = 5, inner: int = 3, beta: float = 0.5,
                                       q: int = 3, spin: int = 1) -> float:
    """|mu^i(X_x = i) - 1/q - (q-1)/q phi^1(x <-> exterior)| over the region sites."""
    g = build_box(2, n_box)
    off = (n_box - inner) // 2
    region = [g.index((r, c)) for r in range(off, off + inner) for c in range(off, off + inner)]
    _, potts = make_model("potts", beta=beta, q=q)
    eta = np.full(g.n_vertices, spin)
    mu = exact_gibbs(g, potts, region, eta)
    phi = exact_rc(g, es_p(beta), q, "wired", region)
    geo = rc_geometry(g, "wired", region)
    lab = batch_component_labels(geo.n_nodes, geo.edges, phi.outcomes.astype(bool))
    sup = int(geo.super_nodes[0])
    worst = 0.0
    for j, x in enumerate(mu.labels):
        lhs = float(mu.probs[mu.outcomes[:, j] == spin].sum())
        conn = float(phi.probs[lab[:, geo.node_of[x]] == lab[:, sup]].sum())
        worst = max(worst, abs(lhs - 1.0 / q - (q - 1) / q * conn))
    return worst


# ------------------------------------------------------------ domination

def rc_domination_items(graphs, ps=(0.2, 0.5, 0.8), qs=(1, 2, 3)) -> list[tuple[str, bool]]:
    """(label, holds) for the RC sandwich, p-monotonicity and grey domination."""
    out = []
    for gi, g in enumerate(graphs):
        for counting, region in (("free", None), ("wired", exterior_region(g))):
            for q in qs:
                laws = {p: exact_rc(g, p, q, counting, region) for p in ps}
                for p in ps:
                    phi = laws[p]
                    up = bernoulli_product(p, phi.labels)
                    lo = bernoulli_product(p / (p + (1 - p) * q), phi.labels)
                    tag = f"g{gi}/{counting}/p={p}/q={q}"
                    out.append((f"{tag}: phi <= bernoulli(p)", dominates(phi, up).holds))
                    out.append((f"{tag}: bernoulli(p') <= phi", dominates(lo, phi).holds))
                for p1, p2 in itertools.combinations(sorted(ps), 2):
                    out.append((f"g{gi}/{counting}/q={q}: phi(p={p1}) <= phi(p={p2})",
                                dominates(laws[p1], laws[p2]).holds))
        out.extend(grey_domination_items(g, gi, ps))
    return out


def grey_domination_items(g: Graph, gi: int, ps=(0.2, 0.5, 0.8), qs=(2, 3)) -> list[tuple[str, bool]]:
    """Grey law of Potts (beta matched to p) against the RC law with the grey parameters."""
    out = []
    region = exterior_region(g)
    for q in qs:
        for p in ps:
            beta = -0.5 * math.log1p(-p)
            _, potts = make_model("potts", beta=beta, q=q)
            gp = grey_params(potts, shift=True)
            for eta_spin in (None, 1):
                if eta_spin is None:
                    grey = exact_grey(g, potts, None, None, gp)
                    phi = exact_rc(g, gp.p, gp.q, "free")
                else:
                    eta = np.full(g.n_vertices, eta_spin)
                    grey = exact_grey(g, potts, eta, region, gp)
                    phi = exact_rc(g, gp.p, gp.q, "wired", region)
                out.append((f"g{gi}/grey/q={q}/p={p}/eta={eta_spin}", dominates(grey, phi).holds))
    return out


# ------------------------------------------------------------ concavity

class _RCTable:
    """Enumerated bond rows and cluster counts, reweighted for any p vector."""

    def __init__(self, g: Graph, counting: str, region=None):
        self.geo = rc_geometry(g, counting, region)
        E = len(self.geo.bond_ids)
        self.rows = _product_rows(E, 2)
        lab = batch_component_labels(self.geo.n_nodes, self.geo.edges, self.rows.astype(bool))
        self.labels = lab
        k = np.count_nonzero(lab == np.arange(self.geo.n_nodes), axis=1)
        if counting == "compactified" and len(self.geo.super_nodes):
            k = k - 1
        self.k = k

    def probs(self, p: np.ndarray, q: float) -> np.ndarray:
        with np.errstate(divide="ignore"):
            lw = np.where(self.rows == 1, np.log(p), np.log1p(-p)).sum(axis=1) + self.k * math.log(q)
        w = np.exp(lw - lw.max())
        return w / w.sum()


def concavity_max_second_difference(g: Graph, region=None, step: float = 1e-3,
                                    grid=None, base_K: float = 0.5) -> float:
    """Largest centred second difference of phi^1(x <-> y) in any single K_b.

    Other couplings sit at ``base_K``; (x, y) runs over all pairs of region
    vertices and exterior nodes, with connections through the wired
    exterior allowed.
    """
    grid = np.round(np.arange(0.1, 2.0 + 1e-9, 0.1), 10) if grid is None else grid
    table = _RCTable(g, "wired", region)
    geo = table.geo
    E = len(geo.bond_ids)
    nodes = sorted({int(v) for v in geo.node_of[np.atleast_1d(region) if region is not None
                                                 else np.arange(g.n_vertices)] if v >= 0}
                   | {int(v) for v in geo.super_nodes})
    pairs = list(itertools.combinations(nodes, 2))
    F = np.array([table.labels[:, a] == table.labels[:, b] for a, b in pairs], dtype=float).T
    worst = -math.inf
    for b in range(E):
        for K in grid:
            vals = []
            for Kb in (K - step, K, K + step):
                Ks = np.full(E, base_K)
                Ks[b] = Kb
                p = -np.expm1(-2.0 * Ks)
                vals.append(table.probs(p, 2.0) @ F)
            d2 = vals[0] - 2 * vals[1] + vals[2]
            worst = max(worst, float(d2.max()))
    return worst


# ------------------------------------------------------------ suites

def _timed(suite, name, anchor, fn, tol, mode="max"):
    t = time.perf_counter()
    v = fn()
    ok = v <= tol if mode == "max" else v > tol
    return CheckItem(suite, name, anchor, float(v), tol, bool(ok), time.perf_counter() - t)


def suite_rc_identities() -> list[CheckItem]:
    items = []
    g6 = small_graphs(6)
    g5 = small_graphs(5)
    items.append(_timed("rc-identities", "edwards-sokal marginals",
                        "joint spin/bond law has the Potts and random-cluster laws as marginals",
                        lambda: max(es_marginal_deviation(g, b, q) for g in g6 for q in (2, 3) for b in (0.3, 0.9)),
                        1e-12))
    items.append(_timed("rc-identities", "single-edge conditional",
                        "bond conditional is p if joined elsewhere, else p/(p+(1-p)q)",
                        lambda: max(single_edge_deviation(g, p, q, c, r)
                                    for g in g5 for p in (0.2, 0.5, 0.8) for q in (0.5, 1, 2, 3)
                                    for c, r in (("free", None), ("wired", exterior_region(g)),
                                                 ("compactified", exterior_region(g)))),
                        1e-12))
    items.append(_timed("rc-identities", "potts diagonal correlation",
                        "mu(X_x = i, X_y = i) - 1/q^2 is positive for beta > 0",
                        lambda: min(potts_pair_margin(g, 0.4, q) for g in g6 for q in (2, 3, 4)),
                        1e-12, mode="min"))
    items.append(_timed("rc-identities", "magnetization-connection identity",
                        "boundary-spin magnetisation equals 1/q + (q-1)/q times the boundary connection probability",
                        lambda: max(magnetization_connection_deviation(4, 2, b, q) for b in (0.3, 0.8) for q in (2, 3)),
                        1e-12))
    return items


def suite_couplings() -> list[CheckItem]:
    items = []
    g4 = [g for g in small_graphs(4)]
    items.append(_timed("couplings", "edwards-sokal round trip",
                        "spin -> bond -> spin kernels reproduce both laws",
                        lambda: max(es_round_trip_deviation(g, 0.5, q) for g in g4 for q in (2, 3)), 1e-12))

    def opt():
        worst = 0.0
        rng = np.random.default_rng(0)
        for n in (1, 2, 3):
            for _ in range(20):
                a, b = rng.dirichlet(np.ones(2**n)), rng.dirichlet(np.ones(2**n))
                rows = _product_rows(n, 2)
                mu = FiniteDistribution.from_probs(rows, a, tuple(range(n)))
                nu = FiniteDistribution.from_probs(rows, b, tuple(range(n)))
                worst = max(worst, abs(optimal_coupling(mu, nu).p_differ() - tv_distance(mu, nu)))
        return worst
    items.append(_timed("couplings", "optimal coupling", "P(X != X') equals the total variation distance",
                        opt, 1e-12))
    return items


def suite_domination() -> list[CheckItem]:
    t = time.perf_counter()
    res = rc_domination_items(small_graphs(5))
    bad = [name for name, ok in res if not ok]
    return [CheckItem("domination", "rc sandwich, p-monotonicity, grey domination",
                      "Strassen flow finds an ordered coupling", float(len(bad)), 0.0,
                      not bad, time.perf_counter() - t)]


def suite_concavity() -> list[CheckItem]:
    gs = small_graphs(5)
    return [_timed("concavity", "second differences in each coupling",
                   "phi^1(f) is concave in each K_b for increasing f (q = 2)",
                   lambda: max(concavity_max_second_difference(g, exterior_region(g)) for g in gs),
                   1e-7)]


SUITES = {
    "couplings": suite_couplings,
    "domination": suite_domination,
    "rc-identities": suite_rc_identities,
    "concavity": suite_concavity,
}


def run_suite(name: str) -> list[CheckItem]:
    if name == "all":
        return [item for fn in SUITES.values() for item in fn()]
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}")
    return SUITES[name]()
