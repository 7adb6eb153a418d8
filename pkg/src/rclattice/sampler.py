"""Markov chain samplers, monotone coupling from the past, and measurement.

Random numbers come from Philox generators keyed by
``SeedSequence([master_seed, *stream])``; a stream is a tuple such as
``(grid_point, replica)``. Batched routines run many independent chains as
rows of one array.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .lattice import Graph, as_mask, bond_sets
from .model import Interaction, site_conditional
from .percolation import batch_component_labels, label_clusters
from .random_cluster import RCParams, rc_heatbath_step
from .exact import rc_geometry

__all__ = [
    "make_rng",
    "ChainState",
    "heat_bath_sweep",
    "gibbs_batch",
    "heat_bath_batch",
    "swendsen_wang_sweep",
    "sw_batch",
    "sweeny_sweep",
    "sweeny_batch",
    "cftp",
    "cftp_ising",
    "CFTPFailure",
    "MeasurementSeries",
    "measure",
    "integrated_autocorr",
    "magnetization",
]


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based generator for one (seed, stream) pair."""
    ss = np.random.SeedSequence([int(seed), *[int(s) for s in stream]])
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class ChainState:
    """Configuration of one chain plus the model it targets.

    ``config`` is a spin configuration on all vertices (values outside the
    region equal the boundary condition) or a bond configuration.
    """
    graph: Graph
    config: np.ndarray
    inter: Interaction | None = None
    region: np.ndarray | None = None
    sweeps: int = 0
    stream: tuple = ()
    rc: RCParams | None = None
    couplings: np.ndarray | None = None

    def __post_init__(self):
        self.config = np.array(self.config, copy=True)
        if self.rc is None:
            self.region = as_mask(self.graph, self.region)

    def descriptor(self) -> dict:
        d = {"graph": self.graph.descriptor(), "sweeps": self.sweeps, "stream": list(self.stream)}
        if self.inter is not None:
            d["model"] = self.inter.descriptor()
        if self.rc is not None:
            d["rc"] = {"p": self.rc.p, "q": self.rc.q, "boundary": self.rc.boundary}
        return d


# ---------------------------------------------------------------- heat bath

def heat_bath_sweep(state: ChainState, rng, scan: str = "random") -> ChainState:
    """|region| single-site heat-bath updates at random (or sequential) sites."""
    rng = np.random.default_rng(rng)
    g, inter = state.graph, state.inter
    sites = np.flatnonzero(state.region)
    order = rng.choice(sites, size=len(sites)) if scan == "random" else sites
    cfg = state.config.copy()
    vals = inter.alphabet.array
    for x in order:
        pr = site_conditional(g, inter, cfg, int(x), state.couplings)
        cfg[x] = vals[min(int(np.searchsorted(np.cumsum(pr), rng.random(), side="right")), len(vals) - 1)]
    return replace(state, config=cfg, sweeps=state.sweeps + 1)


class _BatchKernel:
    """Vectorised single-site conditionals for many chains at once."""

    def __init__(self, g: Graph, inter: Interaction, couplings=None):
        self.g = g
        self.inter = inter
        self.nbr = g.padded_neighbors
        self.valid = self.nbr >= 0
        inc = -np.ones_like(self.nbr)
        for v, b in enumerate(g.incident):
            inc[v, : len(b)] = b
        self.J = None
        if couplings is not None:
            J = np.asarray(couplings, float)
            self.J = np.where(self.valid, J[np.clip(inc, 0, None)], 0.0)
        self.k = len(inter.alphabet)
        self.table = None
        deg = self.nbr.shape[1]
        if couplings is None and (self.k + 1) ** deg <= 2**16:
            self._build_table(deg)

    def _build_table(self, deg: int) -> None:
        """Conditional CDFs for every neighbour pattern (absent neighbours coded as k)."""
        k = self.k
        pats = _pattern_rows(deg, k + 1)
        U = np.hstack([self.inter.U, np.zeros((k, 1))])
        energy = self.inter.V[None, :] + U[:, pats].sum(axis=2).T
        with np.errstate(invalid="ignore"):
            logw = np.where(np.isinf(energy), -np.inf, -self.inter.beta * energy)
        top = logw.max(axis=1, keepdims=True)
        dead = top[:, 0] == -np.inf
        w = np.exp(logw - np.where(dead[:, None], 0.0, top))
        c = np.cumsum(w, axis=1)
        with np.errstate(invalid="ignore"):
            c = c / c[:, -1:]
        c[dead] = np.nan
        self.table = c
        self.radix = (k + 1) ** np.arange(deg)
        self.flat_nbr = np.where(self.valid, self.nbr, 0)

    def _table_cumulative(self, idx: np.ndarray, sites: np.ndarray) -> np.ndarray:
        B, V = idx.shape
        nb = self.flat_nbr[sites]
        vals = idx.ravel()[(np.arange(B) * V)[:, None] + nb]
        vals = np.where(self.valid[sites], vals, self.k)
        c = self.table[vals @ self.radix]
        if np.isnan(c[:, 0]).any():
            bad = int(sites[np.flatnonzero(np.isnan(c[:, 0]))[0]])
            raise ValueError(f"empty conditional support at site {bad}")
        return c

    def cumulative(self, idx: np.ndarray, sites: np.ndarray) -> np.ndarray:
        """(B, k) cumulative conditional laws at ``sites[b]`` for each chain ``b``."""
        if self.table is not None:
            return self._table_cumulative(idx, sites)
        B = len(idx)
        nb = self.nbr[sites]
        ok = self.valid[sites]
        nb_idx = np.take_along_axis(idx, np.clip(nb, 0, None), axis=1)
        U = self.inter.U[:, nb_idx]  # (k, B, deg)
        if self.J is not None:
            Jx = self.J[sites]
            U = np.where(Jx[None] == 0, 0.0, U * Jx[None])
        U = np.where(ok[None], U, 0.0)
        energy = self.inter.V[:, None] + U.sum(axis=2)  # (k, B)
        energy = energy.T
        with np.errstate(invalid="ignore"):
            logw = np.where(np.isinf(energy), -np.inf, -self.inter.beta * energy)
        top = logw.max(axis=1, keepdims=True)
        if np.any(top == -np.inf):
            bad = int(sites[np.flatnonzero(top[:, 0] == -np.inf)[0]])
            raise ValueError(f"empty conditional support at site {bad}")
        w = np.exp(logw - top)
        c = np.cumsum(w, axis=1)
        return c / c[:, -1:]

    def update(self, idx: np.ndarray, sites: np.ndarray, u: np.ndarray) -> None:
        cdf = self.cumulative(idx, sites)
        new = np.minimum((cdf <= u[:, None]).sum(axis=1), self.k - 1)
        idx[np.arange(len(idx)), sites] = new


def _pattern_rows(n: int, k: int) -> np.ndarray:
    """All of range(k)^n with the first coordinate varying fastest."""
    return np.stack(np.unravel_index(np.arange(k**n), (k,) * n, order="F"), axis=1)


def heat_bath_batch(g: Graph, inter: Interaction, region, eta, n_chains: int, sweeps: int,
                    rng, scan: str = "random", init=None, couplings=None,
                    record_every: int = 0, burn_in: int = 0):
    """Run ``n_chains`` independent heat-bath chains.

    Returns the final spin configurations, or, when ``record_every`` > 0,
    a list of snapshots taken every ``record_every`` sweeps after
    ``burn_in`` sweeps.
    """
    rng = np.random.default_rng(rng)
    inside = as_mask(g, region)
    sites = np.flatnonzero(inside)
    vals = inter.alphabet.array
    k = len(vals)
    if eta is None:
        eta = np.full(g.n_vertices, vals[0])
    base = inter.alphabet.index(eta)
    idx = np.broadcast_to(base, (n_chains, g.n_vertices)).copy()
    if init is None:
        idx[:, sites] = rng.integers(0, k, size=(n_chains, len(sites)))
        if inter.hard:
            idx[:, sites] = _feasible_start(inter, k)
    else:
        idx[:] = inter.alphabet.index(np.broadcast_to(init, idx.shape))
    kern = _BatchKernel(g, inter, couplings)
    snaps = []
    for s in range(sweeps):
        for t in range(len(sites)):
            x = sites[rng.integers(0, len(sites), size=n_chains)] if scan == "random" else np.full(n_chains, sites[t])
            kern.update(idx, x, rng.random(n_chains))
        if record_every and s + 1 > burn_in and (s + 1 - burn_in) % record_every == 0:
            snaps.append(vals[idx])
    return snaps if record_every else vals[idx]


def _feasible_start(inter: Interaction, k: int) -> int:
    """Position of a spin with finite self-interaction (empty state for lattice gases)."""
    diag = np.diag(inter.U)
    ok = np.flatnonzero(np.isfinite(inter.U).all(axis=1))
    if not len(ok):
        ok = np.flatnonzero(np.isfinite(diag))
    return int(ok[0])


def gibbs_batch(g: Graph, inter: Interaction, region, eta, n: int, sweeps: int, rng, couplings=None):
    """``n`` approximately independent draws: one chain per draw, fresh random starts."""
    return heat_bath_batch(g, inter, region, eta, n, sweeps, rng, couplings=couplings)


# ------------------------------------------------------------ Swendsen-Wang

def _sw_probs(g: Graph, beta: float, couplings=None) -> np.ndarray:
    J = np.ones(g.n_bonds) if couplings is None else np.asarray(couplings, float)
    return -np.expm1(-2.0 * beta * J)


def sw_batch(g: Graph, values, beta: float, region, eta, sigma: np.ndarray, sweeps: int, rng,
             couplings=None, callback: Callable[[int, np.ndarray, np.ndarray], None] | None = None):
    """Swendsen-Wang sweeps on a batch of spin configurations (rows of ``sigma``).

    Bonds touching the region open with probability p_b = 1 - exp(-2 beta J_b)
    when their end spins agree. A cluster containing a vertex outside the
    region keeps that vertex's spin; every other cluster gets a uniform
    value from ``values``. ``callback(sweep, sigma, open_bonds)`` sees each
    new state.
    """
    rng = np.random.default_rng(rng)
    values = np.asarray(values)
    inside = as_mask(g, region)
    _, touching = bond_sets(g, inside)
    b = g.bonds[touching]
    pb = _sw_probs(g, beta, couplings)[touching]
    keep = pb > 0
    b, pb, tids = b[keep], pb[keep], touching[keep]
    sigma = np.array(sigma, copy=True)
    B, V = sigma.shape
    if eta is not None:
        fixed = ~inside
        sigma[:, fixed] = np.asarray(eta)[fixed]
    offs = (np.arange(B) * V)[:, None]
    fixed_flat = (offs + np.flatnonzero(~inside)[None, :]).ravel()
    for s in range(sweeps):
        same = sigma[:, b[:, 0]] == sigma[:, b[:, 1]]
        op = same & (rng.random((B, len(b))) < pb)
        r, e = np.nonzero(op)
        rows = r * V + b[e, 0]
        cols = r * V + b[e, 1]
        m = coo_matrix((np.ones(len(rows), np.int8), (rows, cols)), shape=(B * V, B * V))
        nc, lab = connected_components(m, directed=False)
        colors = values[rng.integers(0, len(values), size=nc)]
        flat = sigma.ravel()
        colors[lab[fixed_flat]] = flat[fixed_flat]
        sigma = colors[lab].reshape(B, V)
        if callback is not None:
            full = np.zeros((B, g.n_bonds), dtype=np.uint8)
            full[:, tids] = op
            callback(s, sigma, full)
    return sigma


def swendsen_wang_sweep(state: ChainState, rng, boundary: str = "free") -> ChainState:
    """One Swendsen-Wang update of a Potts-type (or zero-field Ising) chain.

    ``boundary="spin"`` keeps the exterior spins fixed and forces boundary
    clusters to them; ``free`` updates every vertex.
    """
    inter = state.inter
    _check_sw_model(inter)
    region = state.region if boundary != "free" else None
    eta = state.config if boundary != "free" else None
    out = sw_batch(state.graph, inter.alphabet.array, inter.beta, region, eta,
                   state.config[None, :], 1, rng, state.couplings)[0]
    return replace(state, config=out, sweeps=state.sweeps + 1)


def _check_sw_model(inter: Interaction) -> None:
    k = len(inter.alphabet)
    U = inter.U
    off = U[~np.eye(k, dtype=bool)]
    if not (np.allclose(off, off[0]) and np.allclose(np.diag(U), U[0, 0])
            and np.isclose(off[0] - U[0, 0], 2.0) and np.allclose(inter.V, inter.V[0])):
        raise ValueError("Swendsen-Wang needs a zero-field Potts-type interaction (unequal - equal = 2)")


# ---------------------------------------------------------------- Sweeny

def sweeny_sweep(state: ChainState, rng) -> ChainState:
    """|coordinate bonds| heat-bath updates at uniformly chosen bonds (BFS per step)."""
    rng = np.random.default_rng(rng)
    g, params = state.graph, state.rc
    ids = rc_geometry(g, params.boundary, params.region, params.exterior).bond_ids
    cfg = state.config
    for e in rng.choice(ids, size=len(ids)):
        cfg = rc_heatbath_step(g, params, cfg, int(e), rng)
    return replace(state, config=cfg, sweeps=state.sweeps + 1)


def sweeny_batch(g: Graph, params: RCParams, n_chains: int, sweeps: int, rng,
                 record_every: int = 0, burn_in: int = 0, init=None):
    """Many Sweeny chains at once on a small graph; returns coordinate-bond rows.

    Connectivity without the chosen bond is found by label propagation on
    the contracted graph of the boundary convention, vectorised over chains.
    """
    rng = np.random.default_rng(rng)
    geo = rc_geometry(g, params.boundary, params.region, params.exterior)
    E = len(geo.bond_ids)
    X = np.zeros((n_chains, E), dtype=bool) if init is None else np.array(init, dtype=bool)
    pd = params.p_disconnected
    ar = np.arange(n_chains)
    snaps = []
    for s in range(sweeps):
        for _ in range(E):
            e = rng.integers(0, E, size=n_chains)
            rows = X.copy()
            rows[ar, e] = False
            lab = batch_component_labels(geo.n_nodes, geo.edges, rows)
            a, b = geo.edges[e, 0], geo.edges[e, 1]
            joined = lab[ar, a] == lab[ar, b]
            prob = np.where(joined, params.p, pd)
            X[ar, e] = rng.random(n_chains) < prob
        if record_every and s + 1 > burn_in and (s + 1 - burn_in) % record_every == 0:
            snaps.append(X.astype(np.uint8))
    return snaps if record_every else X.astype(np.uint8)


# -------------------------------------------------------------------- CFTP

class CFTPFailure(RuntimeError):
    pass


def cftp(g: Graph, inter: Interaction, region, eta, n: int, rng, max_sweeps: int = 2**20,
         batch: int = 20_000, check_sandwich: bool = True, scan: str = "random") -> np.ndarray:
    """Exact draws by monotone coupling from the past.

    Each draw runs a bottom chain (all lowest spin) and a top chain (all
    highest spin) from time -T with the same site choices and uniforms,
    T = 1, 2, 4, ... sweeps, reusing the randomness of the last T sweeps
    when doubling. ``scan="systematic"`` visits the sites in index order
    each sweep instead of at random. The spin order must be respected by the heat-bath
    update (as for ferromagnetic Ising); the pathwise sandwich is asserted.
    Failure to coalesce within ``max_sweeps`` raises instead of returning
    a biased sample.
    """
    rng = np.random.default_rng(rng)
    out = []
    done = 0
    while done < n:
        m = min(batch, n - done)
        out.append(_cftp_batch(g, inter, region, eta, m, rng, max_sweeps, check_sandwich, scan))
        done += m
    return np.concatenate(out)


def _cftp_batch(g, inter, region, eta, m, rng, max_sweeps, check_sandwich, scan="random"):
    if scan not in ("random", "systematic"):
        raise ValueError("scan must be 'random' or 'systematic'")
    inside = as_mask(g, region)
    sites = np.flatnonzero(inside)
    L = len(sites)
    vals = inter.alphabet.array
    k = len(vals)
    if eta is None:
        eta = np.full(g.n_vertices, vals[0])
    base = inter.alphabet.index(eta)
    kern = _BatchKernel(g, inter)
    # blocks[j] holds the randomness for sweeps -(2^j) .. -(2^(j-1)) - 1
    site_blocks: list[np.ndarray] = []
    u_blocks: list[np.ndarray] = []
    result = np.empty((m, g.n_vertices), dtype=np.int64)
    pending = np.arange(m)
    T = 1
    while True:
        need = T - sum(b.shape[1] for b in site_blocks) // L
        if scan == "random":
            site_blocks.append(sites[rng.integers(0, L, size=(m, need * L))])
        else:
            site_blocks.append(np.broadcast_to(np.tile(sites, need), (m, need * L)))
        u_blocks.append(rng.random((m, need * L)))
        all_sites = np.concatenate(site_blocks[::-1], axis=1)
        all_u = np.concatenate(u_blocks[::-1], axis=1)
        lo = np.broadcast_to(base, (len(pending), g.n_vertices)).copy()
        hi = lo.copy()
        lo[:, sites] = 0
        hi[:, sites] = k - 1
        for t in range(all_sites.shape[1]):
            x = all_sites[pending, t]
            u = all_u[pending, t]
            kern.update(lo, x, u)
            kern.update(hi, x, u)
            if check_sandwich and np.any(lo > hi):
                raise AssertionError("sandwich violated: update rule is not monotone")
        merged = np.all(lo == hi, axis=1)
        result[pending[merged]] = lo[merged]
        pending = pending[~merged]
        if not len(pending):
            return vals[result]
        T *= 2
        if T > max_sweeps:
            raise CFTPFailure(f"no coalescence within {max_sweeps} sweeps")


def cftp_ising(g: Graph, region, h: float, beta: float, eta, n: int, rng, **kw) -> np.ndarray:
    from .model import make_model
    _, inter = make_model("ising", beta=beta, h=h)
    return cftp(g, inter, region, eta, n, rng, **kw)


# ------------------------------------------------------------- measurement

def magnetization(sigma, region=None) -> np.ndarray:
    """Mean spin over ``region`` (row-wise for a batch)."""
    sigma = np.asarray(sigma, dtype=float)
    if region is None:
        return sigma.mean(axis=-1)
    return sigma[..., np.asarray(region)].mean(axis=-1)


def integrated_autocorr(x: np.ndarray, c: float = 5.0) -> float:
    """Integrated autocorrelation time with automatic windowing (W >= c tau)."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 4:
        return 0.5
    y = x - x.mean()
    var = y.var()
    if var == 0:
        return 0.5
    f = np.fft.rfft(y, n=2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n] / (var * n)
    tau = 0.5
    for w in range(1, n):
        tau += acf[w]
        if w >= c * tau:
            break
    return float(max(tau, 0.5))


@dataclass
class MeasurementSeries:
    names: list[str]
    values: dict[str, np.ndarray]
    thin: int = 1
    burn_in: int = 0
    sweeps: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        lens = {len(v) for v in self.values.values()}
        if len(lens) > 1:
            raise ValueError("series lengths differ")
        if self.burn_in < 0 or self.thin < 1:
            raise ValueError("burn-in must be >= 0 and thinning >= 1")

    def __len__(self):
        return len(next(iter(self.values.values()))) if self.values else 0

    def mean(self, name: str) -> float:
        return float(np.mean(self.values[name]))

    def variance(self, name: str) -> float:
        return float(np.var(self.values[name], ddof=1)) if len(self) > 1 else 0.0

    def tau(self, name: str) -> float:
        return integrated_autocorr(self.values[name])

    def stderr(self, name: str) -> float:
        n = len(self)
        if n < 2:
            return math.inf
        return math.sqrt(self.variance(name) * 2 * self.tau(name) / n)

    def summary(self) -> dict:
        return {n: {"mean": self.mean(n), "stderr": self.stderr(n), "tau_int": self.tau(n),
                    "n": len(self)} for n in self.names}

    def to_csv(self, path) -> None:
        sw = self.sweeps if self.sweeps is not None else np.arange(len(self))
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["sweep", *self.names])
            for i in range(len(self)):
                w.writerow([int(sw[i]), *[repr(float(self.values[n][i])) for n in self.names]])

    def summary_jsonl(self, path, extra: dict | None = None) -> None:
        with open(path, "a") as fh:
            for name, s in self.summary().items():
                fh.write(json.dumps({"observable": name, **s, **self.meta, **(extra or {})},
                                    sort_keys=True) + "\n")


def measure(stream: Iterable, observables: dict[str, Callable], n: int,
            burn_in: int = 0, thin: int = 1) -> MeasurementSeries:
    """Record observables on every ``thin``-th state after ``burn_in`` states."""
    rec: dict[str, list[float]] = {k: [] for k in observables}
    sweeps = []
    for i, state in enumerate(stream):
        if i >= burn_in and (i - burn_in) % thin == 0:
            for k, f in observables.items():
                rec[k].append(float(f(state)))
            sweeps.append(i)
            if len(sweeps) == n:
                break
    return MeasurementSeries(list(observables), {k: np.array(v) for k, v in rec.items()},
                             thin, burn_in, np.array(sweeps))
