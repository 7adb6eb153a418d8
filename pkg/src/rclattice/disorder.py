"""Random ferromagnetic couplings and quenched random-cluster experiments."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats

from .lattice import Graph, as_mask, boundary, bond_sets
from .percolation import components

__all__ = [
    "DisorderLaw",
    "CouplingField",
    "sample_couplings",
    "disorder_bond_probs",
    "BondProbs",
    "dilution_beta_bounds",
    "quenched_experiment",
    "QuenchedSummary",
    "bernoulli_observable",
    "fk_observable",
]


@dataclass(frozen=True)
class DisorderLaw:
    """I.i.d. law of one coupling J_b >= 0.

    ``dilution``: J = value with probability p, else 0. ``gamma``: Gamma(a)
    with unit scale. ``table``: finite support ``values`` with ``probs``.
    """
    kind: str
    p: float = 1.0
    value: float = 1.0
    a: float = 1.0
    values: tuple[float, ...] = ()
    probs: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == "dilution":
            if not 0 <= self.p <= 1 or self.value < 0:
                raise ValueError("dilution needs p in [0,1] and value >= 0")
        elif self.kind == "gamma":
            if self.a <= 0:
                raise ValueError("gamma shape must be positive")
        elif self.kind == "table":
            if len(self.values) != len(self.probs) or not self.values:
                raise ValueError("table needs matching values and probs")
            if min(self.values) < 0:
                raise ValueError("couplings must be nonnegative")
            if not math.isclose(sum(self.probs), 1.0, abs_tol=1e-12) or min(self.probs) < 0:
                raise ValueError("table probs must be a probability vector")
        else:
            raise ValueError(f"unknown disorder kind {self.kind!r}")

    def sample(self, n: int, rng) -> np.ndarray:
        rng = np.random.default_rng(rng)
        if self.kind == "dilution":
            return np.where(rng.random(n) < self.p, self.value, 0.0)
        if self.kind == "gamma":
            return rng.gamma(self.a, 1.0, size=n)
        return rng.choice(np.array(self.values, float), size=n, p=np.array(self.probs))

    @property
    def p_positive(self) -> float:
        """P(J > 0)."""
        if self.kind == "dilution":
            return self.p if self.value > 0 else 0.0
        if self.kind == "gamma":
            return 1.0
        return float(sum(pr for v, pr in zip(self.values, self.probs) if v > 0))

    def _expect(self, f) -> float:
        if self.kind == "dilution":
            return self.p * f(self.value) + (1 - self.p) * f(0.0)
        if self.kind == "table":
            return float(sum(pr * f(v) for v, pr in zip(self.values, self.probs)))
        dens = stats.gamma(self.a).pdf
        return integrate.quad(lambda j: f(j) * dens(j), 0, np.inf, limit=200)[0]

    def pbar(self, beta: float) -> float:
        """E[1 - exp(-2 beta J)]."""
        if self.kind == "gamma":
            return 1.0 - (1.0 + 2.0 * beta) ** (-self.a)
        return self._expect(lambda j: -math.expm1(-2.0 * beta * j))

    def punder(self, beta: float, q: float) -> float:
        """E[p_b / (p_b + q (1 - p_b))] with p_b = 1 - exp(-2 beta J)."""
        def f(j):
            pb = -math.expm1(-2.0 * beta * j)
            return pb / (pb + q * (1.0 - pb)) if pb > 0 else 0.0
        return self._expect(f)

    def descriptor(self) -> dict:
        if self.kind == "dilution":
            return {"kind": "dilution", "p": self.p, "value": self.value}
        if self.kind == "gamma":
            return {"kind": "gamma", "a": self.a}
        return {"kind": "table", "values": list(self.values), "probs": list(self.probs)}

    @classmethod
    def from_descriptor(cls, d: dict) -> "DisorderLaw":
        d = dict(d)
        kind = d.pop("kind")
        if kind == "table":
            d["values"] = tuple(d["values"])
            d["probs"] = tuple(d["probs"])
        return cls(kind, **d)


@dataclass(frozen=True, eq=False)
class CouplingField:
    graph: Graph
    J: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        J = np.asarray(self.J, dtype=float)
        if J.shape != (self.graph.n_bonds,):
            raise ValueError("one coupling per bond")
        if np.any(J < 0):
            raise ValueError("couplings must be nonnegative")
        object.__setattr__(self, "J", J)

    def pruned(self) -> tuple[Graph, np.ndarray]:
        """Graph without its J = 0 bonds and the surviving couplings."""
        keep = self.J > 0
        g = self.graph
        return Graph(g.n_vertices, g.bonds[keep], kind="pruned"), self.J[keep]


def sample_couplings(g: Graph, law: DisorderLaw, rng, seed: int | None = None) -> CouplingField:
    return CouplingField(g, law.sample(g.n_bonds, rng), seed)


@dataclass
class BondProbs:
    pbar: float
    punder: float
    p_b: np.ndarray
    p_b_prime: np.ndarray
    closed_form: bool


def disorder_bond_probs(field_: CouplingField, beta: float, q: float,
                        law: DisorderLaw | None = None) -> BondProbs:
    """Per-bond p_b = 1 - exp(-2 beta J_b), p_b' = p_b / (p_b + q(1 - p_b)), and their means.

    With ``law`` given the means are the exact expectations; otherwise
    they are the empirical means over the field.
    """
    if beta < 0 or q < 1:
        raise ValueError("need beta >= 0 and q >= 1")
    pb = -np.expm1(-2.0 * beta * field_.J)
    pbp = np.divide(pb, pb + q * (1.0 - pb), out=np.zeros_like(pb), where=pb > 0)
    if law is not None:
        return BondProbs(law.pbar(beta), law.punder(beta, q), pb, pbp, True)
    return BondProbs(float(pb.mean()), float(pbp.mean()), pb, pbp, False)


def dilution_beta_bounds(p: float, q: float, p_c: float) -> tuple[float, float]:
    """Bounds on 2 beta_c for the diluted model: (-ln((p-p_c)/p), -ln((p-p_c)/(p q)))."""
    if p <= p_c:
        raise ValueError("bounds need p > p_c")
    return -math.log((p - p_c) / p), -math.log((p - p_c) / (p * q))


# ------------------------------------------------------------------ experiments

def fk_observable(g: Graph, open_bonds: np.ndarray, kind: str, region=None) -> np.ndarray:
    """Row-wise cluster observable of bond configurations.

    ``largest``: size of the largest open cluster over |V|. ``boundary``:
    fraction of region sites joined to a vertex outside the region.
    """
    open_bonds = np.atleast_2d(open_bonds).astype(bool)
    V = g.n_vertices
    out = np.empty(len(open_bonds))
    inside = as_mask(g, region)
    outside = np.flatnonzero(~inside)
    for i, row in enumerate(open_bonds):
        lab = components(V, g.bonds, row)
        if kind == "largest":
            out[i] = np.bincount(lab).max() / V
        elif kind == "boundary":
            hit = np.isin(lab, lab[outside]) if len(outside) else np.zeros(V, bool)
            out[i] = hit[inside].mean()
        else:
            raise ValueError("kind must be 'largest' or 'boundary'")
    return out


def bernoulli_observable(g: Graph, p: float, samples: int, rng, kind: str,
                         region=None) -> tuple[float, float]:
    """Mean and standard error of an FK observable under Bernoulli(p) bonds.

    Only bonds touching the region are random for ``boundary``; bonds
    between exterior vertices are open (the exterior is wired).
    """
    rng = np.random.default_rng(rng)
    inside = as_mask(g, region)
    _, touching = bond_sets(g, inside)
    rows = rng.random((samples, g.n_bonds)) < p
    if kind == "boundary":
        fixed = np.ones(g.n_bonds, bool)
        fixed[touching] = False
        rows[:, fixed] = True
    vals = fk_observable(g, rows, kind, inside)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples))


@dataclass
class QuenchedSummary:
    mean: float
    stderr: float
    between_var: float
    within_var: float
    records: list[dict] = field(default_factory=list)
    observable: str = "largest"
    n: int = 0

    def to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for r in self.records:
                fh.write(json.dumps(r, sort_keys=True) + "\n")


def quenched_experiment(g: Graph, law: DisorderLaw, beta: float, q: int, replicas: int,
                        sweeps: int, rng, burn_in: int = 50, region=None,
                        observable: str | None = None, spin: int = 1,
                        seed: int | None = None) -> QuenchedSummary:
    """Disorder-averaged FK observable of the q-state Potts model with random couplings.

    For each replica a coupling field is drawn, zero bonds are pruned, and
    Swendsen-Wang with p_b = 1 - exp(-2 beta J_b) is run. With a region the
    exterior holds spin ``spin`` and the default observable is the fraction
    of region sites connected to the exterior; on a graph without region
    it is the largest-cluster fraction. Magnetisation is recorded too.
    """
    from .sampler import sw_batch, make_rng

    rng = np.random.default_rng(rng)
    inside = as_mask(g, region)
    has_bd = not inside.all()
    observable = observable or ("boundary" if has_bd else "largest")
    values = np.arange(1, q + 1)
    rep_means, rep_vars, records = [], [], []
    for r in range(replicas):
        rseed = int(rng.integers(2**63)) if seed is None else seed
        rrng = make_rng(rseed, r) if seed is not None else np.random.default_rng(rseed)
        cf = sample_couplings(g, law, rrng, rseed)
        pg, J = cf.pruned()
        eta = np.full(g.n_vertices, spin) if has_bd else None
        sigma = np.full((1, g.n_vertices), spin)
        if not has_bd:
            sigma = rrng.integers(1, q + 1, size=(1, g.n_vertices))
        obs, mags = [], []
        full_open = np.zeros(g.n_bonds, dtype=bool)
        keep = np.flatnonzero(cf.J > 0)

        def cb(s, sig, open_b):
            if s < burn_in:
                return
            full_open[:] = False
            full_open[keep] = open_b[0].astype(bool)
            if observable == "boundary":
                # the exterior is wired: bonds between exterior vertices count as open
                ext = ~inside[g.bonds[:, 0]] & ~inside[g.bonds[:, 1]]
                full_open[ext] = True
            obs.append(fk_observable(g, full_open, observable, inside)[0])
            frac = np.bincount(sig[0][inside], minlength=q + 1)[1:] / inside.sum()
            m = (q * frac[spin - 1] - 1) / (q - 1) if has_bd else (q * frac.max() - 1) / (q - 1)
            mags.append(m)

        sw_batch(pg, values, beta, inside if has_bd else None, eta, sigma, burn_in + sweeps,
                 rrng, couplings=J, callback=cb)
        from .sampler import integrated_autocorr
        o = np.array(obs)
        tau = integrated_autocorr(o)
        rep_means.append(o.mean())
        rep_vars.append(o.var(ddof=1) * 2 * tau / len(o) if len(o) > 1 else 0.0)
        records.append({"replica": r, "seed": rseed, "open_coupling_fraction": float((cf.J > 0).mean()),
                        "magnetization": float(np.mean(mags)), "connection": float(o.mean()),
                        "observable": observable, "beta": beta, "q": q, "n_vertices": g.n_vertices})
    rep_means = np.array(rep_means)
    between = float(rep_means.var(ddof=1)) if replicas > 1 else 0.0
    within = float(np.mean(rep_vars))
    # the spread of replica means already contains both disorder and MCMC noise
    se = math.sqrt(between / replicas) if replicas > 1 else math.sqrt(within)
    return QuenchedSummary(float(rep_means.mean()), se, between, within, records, observable,
                           g.n_vertices)
