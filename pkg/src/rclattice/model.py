"""Spin alphabets, pair interactions and the named lattice models.

Energies use ``np.inf`` for hard constraints. Weights are handled as log
weights, with ``exp(-inf) = 0``; a hard constraint stays a constraint at
``beta = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .lattice import Graph, as_mask, bipartition, bond_sets

__all__ = [
    "SpinAlphabet",
    "Interaction",
    "make_model",
    "relative_energy",
    "gibbs_weight",
    "local_energy",
    "site_conditional",
    "flip_odd_sublattice",
    "absorb_self_potential",
]


@dataclass(frozen=True)
class SpinAlphabet:
    values: tuple[int, ...]

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        if not vals:
            raise ValueError("alphabet must be nonempty")
        if any(a >= b for a, b in zip(vals, vals[1:])):
            raise ValueError("alphabet must be strictly increasing")
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.values)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.values, dtype=np.int64)

    def index(self, config) -> np.ndarray:
        """Map spin values to positions in the alphabet."""
        cfg = np.asarray(config)
        idx = np.searchsorted(self.array, cfg)
        idx = np.clip(idx, 0, len(self) - 1)
        if not np.array_equal(self.array[idx], cfg):
            raise ValueError("configuration contains values outside the alphabet")
        return idx


@dataclass(frozen=True, eq=False)
class Interaction:
    """Nearest-neighbour pair energy ``U``, self-energy ``V`` and ``beta``.

    ``U`` and ``V`` are indexed by alphabet position, not by spin value.
    """
    alphabet: SpinAlphabet
    U: np.ndarray
    V: np.ndarray
    beta: float = 1.0
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        k = len(self.alphabet)
        U = np.array(self.U, dtype=float)
        V = np.array(self.V, dtype=float)
        if U.shape != (k, k) or V.shape != (k,):
            raise ValueError("U must be |S|x|S| and V must have length |S|")
        if np.any(U == -np.inf) or not np.all(np.isfinite(V)):
            raise ValueError("U may not take -inf and V must be finite")
        if not np.array_equal(U, U.T):
            raise ValueError("U must be symmetric")
        if not np.isfinite(U.min()):
            raise ValueError("min U must be finite")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        U.setflags(write=False)
        V.setflags(write=False)
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "V", V)

    @property
    def m(self) -> float:
        return float(self.U.min())

    @property
    def hard(self) -> bool:
        return bool(np.isinf(self.U).any())

    def with_beta(self, beta: float) -> "Interaction":
        return replace(self, beta=float(beta))

    def descriptor(self) -> dict:
        return {"name": self.name, "beta": self.beta, **self.params}


def make_model(name: str, beta: float = 1.0, **params) -> tuple[SpinAlphabet, Interaction]:
    """Build one of the named models.

    ``ising(h)``, ``antiferro_ising(h)``, ``potts(q)``, ``hardcore(lam)`` and
    ``widom_rowlinson(lam_plus, lam_minus)``. The two lattice gases ignore
    ``beta`` and fix it to 1, with activities entering as ``V = -log(lam)``.
    """
    inf = np.inf
    if name in ("ising", "antiferro_ising"):
        h = float(params.get("h", 0.0))
        S = SpinAlphabet((-1, 1))
        a = S.array
        sign = -1.0 if name == "ising" else 1.0
        U = sign * np.outer(a, a).astype(float)
        V = -h * a.astype(float)
        inter = Interaction(S, U, V, beta, name, {"h": h})
    elif name == "potts":
        q = int(params.get("q", 2))
        if q < 2:
            raise ValueError("Potts model needs q >= 2")
        S = SpinAlphabet(tuple(range(1, q + 1)))
        U = 1.0 - 2.0 * np.eye(q)
        inter = Interaction(S, U, np.zeros(q), beta, name, {"q": q})
    elif name == "hardcore":
        lam = float(params.get("lam", params.get("lambda", 1.0)))
        if lam <= 0:
            raise ValueError("activity must be positive")
        S = SpinAlphabet((0, 1))
        U = np.array([[0.0, 0.0], [0.0, inf]])
        V = np.array([0.0, -math.log(lam)])
        inter = Interaction(S, U, V, 1.0, name, {"lam": lam})
    elif name == "widom_rowlinson":
        lam = params.get("lam")
        lp = float(params.get("lam_plus", lam if lam is not None else 1.0))
        lm = float(params.get("lam_minus", lam if lam is not None else lp))
        if lp <= 0 or lm <= 0:
            raise ValueError("activities must be positive")
        S = SpinAlphabet((-1, 0, 1))
        a = S.array
        U = np.where(np.outer(a, a) == -1, inf, 0.0)
        V = np.array([-math.log(lm), 0.0, -math.log(lp)])
        inter = Interaction(S, U, V, 1.0, name, {"lam_plus": lp, "lam_minus": lm})
    else:
        raise ValueError(f"unknown model {name!r}")
    return inter.alphabet, inter


def _bond_terms(inter: Interaction, idx: np.ndarray, bonds: np.ndarray,
                couplings: np.ndarray | None) -> np.ndarray:
    u = inter.U[idx[bonds[:, 0]], idx[bonds[:, 1]]]
    if couplings is not None:
        u = np.where(couplings == 0, 0.0, couplings * u)
    return u


def local_energy(g: Graph, inter: Interaction, sigma, region=None,
                 couplings: np.ndarray | None = None) -> float:
    """Energy of ``sigma`` counting bonds touching ``region`` and sites in it."""
    idx = inter.alphabet.index(sigma)
    inside = as_mask(g, region)
    _, touching = bond_sets(g, inside)
    J = None if couplings is None else np.asarray(couplings, float)[touching]
    e_bonds = _bond_terms(inter, idx, g.bonds[touching], J)
    return float(e_bonds.sum() + inter.V[idx[inside]].sum())


def relative_energy(g: Graph, inter: Interaction, sigma, eta, region,
                    couplings: np.ndarray | None = None) -> float:
    """H(sigma | eta) for ``sigma`` equal to ``eta`` off ``region``.

    Returns +inf when ``sigma`` violates a hard constraint and ``eta`` does
    not, and -inf in the reverse case.
    """
    sigma = np.asarray(sigma)
    eta = np.asarray(eta)
    inside = as_mask(g, region)
    if np.any(sigma[~inside] != eta[~inside]):
        raise ValueError("sigma and eta must agree off the region")
    hs = local_energy(g, inter, sigma, inside, couplings)
    he = local_energy(g, inter, eta, inside, couplings)
    if math.isinf(hs) and math.isinf(he):
        raise ValueError("both configurations violate hard constraints")
    if math.isinf(hs):
        return math.inf
    if math.isinf(he):
        return -math.inf
    return hs - he


def gibbs_weight(g: Graph, inter: Interaction, sigma, eta, region,
                 couplings: np.ndarray | None = None) -> float:
    """Log of exp[-beta H(sigma | eta)]; -inf for forbidden configurations."""
    h = relative_energy(g, inter, sigma, eta, region, couplings)
    if h == math.inf:
        return -math.inf
    if h == -math.inf:
        return math.inf
    return -inter.beta * h


def site_conditional(g: Graph, inter: Interaction, config, x: int,
                     couplings: np.ndarray | None = None) -> np.ndarray:
    """Single-site law at ``x`` given all other spins, as a probability vector."""
    idx = inter.alphabet.index(config)
    nb = g.neighbors[x]
    col = inter.U[:, idx[nb]]
    if couplings is not None:
        J = np.asarray(couplings, float)[g.incident[x]]
        col = np.where(J == 0, 0.0, col * J)
    energy = inter.V + col.sum(axis=1)
    return _normalise(-inter.beta * energy, energy, where=f"site {x}")


def _normalise(logw: np.ndarray, energy: np.ndarray, where: str = "") -> np.ndarray:
    logw = np.where(np.isinf(energy), -np.inf, logw)
    top = logw.max()
    if top == -np.inf:
        raise ValueError(f"empty conditional support at {where}")
    w = np.exp(logw - top)
    return w / w.sum()


def flip_odd_sublattice(g: Graph, sigma) -> np.ndarray:
    """Negate the spins on the odd class of a bipartite graph."""
    sigma = np.asarray(sigma)
    if not np.all(np.isin(sigma, (-1, 1))):
        raise ValueError("flip needs spins in {-1, +1}")
    color = bipartition(g)
    return np.where(color == 1, -sigma, sigma)


def absorb_self_potential(inter: Interaction, d: int) -> Interaction:
    """Move V into U via U'(a,b) = U(a,b) + (V(a)+V(b)) / (2d), V' = 0."""
    U = inter.U + (inter.V[:, None] + inter.V[None, :]) / (2 * d)
    return Interaction(inter.alphabet, U, np.zeros(len(inter.alphabet)),
                       inter.beta, inter.name + "+absorbed", dict(inter.params))
