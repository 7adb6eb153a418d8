import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rclattice.exact import FiniteDistribution, bernoulli_product, exact_gibbs, exact_rc, tv_distance
from rclattice.lattice import build_box, build_custom
from rclattice.model import make_model
from rclattice.random_cluster import RCParams
from rclattice.sampler import (
    CFTPFailure,
    ChainState,
    MeasurementSeries,
    cftp,
    cftp_ising,
    heat_bath_batch,
    heat_bath_sweep,
    integrated_autocorr,
    magnetization,
    make_rng,
    measure,
    sw_batch,
    sweeny_batch,
    sweeny_sweep,
    swendsen_wang_sweep,
)

from conftest import block


def empirical(rows, like: FiniteDistribution) -> FiniteDistribution:
    u, c = np.unique(rows, axis=0, return_counts=True)
    return FiniteDistribution.from_probs(u, c / len(rows), like.labels, like.values)


def test_rng_streams_reproducible():
    a = make_rng(7, 1, 2).random(5)
    assert np.array_equal(a, make_rng(7, 1, 2).random(5))
    assert not np.array_equal(a, make_rng(7, 1, 3).random(5))


def test_heat_bath_zero_beta_uniform():
    g = build_box(2, 3)
    _, potts = make_model("potts", beta=0.0, q=3)
    X = heat_bath_batch(g, potts, None, None, 30000, 1, make_rng(0))
    freq = np.bincount(X.ravel(), minlength=4)[1:] / X.size
    assert np.all(np.abs(freq - 1 / 3) < 0.01)


def test_heat_bath_matches_exact_small():
    g = build_box(2, 2)
    _, ising = make_model("ising", beta=0.5, h=0.2)
    mu = exact_gibbs(g, ising)
    X = heat_bath_batch(g, ising, None, None, 200_000, 15, make_rng(1))
    assert tv_distance(empirical(X, mu), mu) < 0.01


def test_heat_bath_hardcore_respects_constraint():
    g = build_box(2, 4)
    _, hc = make_model("hardcore", lam=3.0)
    X = heat_bath_batch(g, hc, None, None, 500, 10, make_rng(2))
    assert not np.any(X[:, g.bonds[:, 0]] & X[:, g.bonds[:, 1]])


def test_heat_bath_reports_dead_site():
    from rclattice.model import Interaction, SpinAlphabet
    g = build_custom(3, [(0, 1), (1, 2)])
    rigid = Interaction(SpinAlphabet((-1, 1)), np.array([[0.0, np.inf], [np.inf, 0.0]]),
                        np.zeros(2), 1.0, "rigid", {})
    with pytest.raises(ValueError, match="site 1"):
        heat_bath_batch(g, rigid, [1], np.array([1, 1, -1]), 4, 1, make_rng(0))


def test_single_chain_sweep():
    g = build_box(2, 3)
    _, ising = make_model("ising", beta=0.3)
    st0 = ChainState(g, np.ones(9, int), ising)
    st1 = heat_bath_sweep(st0, make_rng(3))
    assert st1.sweeps == 1 and st0.sweeps == 0
    assert set(np.unique(st1.config)) <= {-1, 1}


def test_sw_zero_beta_and_boundary():
    g = build_box(2, 4)
    vals = np.array([1, 2, 3])
    sig = sw_batch(g, vals, 0.0, None, None, np.ones((20000, 16), int), 1, make_rng(4))
    freq = np.bincount(sig.ravel(), minlength=4)[1:] / sig.size
    assert np.all(np.abs(freq - 1 / 3) < 0.01)
    inside = np.zeros(16, bool)
    inside[block(g, range(1, 3), range(1, 3))] = True
    eta = np.full(16, 2)
    start = np.tile(eta, (50, 1))
    out = sw_batch(g, vals, 0.7, inside, eta, start, 5, make_rng(5))
    assert np.all(out[:, ~inside] == 2)


def test_sw_matches_exact_with_boundary():
    g = build_box(2, 4)
    inside = np.zeros(16, bool)
    inside[block(g, range(1, 3), range(1, 3))] = True
    eta = np.ones(16, int)
    _, ising = make_model("ising", beta=0.4)
    mu = exact_gibbs(g, ising, inside, eta)
    sig = sw_batch(g, ising.alphabet.array, 0.4, inside, eta, np.tile(eta, (100_000, 1)), 10, make_rng(6))
    sites = np.array(mu.labels)
    assert tv_distance(empirical(sig[:, sites], mu), mu) < 0.01


def test_sw_rejects_field():
    g = build_box(2, 3)
    _, ising = make_model("ising", beta=0.4, h=0.2)
    with pytest.raises(ValueError):
        swendsen_wang_sweep(ChainState(g, np.ones(9, int), ising), make_rng(0))


def test_sweeny_special_cases():
    g = build_box(2, 2)
    X = sweeny_batch(g, RCParams(1.0, 2.0), 10, 40, make_rng(7))
    assert X.all()
    d = bernoulli_product(0.3, tuple(range(g.n_bonds)))
    Y = sweeny_batch(g, RCParams(0.3, 1.0), 50_000, 20, make_rng(8))
    assert tv_distance(empirical(Y, d), d) < 0.01
    one = sweeny_sweep(ChainState(g, np.zeros(4, np.uint8), rc=RCParams(0.5, 2.0)), make_rng(9))
    assert one.sweeps == 1


def test_sweeny_matches_exact_rc():
    g = build_custom(3, [(0, 1), (1, 2), (0, 2)])
    params = RCParams(0.5, 3.0)
    d = exact_rc(g, 0.5, 3.0)
    Y = sweeny_batch(g, params, 100_000, 10, make_rng(10))
    assert tv_distance(empirical(Y, d), d) < 0.01


def test_cftp_examples():
    g = build_custom(2, [(0, 1)])
    beta = 0.6
    X = cftp_ising(g, [1], 0.0, beta, np.array([1, 1]), 40_000, make_rng(11))
    assert np.all(X[:, 0] == 1)
    p_plus = 1 / (1 + math.exp(-2 * beta))
    assert abs((X[:, 1] == 1).mean() - p_plus) < 4 * math.sqrt(p_plus * (1 - p_plus) / 40_000)
    g3 = build_box(2, 3)
    _, free = make_model("ising", beta=0.0)
    Z = cftp(g3, free, None, None, 1000, make_rng(12), max_sweeps=1, scan="systematic")
    assert Z.shape == (1000, 9)


def test_cftp_fails_loudly():
    g = build_box(2, 6)
    _, cold = make_model("ising", beta=3.0)
    with pytest.raises(CFTPFailure):
        cftp(g, cold, None, None, 5, make_rng(13), max_sweeps=4)


def test_cftp_matches_exact_small():
    g = build_box(2, 4)
    inside = np.zeros(16, bool)
    inside[block(g, range(1, 3), range(1, 3))] = True
    eta = np.ones(16, int)
    _, ising = make_model("ising", beta=0.5, h=-0.1)
    mu = exact_gibbs(g, ising, inside, eta)
    X = cftp(g, ising, inside, eta, 50_000, make_rng(14))
    sites = np.array(mu.labels)
    assert tv_distance(empirical(X[:, sites], mu), mu) < 0.015


def test_measurement_helpers(tmp_path):
    assert magnetization(np.ones((3, 5))).tolist() == [1.0, 1.0, 1.0]
    s = MeasurementSeries(["c"], {"c": np.full(100, 2.0)})
    assert s.variance("c") == 0 and s.stderr("c") == 0
    s.to_csv(tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().startswith("sweep,c")
    rec = measure(iter(range(20)), {"x": float}, 20, burn_in=5, thin=5)
    assert rec.values["x"].tolist() == [5.0, 10.0, 15.0]


def test_autocorrelation_time():
    rng = make_rng(15)
    assert integrated_autocorr(rng.normal(size=20000)) == pytest.approx(0.5, abs=0.1)
    # AR(1) with coefficient a has tau = (1 + a) / (2 (1 - a))
    a, n = 0.8, 200_000
    e = rng.normal(size=n)
    x = np.empty(n)
    x[0] = 0
    for i in range(1, n):
        x[i] = a * x[i - 1] + e[i]
    assert integrated_autocorr(x) == pytest.approx((1 + a) / (2 * (1 - a)), rel=0.15)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from(["random", "systematic"]))
def test_cftp_sandwich_holds_for_any_seed(seed, scan):
    g = build_box(2, 3)
    _, ising = make_model("ising", beta=0.7, h=0.1)
    X = cftp(g, ising, None, None, 20, make_rng(seed), check_sandwich=True, scan=scan)
    assert set(np.unique(X)) <= {-1, 1}


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_batch_runs_are_deterministic(seed):
    g = build_box(2, 3)
    _, potts = make_model("potts", beta=0.5, q=3)
    a = heat_bath_batch(g, potts, None, None, 8, 3, make_rng(seed))
    b = heat_bath_batch(g, potts, None, None, 8, 3, make_rng(seed))
    assert np.array_equal(a, b)
