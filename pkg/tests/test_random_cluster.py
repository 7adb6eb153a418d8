import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rclattice.exact import exact_rc
from rclattice.lattice import build_box, build_custom
from rclattice.model import Interaction, SpinAlphabet, make_model
from rclattice.random_cluster import (
    RCParams,
    cyclic_table,
    exact_grey,
    grey_brute_check,
    grey_params,
    grey_weight,
    rc_conditional_edge,
    rc_heatbath_step,
    src_conditional_site,
)


def test_edge_conditional_cases():
    tri = build_custom(3, [(0, 1), (1, 2), (0, 2)])
    params = RCParams(0.4, 3.0)
    closed = np.zeros(3, np.uint8)
    assert rc_conditional_edge(tri, params, closed, 0) == pytest.approx(0.4 / (0.4 + 0.6 * 3))
    path_open = np.array([0, 1, 1], np.uint8)
    assert rc_conditional_edge(tri, params, path_open, 0) == 0.4
    q1 = RCParams(0.4, 1.0)
    assert rc_conditional_edge(tri, q1, closed, 0) == 0.4


def test_wired_exterior_joins():
    # two region vertices each tied to its own exterior vertex; the exterior is joined
    g = build_custom(4, [(0, 1), (0, 2), (1, 3)])
    params = RCParams(0.5, 2.0, "wired", (0, 1))
    eta = np.array([0, 1, 1], np.uint8)
    assert rc_conditional_edge(g, params, eta, 0) == 0.5
    pieces = RCParams(0.5, 2.0, "wired", (0, 1), exterior="pieces")
    assert rc_conditional_edge(g, pieces, eta, 0) == pytest.approx(0.5 / 1.5)


def test_heatbath_extremes(rng):
    g = build_box(2, 3)
    eta = np.zeros(g.n_bonds, np.uint8)
    assert rc_heatbath_step(g, RCParams(1.0, 2.0), eta, 3, rng)[3] == 1
    assert rc_heatbath_step(g, RCParams(0.0, 2.0), np.ones(g.n_bonds, np.uint8), 3, rng)[3] == 0


def test_site_conditional_cases():
    g = build_custom(2, [(0, 1)])
    assert src_conditional_site(g, 0.3, 2.0, np.array([0, 1]), 0) == pytest.approx(0.3)
    assert src_conditional_site(g, 0.3, 2.0, np.array([0, 0]), 0) == pytest.approx(0.6 / 1.3)
    star = build_custom(5, [(0, i) for i in range(1, 5)])
    p, q = 0.5, 2.0
    a = p * q ** (1 - 4)
    assert src_conditional_site(star, p, q, np.ones(5, np.uint8), 0) == pytest.approx(a / (a + 1 - p))


def test_grey_params_examples():
    beta = 0.7
    _, potts = make_model("potts", beta=beta, q=3)
    gp = grey_params(potts, shift=True)
    assert gp.R[gp.identity] == pytest.approx(math.exp(2 * beta) - 1)
    assert np.all(np.delete(gp.R, gp.identity) == 0)
    assert gp.p == pytest.approx(1 - math.exp(-2 * beta))
    assert gp.q == pytest.approx(3)
    S = SpinAlphabet((0, 1))
    z2 = Interaction(S, np.array([[-2.0, -1.0], [-1.0, -2.0]]), np.zeros(2), 1.0, "z2", {})
    gz = grey_params(z2, cyclic_table(2))
    e = math.e
    assert gz.R[0] == pytest.approx(e**2 - 1) and gz.R[1] == pytest.approx(e - 1)
    assert gz.p == pytest.approx((e**2 - 1) / e**2)
    assert gz.q == pytest.approx(2 * (e**2 - 1) / (e**2 + e - 2))
    flat = Interaction(S, np.zeros((2, 2)), np.zeros(2), 1.0, "flat", {})
    gf = grey_params(flat)
    assert np.all(gf.R == 0) and gf.p == 0


def test_grey_rejects_bad_input():
    _, potts = make_model("potts", q=3)
    with pytest.raises(ValueError):
        grey_params(potts)  # u > 0 off the identity
    with pytest.raises(ValueError):
        grey_params(potts, table=np.zeros((3, 3), int), shift=True)
    _, hc = make_model("hardcore")
    with pytest.raises(ValueError):
        grey_params(hc, shift=True)


def test_empty_omega_weight():
    g = build_box(2, 3)
    _, potts = make_model("potts", beta=0.5, q=3)
    w = grey_weight(g, potts, None, None, np.zeros(g.n_bonds))
    assert w == pytest.approx(9 * math.log(3))


def test_grey_factorised_equals_brute():
    g = build_box(2, 2)
    for q in (2, 3):
        _, potts = make_model("potts", beta=0.6, q=q)
        assert grey_brute_check(g, potts) < 1e-12
        eta = np.ones(4, int)
        assert grey_brute_check(g, potts, eta, [0, 1, 2]) < 1e-12


def test_grey_potts_is_rc():
    # for Potts the grey measure is the random-cluster measure itself
    g = build_box(2, 2)
    beta, q = 0.45, 3
    _, potts = make_model("potts", beta=beta, q=q)
    grey = exact_grey(g, potts)
    rc = exact_rc(g, 1 - math.exp(-2 * beta), q)
    assert np.abs(grey.full_vector() - rc.full_vector()).max() < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.5, 4.0), st.integers(0, 2**32 - 1))
def test_edge_conditional_matches_enumeration(p, q, seed):
    g = build_box(2, 2)
    d = exact_rc(g, p, q)
    vec = d.full_vector()
    eta = (np.random.default_rng(seed).random(g.n_bonds) < 0.5).astype(np.uint8)
    e = int(np.random.default_rng(seed + 1).integers(g.n_bonds))
    params = RCParams(p, q)
    code = lambda row: int("".join(map(str, row)), 2)
    r0, r1 = eta.copy(), eta.copy()
    r0[e], r1[e] = 0, 1
    emp = vec[code(r1)] / (vec[code(r0)] + vec[code(r1)])
    assert emp == pytest.approx(rc_conditional_edge(g, params, eta, e), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 2.0), st.integers(2, 4))
def test_potts_grey_parameters_property(beta, q):
    _, potts = make_model("potts", beta=beta, q=q)
    gp = grey_params(potts, shift=True)
    assert gp.p == pytest.approx(-math.expm1(-2 * beta))
    assert gp.q == pytest.approx(q)
