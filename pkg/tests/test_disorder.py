import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rclattice.disorder import (
    CouplingField,
    DisorderLaw,
    bernoulli_observable,
    dilution_beta_bounds,
    disorder_bond_probs,
    fk_observable,
    quenched_experiment,
    sample_couplings,
)
from rclattice.lattice import build_box
from rclattice.sampler import make_rng


def test_dilution_extremes(box5, rng):
    assert np.all(sample_couplings(box5, DisorderLaw("dilution", p=1.0), rng).J == 1)
    assert np.all(sample_couplings(box5, DisorderLaw("dilution", p=0.0), rng).J == 0)


def test_gamma_mean(rng):
    J = DisorderLaw("gamma", a=2.0).sample(10**6, rng)
    assert abs(J.mean() - 2.0) < 3 * math.sqrt(2.0 / 10**6)


def test_law_validation():
    with pytest.raises(ValueError):
        DisorderLaw("dilution", p=1.5)
    with pytest.raises(ValueError):
        DisorderLaw("gamma", a=0.0)
    with pytest.raises(ValueError):
        DisorderLaw("table", values=(1.0, -1.0), probs=(0.5, 0.5))
    with pytest.raises(ValueError):
        DisorderLaw("cauchy")
    with pytest.raises(ValueError):
        CouplingField(build_box(1, 3), np.array([1.0, -0.5]))


def test_pbar_forms():
    beta = 0.8
    dil = DisorderLaw("dilution", p=0.9)
    assert dil.pbar(beta) == pytest.approx(0.9 * (1 - math.exp(-2 * beta)))
    gam = DisorderLaw("gamma", a=1.5)
    assert gam.pbar(beta) == pytest.approx(1 - (1 + 2 * beta) ** -1.5)
    # the closed form agrees with numerical integration of the same expectation
    assert gam.pbar(beta) == pytest.approx(gam._expect(lambda j: -math.expm1(-2 * beta * j)), rel=1e-8)
    for law in (dil, gam, DisorderLaw("table", values=(0.0, 2.0), probs=(0.3, 0.7))):
        assert law.pbar(0.0) == 0 and law.punder(0.0, 2.0) == 0
        assert law.punder(beta, 2.0) <= law.pbar(beta)


def test_bond_probs_from_field():
    g = build_box(2, 3)
    f = CouplingField(g, np.linspace(0, 1, g.n_bonds))
    bp = disorder_bond_probs(f, 0.5, 2.0)
    assert not bp.closed_form
    assert bp.p_b[0] == 0 and bp.p_b_prime[0] == 0
    assert bp.pbar == pytest.approx(bp.p_b.mean())
    with pytest.raises(ValueError):
        disorder_bond_probs(f, -1.0, 2.0)


def test_dilution_bounds_examples():
    lo, hi = dilution_beta_bounds(1.0, 2.0, 0.5)
    assert lo == pytest.approx(math.log(2)) and hi == pytest.approx(math.log(4))
    a, b = dilution_beta_bounds(0.8, 1.0, 0.5)
    assert a == pytest.approx(b)
    near = dilution_beta_bounds(0.5 + 1e-9, 2.0, 0.5)
    assert min(near) > 15
    with pytest.raises(ValueError):
        dilution_beta_bounds(0.4, 2.0, 0.5)


def test_fk_observable():
    g = build_box(2, 4)
    assert fk_observable(g, np.ones(g.n_bonds), "largest")[0] == 1
    inside = np.zeros(16, bool)
    inside[[5, 6, 9, 10]] = True
    assert fk_observable(g, np.zeros(g.n_bonds), "boundary", inside)[0] == 0
    assert fk_observable(g, np.ones(g.n_bonds), "boundary", inside)[0] == 1


def test_bernoulli_observable_extremes(rng):
    g = build_box(2, 6, "periodic")
    assert bernoulli_observable(g, 1.0, 5, rng, "largest")[0] == 1
    m, se = bernoulli_observable(g, 0.0, 5, rng, "largest")
    assert m == pytest.approx(1 / 36) and se == pytest.approx(0, abs=1e-15)


def test_quenched_zero_beta():
    g = build_box(2, 8, "periodic")
    s = quenched_experiment(g, DisorderLaw("dilution", p=0.9), 0.0, 2, 4, 40, make_rng(0), burn_in=5)
    assert s.mean == pytest.approx(1 / 64)
    mags = [r["magnetization"] for r in s.records]
    # largest colour fraction of 64 fair coins, rescaled; small but positive
    assert np.mean(mags) < 0.2


def test_quenched_records_and_seed(tmp_path):
    g = build_box(2, 6, "periodic")
    law = DisorderLaw("dilution", p=0.8)
    a = quenched_experiment(g, law, 0.7, 2, 3, 20, make_rng(1), burn_in=5, seed=11)
    b = quenched_experiment(g, law, 0.7, 2, 3, 20, make_rng(2), burn_in=5, seed=11)
    assert a.mean == b.mean
    assert len(a.records) == 3 and a.stderr >= 0
    a.to_jsonl(tmp_path / "q.jsonl")
    assert len((tmp_path / "q.jsonl").read_text().splitlines()) == 3


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 1.0), st.floats(0.0, 3.0), st.floats(1.0, 4.0))
def test_pbar_punder_ordering(p, beta, q):
    law = DisorderLaw("dilution", p=p)
    assert 0 <= law.punder(beta, q) <= law.pbar(beta) <= p


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 4.0), st.floats(0.0, 2.0))
def test_gamma_closed_form_matches_quadrature(a, beta):
    law = DisorderLaw("gamma", a=a)
    quad = law._expect(lambda j: -math.expm1(-2 * beta * j))
    assert law.pbar(beta) == pytest.approx(quad, abs=1e-7)


def test_descriptor_round_trip():
    for law in (DisorderLaw("dilution", p=0.3, value=2.0), DisorderLaw("gamma", a=3.0),
                DisorderLaw("table", values=(0.0, 1.0), probs=(0.25, 0.75))):
        assert DisorderLaw.from_descriptor(law.descriptor()) == law
