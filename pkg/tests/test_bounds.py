import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from jumpattract.bounds import (ENVELOPE_SLACK, HorizonParams, envelope_check, horizon, ladder, majorant_terms,
                                operator_norm_bounds, optimal, q_norm_bound)
from jumpattract.hierarchy import ReducedEngine, integrate, norm_theta, theta_zero


def test_horizon_value():
    p = HorizonParams(theta0=0.0, theta=1.0, omega=0.0, mean_b=0.5)
    assert horizon(p) == pytest.approx(math.exp(-1), abs=1e-12)


def test_horizon_vanishes_at_theta0():
    p = HorizonParams(0.0, 1e-9, 0.0, 0.5)
    assert horizon(p) < 1e-8


@given(theta0=st.floats(-3, 3), omega=st.floats(0, 5), mean_b=st.floats(0.01, 5))
def test_horizon_argmax(theta0, omega, mean_b):
    grid = theta0 + np.linspace(1e-6, 5, 5_000_001)
    vals = (grid - theta0) * np.exp(-grid) / (omega + 2 * mean_b)
    step = grid[1] - grid[0]
    assert abs(grid[np.argmax(vals)] - (theta0 + 1)) <= step
    star, tau = optimal(theta0, omega, mean_b)
    assert star == theta0 + 1
    assert tau == pytest.approx(horizon(HorizonParams(theta0, star, omega, mean_b)), rel=1e-14)


def test_tau_example_and_decay():
    assert optimal(0.0, 0.0, 0.5)[1] == pytest.approx(0.36787944117144233, abs=1e-15)
    taus = [optimal(t, 0.3, 1.0)[1] for t in np.linspace(-2, 30, 200)]
    assert np.all(np.diff(taus) < 0) and taus[-1] < 1e-13


@pytest.mark.parametrize("kwargs", [dict(theta0=0.0, theta=0.0), dict(theta0=0.0, theta=1.0, omega=-1.0),
                                    dict(theta0=0.0, theta=1.0, mean_b=0.0, omega=0.0),
                                    dict(theta0=0.0, theta=1.0, omega=math.inf)])
def test_invalid_params(kwargs):
    with pytest.raises(ValueError):
        HorizonParams(**kwargs)


def test_q_norm_bound():
    assert q_norm_bound(0.0, 2.0) == 1.0
    assert q_norm_bound(1.0, 2.0) == 2.0
    vals = [q_norm_bound(t, 1.0) for t in np.linspace(0, 0.999, 500)]
    assert np.all(np.diff(vals) > 0)
    with pytest.raises(ValueError):
        q_norm_bound(1.0, 1.0)


def test_operator_norm_bounds():
    p = HorizonParams(0.0, 1.0, omega=0.0, mean_b=0.5, sup_b=1.0)
    b = operator_norm_bounds(p, 0.0)
    e = math.e
    assert b.L == pytest.approx(2 * (1.5 / e + 4 / e**2), rel=1e-14)
    assert b.L == pytest.approx(2.1863205894072286, rel=1e-14)
    assert b.C == b.D
    assert operator_norm_bounds(HorizonParams(0.0, 1.0, 0.2, 0.5, 1.0), 0.0).C > b.D
    with pytest.raises(ValueError):
        operator_norm_bounds(p, 1.0)


def test_ladder_example():
    assert np.allclose(ladder(0.0, 1.0, 1, 0.5), [0.0, 0.25, 0.75, 1.0], atol=1e-15)
    for bad in ((0.0, 1.0, 0, 0.5), (0.0, 1.0, 1, 1.0), (0.0, 1.0, 1, 0.0)):
        with pytest.raises(ValueError):
            ladder(*bad)


def test_ladder_random_sets():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        t1 = rng.uniform(-5, 5)
        th = t1 + rng.uniform(1e-3, 5)
        delta = rng.uniform(1e-6, 1 - 1e-6) * (th - t1)
        l = int(rng.integers(1, 40))
        lad = ladder(t1, th, l, delta)
        assert lad.size == 2 * l + 2 and lad[0] == t1 and lad[-1] == th
        assert np.all(np.diff(lad) > 0)


def test_majorant_values():
    terms = majorant_terms(0.5, 1.0, 50)
    assert terms[0] == pytest.approx(0.5 / math.e, rel=1e-14)
    direct = (10 / math.e) ** 10 * 0.5**10 / math.factorial(10)
    assert terms[9] == pytest.approx(direct, rel=1e-12)
    assert terms[9] == pytest.approx(1.2218e-4, rel=1e-3)
    ratios = terms[1:] / terms[:-1]
    assert abs(ratios[-1] - 0.5) < 0.01
    # ratio = q (1 + 1/n)^n / e climbs to q from below
    assert np.all(np.diff(ratios) > 0) and np.all(ratios < 0.5)
    with pytest.raises(ValueError):
        majorant_terms(1.0, 1.0, 5)


@given(q=st.floats(0.01, 0.9))
def test_majorant_tail_is_geometric(q):
    terms = majorant_terms(q, 1.0, 2000)
    tail = terms[200:].sum()
    assert tail <= terms[199] * q / (1 - q) * (1 + 1e-9)


@given(q=st.floats(0.01, 0.85))
def test_majorant_tail_is_small(q):
    assert majorant_terms(q, 1.0, 2000)[200:].sum() < 1e-12


def test_envelope_free_poisson(free_model):
    eng = ReducedEngine(free_model, 2)
    k0 = eng.poisson(0.5)
    th0 = theta_zero(k0)
    p = HorizonParams(th0, th0 + 1, 0.0, 0.5)
    T = horizon(p)
    traj = integrate(eng, k0, 0.9 * T, T / 200)
    norms = [norm_theta(s, p.theta) for s in traj.states]
    rep = envelope_check(traj.times, norms, norm_theta(k0, th0), p)
    assert rep.status == "pass" and rep.max_ratio <= 1.0
    assert rep.ratios[0] <= 1.0
    assert rep.slack == ENVELOPE_SLACK


def test_envelope_flags_growth():
    p = HorizonParams(0.0, 1.0, 0.0, 0.5)
    T = horizon(p)
    rep = envelope_check([0.0, 0.5 * T], [1.0, 2.5], 1.0, p)
    assert rep.status == "flag" and rep.max_ratio == pytest.approx(1.25)
    rep = envelope_check([0.0, 0.1], [1.0, 1.0], 1.0, p, flow_norms=[1.0, 1.1])
    assert rep.status == "flag" and rep.flow_nonincreasing is False
    with pytest.raises(ValueError):
        envelope_check([T], [1.0], 1.0, p)
