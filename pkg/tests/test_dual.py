import numpy as np
import pytest

from jumpattract.bounds import HorizonParams, operator_norm_bounds
from jumpattract.hierarchy import (TensorEngine, check_dissipativity, dissipativity_identity, dual_norm,
                                   flow_dual_norms, operator_norms, predual_block, random_test_vectors,
                                   weighted_norm)
from jumpattract.kernels import KernelModel, TorusDomain, gaussian, stability_check


@pytest.fixture(scope="module")
def stable_small():
    dom = TorusDomain(1, 8.0, 16)
    return KernelModel(dom, gaussian(1.0), gaussian(0.5), gaussian(1.0), check_resolution=False)


@pytest.fixture(scope="module")
def engine(stable_small):
    return TensorEngine(stable_small, 2, "zero-tail")


@pytest.fixture(scope="module")
def omega(stable_small):
    rep = stability_check(stable_small)
    assert rep.fourier_ok
    return rep.omega


@pytest.mark.parametrize("theta", [-1.0, 0.0, 1.5])
def test_random_vectors_are_dissipated(engine, omega, theta):
    worst = -np.inf
    for G in random_test_vectors(engine, 1000, rng=11, sparsity=0.2):
        worst = max(worst, check_dissipativity(engine, G, theta, omega))
    assert worst <= 1e-8


def test_identity_matches_direct_evaluation(engine, omega):
    for G in random_test_vectors(engine, 30, rng=2):
        direct = check_dissipativity(engine, G, 0.4, omega)
        assert direct == pytest.approx(dissipativity_identity(engine, G, 0.4, omega), rel=1e-10, abs=1e-12)


def test_without_omega_the_pair_can_gain(engine):
    """Clustered vectors sit where Phi_+ > Phi_-; the shift is what makes them dissipate."""
    gains = [check_dissipativity(engine, G, 0.0, 0.0) for G in random_test_vectors(engine, 60, rng=4)]
    assert max(gains) > 0


def test_first_order_is_conservative(engine):
    G = engine.zeros()
    G.orders[1] = np.random.default_rng(0).random(G[1].shape)
    assert abs(check_dissipativity(engine, G, 0.0, 0.0)) <= 1e-14


def test_negative_vectors_rejected(engine):
    G = engine.zeros()
    G.orders[1] = -np.ones(G[1].shape)
    with pytest.raises(ValueError):
        check_dissipativity(engine, G, 0.0, 0.0)


def test_reduced_engine_rejected(stable_small):
    from jumpattract.hierarchy import ReducedEngine
    eng = ReducedEngine(stable_small, 2)
    with pytest.raises(TypeError):
        check_dissipativity(eng, eng.zeros(), 0.0, 0.0)


def test_predual_block_is_transpose_of_forward(engine, omega):
    forward = engine.block_AB(2, omega)
    assert np.allclose(predual_block(engine, 2, omega), forward.T, atol=1e-13)


def test_flow_dual_norm_is_nonincreasing(engine, omega):
    times = np.linspace(0.05, 1.0, 20)
    for G in random_test_vectors(engine, 6, rng=7):
        norms = np.concatenate([[dual_norm(engine, G, 0.5)], flow_dual_norms(engine, G, 0.5, omega, times)])
        assert np.all(np.diff(norms) <= 1e-12 * norms[0])


def test_weighted_norm_matches_brute_force():
    rng = np.random.default_rng(1)
    m = rng.normal(size=(7, 7))
    orders = np.array([0, 1, 1, 2, 2, 2, 3])
    exact = weighted_norm(m, orders, 0.8, 0.3)
    # the sup is attained at a sign vector saturating the largest row
    best = 0.0
    scaled = np.exp(-0.8 * orders)[:, None] * m * np.exp(0.3 * orders)[None, :]
    for s in range(2**7):
        v = np.array([1.0 if s >> i & 1 else -1.0 for i in range(7)])
        best = max(best, np.abs(scaled @ v).max())
    assert exact == pytest.approx(best, rel=1e-14)


def test_measured_norms_within_bounds(stable_small, engine, omega):
    # mass of alpha is one, so the closed-form bounds apply to the discretised chain
    assert stable_small.mass_a_grid == pytest.approx(1.0, abs=1e-6)
    p = HorizonParams(theta0=0.0, theta=1.0, omega=omega, mean_b=stable_small.mean_b, sup_b=stable_small.sup_b)
    bound = operator_norm_bounds(p, 0.0).as_dict()
    measured = operator_norms(engine, 1.0, 0.0, omega)
    for name in ("L", "C", "D"):
        assert 0 < measured[name] <= bound[name]


def test_worst_case_over_all_nonnegative_vectors(engine, omega):
    """The functional is linear in G >= 0, so its sign is set by the largest rate entry."""
    for n in (1, 2):
        rate = engine.big_phi_plus(n) - engine.big_phi_minus(n) - omega * n
        assert rate.max() <= 1e-8
    rate = engine.big_phi_plus(2) - engine.big_phi_minus(2)
    assert rate.max() > 0.1
