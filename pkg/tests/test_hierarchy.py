import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from jumpattract.configurations import big_phi
from jumpattract.hierarchy import (ABSemigroup, BlowUpError, ClosureRule, CorrelationVector, DivergenceError,
                                   HorizonWarning, OrderError, ReducedEngine, TensorEngine, integrate,
                                   make_engine, norm_theta, picard_solve, theta_zero)
from jumpattract.kernels import KernelModel, TorusDomain, gaussian, stability_check


@pytest.fixture(scope="module")
def small():
    dom = TorusDomain(1, 8.0, 16)
    return KernelModel(dom, gaussian(1.0), gaussian(0.5), gaussian(1.0), check_resolution=False)


@pytest.fixture(scope="module")
def small_free():
    dom = TorusDomain(1, 8.0, 16)
    return KernelModel(dom, gaussian(1.0), check_resolution=False)


def random_symmetric_state(engine, rng, scale=0.5):
    k = engine.zeros()
    orders = [np.array(1.0)]
    for n in range(1, engine.max_order + 1):
        a = rng.random(k[n].shape) * scale**n
        if engine.layout == "full" and n > 1:
            a = sum(np.transpose(a, p) for p in __import__("itertools").permutations(range(n))) / math.factorial(n)
        elif engine.layout == "reduced" and n == 2:
            a = 0.5 * (a + engine.domain.reflect(a))
        orders.append(a)
    return CorrelationVector(orders, engine.layout)


# -- norm ------------------------------------------------------------------

def test_norm_examples():
    k = CorrelationVector.poisson(0.4, 2, "reduced", (16,))
    assert norm_theta(k, math.log(0.4)) == pytest.approx(1.0, abs=1e-15)
    assert norm_theta(k, math.log(0.4) + 0.7) == 1.0
    assert norm_theta(k.zeros_like(), 3.0) == 0.0
    assert theta_zero(k) == pytest.approx(math.log(0.4), abs=1e-11)


@given(rho=st.floats(0.01, 5.0), t1=st.floats(-5, 5), dt=st.floats(0, 3))
def test_norm_is_nonincreasing_in_theta(rho, t1, dt):
    k = CorrelationVector.poisson(rho, 2, "reduced", (8,))
    assert norm_theta(k, t1 + dt) <= norm_theta(k, t1)


# -- operator identities -----------------------------------------------------

@pytest.mark.parametrize("layout", ["reduced", "full"])
def test_free_constants(small_free, layout):
    eng = make_engine(small_free, 2, "zero-tail", layout)
    k = eng.poisson(0.5)
    for n in (1, 2):
        assert np.allclose(eng.apply_A(k, n), n * 0.5**n, atol=1e-12)
        assert np.allclose(eng.apply_B(k, n), -n * 0.5**n, atol=1e-12)
        assert np.allclose(eng.apply_B(k, n, 0.3) - eng.apply_B(k, n), -0.3 * n * k[n], atol=1e-15)
        assert not np.any(eng.apply_C(k, n)) and not np.any(eng.apply_D(k, n))
    assert eng.apply_A(k, 0) == 0 and eng.apply_B(k, 0) == 0
    assert eng.apply_L(k).max_abs() <= 1e-12


def test_A_on_constants_adds_attraction(small):
    eng = TensorEngine(small, 3, "zero-tail")
    rho = 0.6
    k = eng.poisson(rho)
    nodes = small.domain.positions
    for n in (1, 2, 3):
        a = eng.apply_A(k, n)
        expected = (n * eng.ma + eng.big_phi_plus(n)) * rho**n
        assert np.allclose(a, expected, atol=1e-12)
    # independent check of Phi_+ at grid configurations by pointwise phi evaluation
    rng = np.random.default_rng(0)
    for _ in range(10):
        idx = rng.integers(0, eng.p, 3)
        pairs = sum(small.phi_plus_grid[(idx[i] - idx[j]) % eng.p] for i in range(3) for j in range(3) if i != j)
        assert eng.big_phi_plus(3)[tuple(idx)] == pytest.approx(pairs, abs=1e-13)
        assert pairs == pytest.approx(big_phi(small, nodes[idx], "+"), abs=1e-6)


def test_C_and_D_on_constants(small):
    eng = TensorEngine(small, 3, "zero-tail")
    rho = 0.6
    k = eng.poisson(rho)
    masses = (small.kappa1_grid.sum() + small.kappa2_grid.sum()) * small.domain.cell_volume
    for n in (1, 2):
        c = eng.apply_C(k, n)
        d = eng.apply_D(k, n)
        assert np.allclose(c, n * rho ** (n + 1) * eng.ma * masses, atol=1e-12)
        assert np.allclose(c + d, 0.0, atol=1e-12)
    assert eng.apply_C(k, 0) == 0 and eng.apply_D(k, 0) == 0


def test_closure_required_at_top(small):
    eng = ReducedEngine(small, 2, None)
    k = eng.poisson(0.5)
    with pytest.raises(OrderError):
        eng.apply_C(k, 2)
    with pytest.raises(OrderError):
        eng.apply_A(k, 3)
    with pytest.raises(OrderError):
        ReducedEngine(small, 3)
    with pytest.raises(ValueError):
        ClosureRule("nearest")


def test_reduced_matches_tensor():
    for dom in (TorusDomain(1, 8.0, 16), TorusDomain(2, 8.0, 8)):
        m = KernelModel(dom, gaussian(1.0), gaussian(0.7), gaussian(1.2), check_resolution=False)
        rng = np.random.default_rng(3)
        g = rng.random(dom.shape)
        g = 0.5 * (g + dom.reflect(g))
        for closure in ("zero-tail", "mean-field"):
            for order in (1, 2):
                red = ReducedEngine(m, order, closure)
                full = TensorEngine(m, order, closure)
                kr = CorrelationVector([1.0, 0.7, g][: order + 1], "reduced")
                kf = CorrelationVector(full.homogeneous(0.7, g).orders[: order + 1], "full")
                lr, lf = red.apply_L(kr), full.apply_L(kf)
                assert np.allclose(lf[1], lr[1], atol=1e-12)
                if order == 2:
                    assert np.allclose(lf[2], full.homogeneous(0.0, lr[2])[2], atol=1e-12)


@pytest.mark.parametrize("layout,closure", [("reduced", "zero-tail"), ("reduced", "mean-field"),
                                            ("full", "mean-field")])
def test_poisson_fixed_point_when_rates_balance(layout, closure):
    dom = TorusDomain(1, 8.0, 16) if layout == "full" else TorusDomain(1, 20.0, 128)
    m = KernelModel(dom, gaussian(1.0), gaussian(0.7), gaussian(0.7), check_resolution=False)
    eng = make_engine(m, 2, closure, layout)
    rho = 0.8
    k = eng.poisson(rho)
    res = eng.apply_L(k)
    if closure == "zero-tail":
        # the top order loses its closure input, so only the lower orders balance
        assert abs(res[1]) <= 1e-8
    else:
        assert norm_theta(res, math.log(rho) + 1) <= 1e-8 * (1 + rho) ** 2


def test_order_zero_never_moves(small):
    eng = TensorEngine(small, 2, "mean-field")
    k = random_symmetric_state(eng, np.random.default_rng(1))
    assert eng.apply_L(k)[0] == 0


def test_order_locality(small):
    eng = TensorEngine(small, 3, "zero-tail")
    rng = np.random.default_rng(2)
    k = random_symmetric_state(eng, rng)
    base = eng.apply_L(k)
    bumped = k.copy()
    bumped.orders[3] = bumped.orders[3] + rng.random(bumped[3].shape)
    out = eng.apply_L(bumped)
    assert np.array_equal(out[1], base[1])
    bumped = k.copy()
    bumped.orders[1] = bumped.orders[1] + 1.0
    out = eng.apply_L(bumped)
    assert np.array_equal(out[2], base[2]) and np.array_equal(out[3], base[3])


@given(a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 1000))
def test_linearity_with_zero_tail(small, a, b, seed):
    eng = ReducedEngine(small, 2, "zero-tail")
    rng = np.random.default_rng(seed)
    k, h = random_symmetric_state(eng, rng), random_symmetric_state(eng, rng)
    lhs = eng.apply_L(k * a + h * b)
    rhs = eng.apply_L(k) * a + eng.apply_L(h) * b
    assert lhs.allclose(rhs, atol=1e-12 * (1 + abs(a) + abs(b)))


def test_symmetry_is_preserved(small):
    eng = TensorEngine(small, 3, "mean-field")
    k0 = random_symmetric_state(eng, np.random.default_rng(4))
    k = integrate(eng, k0, 0.05, 0.01).final
    assert np.abs(k[2] - k[2].T).max() <= 1e-10
    assert np.abs(k[3] - np.transpose(k[3], (1, 0, 2))).max() <= 1e-10
    assert np.abs(k[3] - np.transpose(k[3], (2, 1, 0))).max() <= 1e-10


def test_adjoint_pairing(small):
    eng = TensorEngine(small, 2, "zero-tail")
    rng = np.random.default_rng(5)
    k = random_symmetric_state(eng, rng)
    G = random_symmetric_state(eng, rng)
    w = eng.lebesgue_poisson_weights(0.0)
    for n in (1, 2):
        lhs = w[n] * np.sum(G[n] * eng.apply_A(k, n))
        rhs = w[n] * np.sum(eng.predual_A(G, n) * k[n])
        assert lhs == pytest.approx(rhs, rel=1e-12)


# -- integrators ---------------------------------------------------------------

def test_free_poisson_is_invariant(free_model):
    eng = ReducedEngine(free_model, 2, "zero-tail")
    traj = integrate(eng, eng.poisson(0.5), 1.0, 1e-3, record_every=100)
    dev = max(max(abs(float(s[1]) - 0.5), np.abs(s[2] - 0.25).max()) for s in traj.states)
    assert dev <= 1e-6


def test_rk4_is_fourth_order(small):
    eng = ReducedEngine(small, 2, "mean-field")
    k0 = random_symmetric_state(eng, np.random.default_rng(6))
    ref = integrate(eng, k0, 0.5, 0.0025).final
    e1 = norm_theta(integrate(eng, k0, 0.5, 0.05).final - ref, 0.0)
    e2 = norm_theta(integrate(eng, k0, 0.5, 0.025).final - ref, 0.0)
    assert 12 < e1 / e2 < 20


def test_zero_stays_zero(stable_model):
    eng = ReducedEngine(stable_model, 2, "zero-tail")
    zero = eng.zeros()
    assert integrate(eng, zero, 0.2, 0.01).final.max_abs() == 0.0
    assert picard_solve(eng, zero, 0.05, 3, omega=0.3, theta1=0.0, theta2=1.0, substeps=16).state.max_abs() == 0.0


def test_blow_up_is_reported(small):
    class Exploding(ReducedEngine):
        def apply_L(self, k):
            return k * 60.0

    eng = Exploding(small, 2)
    with pytest.raises(BlowUpError) as err:
        integrate(eng, eng.poisson(1.0), 2.0, 0.01)
    assert 0.4 < err.value.time < 0.5


def test_horizon_warning(stable_model):
    eng = ReducedEngine(stable_model, 2)
    k0 = eng.poisson(0.5)
    with pytest.warns(HorizonWarning):
        traj = integrate(eng, k0, 0.5, 0.01, theta_track=[math.log(0.5) + 1], omega=0.3)
    assert traj.warnings and np.isnan(traj.bounds[-1, 0])


def test_semigroup_paths_agree(stable_model):
    eng = ReducedEngine(stable_model, 2)
    k = random_symmetric_state(eng, np.random.default_rng(8))
    exact = ABSemigroup(eng, 0.3, 0.01)(k)
    stepped = ABSemigroup(eng, 0.3, 0.01, expm_limit=0)(k)
    assert exact.allclose(stepped, atol=1e-10)
    dense = expm(0.01 * eng.block_AB(2, 0.3)) @ k[2]
    assert np.allclose(exact[2], dense, atol=1e-14)


def test_picard_without_correction_is_free_flow(stable_model):
    eng = ReducedEngine(stable_model, 2)
    k0 = eng.poisson(0.5)
    res = picard_solve(eng, k0, 0.1, 0, omega=0.3, substeps=10)
    flow = ABSemigroup(eng, 0.3, 0.1)(k0)
    assert res.state.allclose(flow, atol=1e-12)
    assert res.iterates == 0


def test_picard_free_jumps_converge_at_once(free_model):
    eng = ReducedEngine(free_model, 2)
    res = picard_solve(eng, eng.poisson(0.5), 0.3, 4, substeps=16)
    assert res.iterates == 1 and res.differences[0] == 0.0
    assert np.allclose(res.state[2], 0.25, atol=1e-12)


def test_picard_matches_rk4(stable_model):
    omega = stability_check(stable_model).omega
    eng = ReducedEngine(stable_model, 2, "mean-field")
    k0 = eng.poisson(0.5)
    th0 = theta_zero(k0)
    T = (1.0) * math.exp(-(th0 + 1)) / (omega + 2 * stable_model.mean_b)
    res = picard_solve(eng, k0, 0.5 * T, 12, omega=omega)
    ref = integrate(eng, k0, 0.5 * T, 1e-3).final
    assert norm_theta(res.state - ref, th0 + 1) <= 1e-4
    d = res.differences
    assert np.all(np.diff(d[3:]) <= 0)
    c = d[0] / res.majorant[0]
    assert np.all(d <= c * res.majorant * (1 + 1e-9))


@pytest.mark.filterwarnings("ignore::jumpattract.hierarchy.HorizonWarning")
def test_picard_divergence_is_detected(small):
    eng = ReducedEngine(small, 2)
    with pytest.raises(DivergenceError):
        picard_solve(eng, eng.poisson(0.5), 1.0, 10, omega=40.0, substeps=32)


def test_picard_rejects_bad_ladder(small):
    eng = ReducedEngine(small, 2)
    with pytest.raises(ValueError):
        picard_solve(eng, eng.poisson(0.5), 0.1, 2, theta1=0.0, theta2=1.0, delta=2.0)
