import math

import numpy as np
import pytest
from scipy import integrate, stats

from jumpattract.configurations import big_phi
from jumpattract.kernels import KernelModel, TorusDomain, gaussian, tophat, zero_profile
from jumpattract.simulator import (SamplingError, _sample_kappa2, advance, all_rates, finite_size_check,
                                   initial_state, jump_rate, pair_histogram, refresh_rates, run,
                                   sample_destination, shell_volumes, step)


def gauss(r, var):
    return np.exp(-r * r / (2 * var)) / math.sqrt(2 * math.pi * var)


def test_free_rates_are_one(free_model, rng):
    pts = rng.uniform(0, 20, (7, 1))
    assert all(jump_rate(free_model, pts, i) == 1.0 for i in range(7))
    assert jump_rate(free_model, pts[:1], 0) == 1.0


def test_two_particle_rate_by_quadrature(stable_model):
    x, z = 3.0, 4.1
    pts = np.array([[x], [z]])

    def density(y):
        return gauss(y - x, 1.0) * (1 + gauss(x - z, 0.25) + gauss(y - z, 1.0))

    direct, _ = integrate.quad(density, x - 12, x + 12, epsabs=1e-13, points=[x, z])
    assert jump_rate(stable_model, pts, 0) == pytest.approx(direct, abs=1e-6)
    phi = stable_model.phi_at(np.array([x - z]), "-")
    assert jump_rate(stable_model, pts, 0) == pytest.approx(1 + phi, abs=1e-12)


def test_free_destinations_follow_alpha(free_model, rng):
    x = np.array([[5.0]])
    y = sample_destination(free_model, x, 0, rng, size=100_000)
    off = free_model.domain.min_image(y - x)[:, 0]
    assert stats.kstest(off, "norm").pvalue > 0.01


@pytest.mark.parametrize("method", ["auto", "rejection"])
def test_kappa2_branch_is_gaussian_product(line, rng, method):
    model = KernelModel(line, gaussian(1.0), zero_profile(), gaussian(1.0))
    x = 6.0
    pts = np.array([[x], [x]])
    y, branch = sample_destination(model, pts, 0, rng, size=200_000, method=method, return_branch=True)
    off = line.min_image(y[branch >= 0] - x)[:, 0]
    n = off.size
    var = 0.5  # (1/sigma_a^2 + 1/sigma_2^2)^-1
    assert abs(off.mean()) <= 3 * math.sqrt(var / n)
    assert abs(off.var() - var) <= 3 * var * math.sqrt(2 / n)


def test_branch_frequencies(stable_model, rng):
    pts = np.array([[2.0], [2.5], [3.4], [9.0]])
    n = 100_000
    _, branch = sample_destination(stable_model, pts, 0, rng, size=n, return_branch=True)
    weights = np.concatenate([[1.0], stable_model.phi_at(pts[0] - pts[1:], "-")])
    p = weights / weights.sum()
    freq = np.array([(branch == b).sum() for b in range(-1, 3)]) / n
    assert np.all(np.abs(freq - p) <= 3 * np.sqrt(p * (1 - p) / n) + 1e-12)


@pytest.mark.parametrize("method", ["auto", "rejection"])
def test_one_event_law_for_two_particles(method):
    """Total variation between sampled and exact landing law on 64 bins."""
    dom = TorusDomain(1, 8.0, 64)
    model = KernelModel(dom, gaussian(0.8), gaussian(0.4), gaussian(0.9), check_resolution=False)
    rng = np.random.default_rng(7)
    x, z = 1.0, 2.2
    y = sample_destination(model, np.array([[x], [z]]), 0, rng, size=1_000_000, method=method)
    edges = np.linspace(0, 8.0, 65)
    counts, _ = np.histogram(y[:, 0], bins=edges)

    def density(t):
        d = np.array([[t - x]])
        a = model.alpha.evaluate(d, dom)
        b = model.kappa1.evaluate(np.array([[x - z]]), dom) + model.kappa2.evaluate(np.array([[t - z]]), dom)
        return float((a * (1 + b))[0])

    exact = np.array([integrate.quad(density, lo, hi, epsabs=1e-12)[0] for lo, hi in zip(edges[:-1], edges[1:])])
    exact /= exact.sum()
    tv = 0.5 * np.abs(counts / counts.sum() - exact).sum()
    assert tv < 0.01


def test_total_rate_for_free_and_pair(free_model, stable_model, rng):
    st = initial_state(free_model, rng, n_particles=9, kind="binomial")
    assert st.total_rate == pytest.approx(9.0, abs=1e-12)
    pts = np.array([[1.0], [2.7]])
    rates = all_rates(stable_model, pts)
    phi = stable_model.phi_at(np.array([1.7]), "-")
    assert rates.sum() == pytest.approx(2 + 2 * phi, abs=1e-12)


def test_bookkeeping_after_every_event(stable_model):
    rng = np.random.default_rng(11)
    st = initial_state(stable_model, rng, density=0.5)
    n0 = st.n
    for _ in range(400):
        step(stable_model, st)
        assert st.n == n0
        fresh = all_rates(stable_model, st.positions)
        assert np.abs(fresh - st.rates).max() <= 1e-9
        identity = n0 * stable_model.mass_a + big_phi(stable_model, st.positions, "-")
        assert st.total_rate == pytest.approx(identity, abs=1e-9)
    assert refresh_rates(stable_model, st) <= 1e-9


def test_identical_seeds_identical_trajectories(stable_model):
    a = initial_state(stable_model, np.random.default_rng(5), density=0.4)
    b = initial_state(stable_model, np.random.default_rng(5), density=0.4)
    advance(stable_model, a, 0.7)
    advance(stable_model, b, 0.7)
    assert a.events == b.events and np.array_equal(a.positions, b.positions)
    ra = run(stable_model, 0.3, replicas=4, seed=9, density=0.3, bins=8)
    rb = run(stable_model, 0.3, replicas=4, seed=9, density=0.3, bins=8)
    assert np.array_equal(ra.estimates[0].g, rb.estimates[0].g) and ra.events == rb.events


def test_advance_respects_event_cap(stable_model):
    st = initial_state(stable_model, np.random.default_rng(1), density=0.5)
    assert advance(stable_model, st, 100.0, max_events=50) is False
    assert st.events == 50
    res = run(stable_model, 5.0, replicas=2, seed=1, density=0.5, max_events=20)
    assert res.partial


def test_histogram_counts_all_ordered_pairs(line, rng):
    pts = rng.uniform(0, 20, (30, 1))
    counts, over = pair_histogram(line, pts, np.linspace(0, 6, 13))
    assert counts.sum() + over == 30 * 29


def test_shell_volumes():
    d1 = TorusDomain(1, 10.0, 16)
    d2 = TorusDomain(2, 10.0, 16)
    edges = np.array([0.0, 1.0, 2.0])
    assert np.allclose(shell_volumes(d1, edges), [2.0, 2.0])
    assert np.allclose(shell_volumes(d2, edges), [math.pi, 3 * math.pi])


def test_free_jumps_keep_poisson_statistics():
    dom = TorusDomain(1, 50.0, 256)
    model = KernelModel(dom, gaussian(1.0))
    res = run(model, 1.0, replicas=64, seed=0, density=0.5, sample_times=[0.5, 1.0], bins=10, r_max=5.0)
    for est in res.estimates:
        assert abs(est.density - 0.5) <= 3 * est.density_se
        assert np.all(np.abs(est.g - 0.25) <= 3 * est.g_se)


def test_free_jumps_in_two_dimensions():
    dom = TorusDomain(2, 12.0, 32)
    model = KernelModel(dom, tophat(1.0))
    res = run(model, 0.5, replicas=32, seed=2, density=0.5, bins=6, r_max=3.0)
    est = res.estimates[0]
    assert abs(est.density - 0.5) <= 3 * est.density_se
    assert np.mean(np.abs(est.g - 0.25) <= 3 * est.g_se) >= 5 / 6


def test_rejection_gives_up_on_hopeless_envelope(line, rng):
    model = KernelModel(line, gaussian(0.5), zero_profile(), gaussian(0.05), check_resolution=False)
    zs = np.array([[9.0]])
    w2 = model.alpha_kappa2.evaluate(np.array([[-9.0]]), line)
    with pytest.raises(SamplingError):
        _sample_kappa2(model, np.array([0.0]), zs, w2, rng, "rejection")


def test_parallel_replicas_match_serial(stable_model):
    serial = run(stable_model, 0.2, replicas=3, seed=4, density=0.3, bins=5)
    pooled = run(stable_model, 0.2, replicas=3, seed=4, density=0.3, bins=5, workers=2)
    assert np.array_equal(serial.estimates[0].g, pooled.estimates[0].g)


def test_finite_size_report(stable_model):
    rep = finite_size_check(stable_model, t_end=0.2, replicas=8, seed=3, density=0.3, bins=4, r_max=4.0)
    assert set(rep) == {"small", "large", "comparison", "flagged"}
    assert rep["comparison"][0]["time"] == 0.2
