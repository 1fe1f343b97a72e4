"""Continuous-time kinetic Monte Carlo for jumps with attraction.

A particle at ``x`` jumps at total rate ``r(x) = m_a + sum_z phi_-(x, z)``
and lands at ``y`` with density ``a(x, y) (1 + sum_z b(x, y | z)) / r(x)``.
The landing density is a mixture: the free part and every kappa1 term
are ``alpha(y - x)``; each kappa2 term is ``alpha(y - x) kappa2(y - z)``
normalised by ``(alpha * kappa2)(x - z)``.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .configurations import pair_matrix
from .kernels import KernelModel, TorusDomain

__all__ = [
    "SimState",
    "CorrelationEstimate",
    "RunResult",
    "SamplingError",
    "jump_rate",
    "sample_destination",
    "initial_state",
    "step",
    "advance",
    "pair_histogram",
    "run",
    "rescaled_model",
    "finite_size_check",
]

log = logging.getLogger(__name__)

REFRESH_EVERY = 10_000
MIN_ACCEPTANCE = 1e-6


class SamplingError(RuntimeError):
    pass


@dataclass
class SimState:
    positions: NDArray
    rates: NDArray
    rng: np.random.Generator
    time: float = 0.0
    events: int = 0
    since_refresh: int = 0

    @property
    def n(self) -> int:
        return len(self.positions)

    @property
    def total_rate(self) -> float:
        return float(self.rates.sum())


def _require_factorized(model: KernelModel):
    if not model.factorized:
        raise ValueError("the simulator needs b(x,y|z) = kappa1(x-z) + kappa2(y-z)")


def all_rates(model: KernelModel, positions: NDArray) -> NDArray:
    if len(positions) == 0:
        return np.zeros(0)
    return model.mass_a + pair_matrix(model, positions, "-").sum(axis=1)


def jump_rate(model: KernelModel, config: NDArray, index: int) -> float:
    """Total jump rate of particle ``index`` of ``config``."""
    pts = np.asarray(config, dtype=float).reshape(-1, model.domain.dimension)
    others = np.delete(pts, index, axis=0)
    return float(model.mass_a + model.phi_at(pts[index] - others, "-").sum())


def _branch_weights(model: KernelModel, x: NDArray, others: NDArray):
    dom = model.domain
    disp = x - others
    w1 = model.mass_a * model.kappa1.evaluate(disp, dom)
    w2 = model.alpha_kappa2.evaluate(disp, dom)
    return w1, w2


def sample_destination(model: KernelModel, config: NDArray, index: int,
                       rng: np.random.Generator, size: int | None = None,
                       method: str = "auto", return_branch: bool = False):
    """Draw landing site(s) for a jump of particle ``index``.

    ``branch`` is -1 for the free part, else the index (into the other
    particles) of the particle whose ``b`` term produced the jump.
    ``method='rejection'`` forces the kappa2 rejection sampler; ``'auto'``
    samples Gaussian products directly.
    """
    _require_factorized(model)
    dom = model.domain
    pts = np.asarray(config, dtype=float).reshape(-1, dom.dimension)
    x = pts[index]
    others = np.delete(pts, index, axis=0)
    w1, w2 = _branch_weights(model, x, others)
    n_draw = 1 if size is None else size
    weights = np.concatenate([[model.mass_a], w1 + w2])
    cum = np.cumsum(weights)
    branch = np.searchsorted(cum, rng.uniform(0, cum[-1], n_draw), side="right") - 1
    branch = np.minimum(branch, len(weights) - 1)
    # inside a b branch: kappa1 part vs kappa2 part
    kappa2_part = np.zeros(n_draw, dtype=bool)
    in_b = branch >= 0
    if np.any(in_b):
        zb = branch[in_b]
        tot = w1[zb] + w2[zb]
        kappa2_part[in_b] = rng.uniform(0, 1, zb.size) * tot >= w1[zb]
    out = np.empty((n_draw, dom.dimension))
    plain = ~kappa2_part
    if np.any(plain):
        out[plain] = x + model.alpha.sample_offsets(rng, int(plain.sum()), dom)
    if np.any(kappa2_part):
        z_idx = branch[kappa2_part]
        out[kappa2_part] = _sample_kappa2(model, x, others[z_idx], w2[z_idx], rng, method)
    out = dom.wrap(out)
    if size is None:
        return (out[0], int(branch[0])) if return_branch else out[0]
    return (out, branch) if return_branch else out


def _sample_kappa2(model, x, zs, w2, rng, method):
    dom = model.domain
    a, k2 = model.alpha, model.kappa2
    if method == "auto" and a.family == "gaussian" and k2.family == "gaussian":
        return _gaussian_product(model, x, zs, rng)
    peak = k2.peak(dom)
    acc = w2 / (model.mass_a * peak)
    if np.any(acc < MIN_ACCEPTANCE):
        raise SamplingError(
            f"rejection acceptance {acc.min():.3g} below {MIN_ACCEPTANCE}; "
            "kappa2 envelope is too loose for this separation")
    out = np.empty((len(zs), dom.dimension))
    todo = np.arange(len(zs))
    while todo.size:
        y = x + a.sample_offsets(rng, todo.size, dom)
        keep = rng.uniform(0, 1, todo.size) * peak < k2.evaluate(y - zs[todo], dom)
        out[todo[keep]] = y[keep]
        todo = todo[~keep]
    return out


def _gaussian_product(model, x, zs, rng):
    """Exact draw from ``alpha(y - x) kappa2(y - z)`` for Gaussians on the torus."""
    dom = model.domain
    sa2, s22 = model.alpha.width**2, model.kappa2.width**2
    tot = sa2 + s22
    L = dom.length
    k = int(math.floor((7.5 * math.sqrt(tot) + L / 2) / L))
    images = np.arange(-k, k + 1) * L
    base = dom.min_image(zs - x)
    out = np.empty((len(zs), dom.dimension))
    for j, delta in enumerate(base):
        # pick the image of z relative to x, weight = Gaussian of summed variance
        shifts = np.stack(np.meshgrid(*[images] * dom.dimension, indexing="ij"), -1).reshape(-1, dom.dimension)
        rel = delta + shifts
        logw = -0.5 * (rel**2).sum(axis=1) / tot
        w = np.exp(logw - logw.max())
        pick = rel[rng.choice(len(rel), p=w / w.sum())]
        mean = x + pick * sa2 / tot
        out[j] = mean + rng.normal(0.0, math.sqrt(sa2 * s22 / tot), dom.dimension)
    return out


def initial_state(model: KernelModel, rng: np.random.Generator, density: float | None = None,
                  n_particles: int | None = None, kind: str = "poisson") -> SimState:
    """Homogeneous Poisson (random N) or binomial (fixed N) initial configuration."""
    dom = model.domain
    if kind == "poisson":
        if density is None:
            raise ValueError("a Poisson start needs a density")
        n = int(rng.poisson(density * dom.volume))
    elif kind == "binomial":
        n = n_particles if n_particles is not None else int(round(density * dom.volume))
    else:
        raise ValueError(f"unknown initial state kind {kind!r}")
    pos = rng.uniform(0.0, dom.length, (n, dom.dimension))
    return SimState(pos, all_rates(model, pos), rng)


def refresh_rates(model: KernelModel, state: SimState) -> float:
    """Recompute all rates; returns the largest drift of the incremental cache."""
    fresh = all_rates(model, state.positions)
    drift = float(np.abs(fresh - state.rates).max()) if state.n else 0.0
    state.rates = fresh
    state.since_refresh = 0
    return drift


def _apply_jump(model: KernelModel, state: SimState, i: int, y: NDArray):
    old = state.positions[i].copy()
    mask = np.ones(state.n, dtype=bool)
    mask[i] = False
    others = state.positions[mask]
    before = model.phi_at(others - old, "-")
    after = model.phi_at(others - y, "-")
    state.rates[mask] += after - before
    state.positions[i] = y
    state.rates[i] = model.mass_a + after.sum()
    state.events += 1
    state.since_refresh += 1
    if state.since_refresh >= REFRESH_EVERY:
        refresh_rates(model, state)


def step(model: KernelModel, state: SimState) -> SimState:
    """Advance ``state`` by one jump event (in place) and return it."""
    if state.n == 0:
        raise ValueError("no particles to move")
    total = state.total_rate
    state.time += state.rng.exponential(1.0 / total)
    i = _pick(state, total)
    y = sample_destination(model, state.positions, i, state.rng)
    _apply_jump(model, state, i, y)
    return state


def _pick(state: SimState, total: float) -> int:
    cum = np.cumsum(state.rates)
    i = int(np.searchsorted(cum, state.rng.uniform(0, total), side="right"))
    return min(i, state.n - 1)


def advance(model: KernelModel, state: SimState, t_target: float,
            max_events: int | None = None) -> bool:
    """Run events until ``t_target``; False if the event cap was hit first.

    The waiting time that overshoots ``t_target`` is discarded and the
    clock set to ``t_target``, which is exact by memorylessness.
    """
    while True:
        if state.n == 0:
            state.time = t_target
            return True
        total = state.total_rate
        dt = state.rng.exponential(1.0 / total)
        if state.time + dt > t_target:
            state.time = t_target
            return True
        if max_events is not None and state.events >= max_events:
            return False
        state.time += dt
        i = _pick(state, total)
        y = sample_destination(model, state.positions, i, state.rng)
        _apply_jump(model, state, i, y)


def pair_histogram(domain: TorusDomain, positions: NDArray, edges: NDArray) -> tuple[NDArray, int]:
    """Ordered-pair counts of min-image distances; returns (counts, overflow)."""
    n = len(positions)
    if n < 2:
        return np.zeros(len(edges) - 1, dtype=np.int64), 0
    disp = domain.min_image(positions[:, None, :] - positions[None, :, :])
    dist = np.sqrt((disp**2).sum(axis=-1))
    dist = dist[~np.eye(n, dtype=bool)]
    counts, _ = np.histogram(dist, bins=edges)
    return counts.astype(np.int64), int(n * (n - 1) - counts.sum())


def shell_volumes(domain: TorusDomain, edges: NDArray) -> NDArray:
    if domain.dimension == 1:
        return 2.0 * np.diff(edges)
    return math.pi * np.diff(edges**2)


@dataclass
class CorrelationEstimate:
    """Replica-averaged density and pair correlation ``k2(r)`` at one time."""

    time: float
    density: float
    density_se: float
    bin_edges: NDArray
    g: NDArray
    g_se: NDArray
    counts: NDArray
    overflow: int
    replicas: int

    @property
    def bin_left(self) -> NDArray:
        return self.bin_edges[:-1]

    @property
    def bin_centers(self) -> NDArray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])


@dataclass
class RunResult:
    estimates: list[CorrelationEstimate]
    events: list[int]
    partial: bool
    seed: int
    particles: list[int] = field(default_factory=list)

    def manifest(self) -> dict:
        return {"seed": self.seed, "events": self.events, "partial": self.partial,
                "particles": self.particles, "replicas": len(self.events)}


def _replica(args):
    model, seed_seq, density, n_particles, kind, times, edges, max_events = args
    rng = np.random.default_rng(seed_seq)
    state = initial_state(model, rng, density=density, n_particles=n_particles, kind=kind)
    dom = model.domain
    n0 = state.n
    dens, hists, overflows = [], [], []
    complete = True
    for t in times:
        if not advance(model, state, t, max_events):
            complete = False
            break
        if state.n != n0:
            raise AssertionError("particle number changed")
        dens.append(state.n / dom.volume)
        c, over = pair_histogram(dom, state.positions, edges)
        hists.append(c)
        overflows.append(over)
    return np.array(dens), np.array(hists).reshape(len(dens), len(edges) - 1), overflows, state.events, complete, n0


def run(model: KernelModel, t_end: float, replicas: int = 1, seed: int = 0,
        density: float | None = None, n_particles: int | None = None,
        sample_times: list[float] | None = None, initial: str = "poisson",
        bins: int = 32, r_max: float | None = None, max_events: int | None = 10_000_000,
        workers: int = 1) -> RunResult:
    """Independent replicas to ``t_end``, estimators aggregated at sample times."""
    _require_factorized(model)
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    if replicas < 1:
        raise ValueError("need at least one replica")
    times = sorted(sample_times) if sample_times else [t_end]
    if times[-1] > t_end:
        raise ValueError("sample times must not exceed t_end")
    dom = model.domain
    r_max = dom.length / 2 if r_max is None else r_max
    edges = np.linspace(0.0, r_max, bins + 1)
    seeds = np.random.SeedSequence(seed).spawn(replicas)
    jobs = [(model, s, density, n_particles, initial, times, edges, max_events) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outs = list(pool.map(_replica, jobs))
    else:
        outs = [_replica(j) for j in jobs]
    complete = all(o[4] for o in outs)
    n_times = min(len(o[0]) for o in outs)
    if not complete:
        log.warning("event cap reached; %d of %d sample times complete", n_times, len(times))
    shell = shell_volumes(dom, edges)
    estimates = []
    for k in range(n_times):
        dens = np.array([o[0][k] for o in outs])
        hist = np.array([o[1][k] for o in outs], dtype=float)
        g_rep = hist / (dom.volume * shell)
        se = lambda v: v.std(axis=0, ddof=1) / math.sqrt(len(v)) if len(v) > 1 else np.zeros_like(v[0])  # noqa: E731
        estimates.append(CorrelationEstimate(
            time=times[k], density=float(dens.mean()), density_se=float(se(dens)),
            bin_edges=edges, g=g_rep.mean(axis=0), g_se=se(g_rep),
            counts=hist.sum(axis=0).astype(np.int64),
            overflow=int(sum(o[2][k] for o in outs)), replicas=replicas))
    return RunResult(estimates, [int(o[3]) for o in outs], not complete, seed, [int(o[5]) for o in outs])


def rescaled_model(model: KernelModel, factor: int = 2) -> KernelModel:
    """Same kernels on a torus ``factor`` times larger (same grid spacing)."""
    dom = model.domain
    big = TorusDomain(dom.dimension, dom.length * factor, dom.resolution * factor)
    return KernelModel(big, model.alpha, model.kappa1, model.kappa2)


def finite_size_check(model: KernelModel, **run_kwargs) -> dict:
    """Run at ``L`` and ``2L``; flag density or ``k2`` gaps above 3 combined SE."""
    r_max = run_kwargs.pop("r_max", model.domain.length / 2)
    small = run(model, r_max=r_max, **run_kwargs)
    large = run(rescaled_model(model), r_max=r_max, **run_kwargs)
    flags = []
    for a, b in zip(small.estimates, large.estimates):
        gap = abs(a.density - b.density) / max(math.hypot(a.density_se, b.density_se), 1e-300)
        gz = np.abs(a.g - b.g) / np.maximum(np.hypot(a.g_se, b.g_se), 1e-300)
        flags.append({"time": a.time, "density_z": float(gap), "g_z_max": float(gz.max()),
                      "flagged": bool(gap > 3 or np.any(gz > 3))})
    return {"small": small, "large": large, "comparison": flags,
            "flagged": any(f["flagged"] for f in flags)}
