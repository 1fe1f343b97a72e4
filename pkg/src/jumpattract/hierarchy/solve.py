"""Time integration of the truncated hierarchy: RK4 and iterated Duhamel."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import expm

from .engines import Engine
from .state import CorrelationVector, norm_theta, theta_zero

__all__ = ["BlowUpError", "DivergenceError", "HorizonWarning", "Trajectory", "integrate",
           "ABSemigroup", "PicardResult", "picard_solve", "BLOWUP_LEVEL"]

BLOWUP_LEVEL = 1e12


class BlowUpError(RuntimeError):
    def __init__(self, time: float):
        super().__init__(f"correlation values exceeded {BLOWUP_LEVEL:g} at t = {time:.6g}")
        self.time = time


class DivergenceError(RuntimeError):
    """Successive Picard differences grew for three consecutive iterates."""


class HorizonWarning(UserWarning):
    pass


def _horizon(theta, theta0, omega, mean_b):
    denom = omega + 2.0 * mean_b
    if theta <= theta0 or denom <= 0:
        return math.inf if denom <= 0 else 0.0
    return (theta - theta0) * math.exp(-theta) / denom


@dataclass
class Trajectory:
    times: NDArray
    states: list[CorrelationVector]
    thetas: NDArray
    norms: NDArray            # (len(times), len(thetas))
    bounds: NDArray           # T/(T - t) * ||k0||_theta0, nan past the horizon
    theta0: float
    horizons: NDArray
    warnings: list[str] = field(default_factory=list)

    @property
    def final(self) -> CorrelationVector:
        return self.states[-1]


def _rk4_step(f, k, h):
    s1 = f(k)
    s2 = f(k + s1 * (0.5 * h))
    s3 = f(k + s2 * (0.5 * h))
    s4 = f(k + s3 * h)
    return k + (s1 + s2 * 2.0 + s3 * 2.0 + s4) * (h / 6.0)


def integrate(engine: Engine, k0: CorrelationVector, t_end: float, dt: float,
              theta_track=(), omega: float = 0.0, record_every: int = 1,
              keep_states: bool = True) -> Trajectory:
    """Classical RK4 on ``dk/dt = L k`` with uniform steps of at most ``dt``.

    Weighted norms are recorded for every ``theta`` in ``theta_track`` at the
    output times, together with the envelope ``T/(T - t) ||k0||_theta0``.
    Integrating past a tracked horizon only warns.
    """
    if dt <= 0 or t_end < 0:
        raise ValueError("need dt > 0 and t_end >= 0")
    thetas = np.atleast_1d(np.asarray(theta_track, dtype=float))
    mean_b = engine.model.mean_b
    theta0 = theta_zero(k0) if np.any(k0.flatten()[1:]) else -math.inf
    horizons = np.array([_horizon(th, theta0, omega, mean_b) for th in thetas])
    notes = []
    for th, T in zip(thetas, horizons):
        if t_end > T:
            msg = f"t_end = {t_end:.6g} exceeds the horizon T({th:.6g}, {theta0:.6g}) = {T:.6g}"
            notes.append(msg)
            warnings.warn(msg, HorizonWarning, stacklevel=2)
    n_steps = max(1, math.ceil(t_end / dt - 1e-9)) if t_end > 0 else 0
    h = t_end / n_steps if n_steps else 0.0
    k0_norm = norm_theta(k0, theta0) if np.isfinite(theta0) else 0.0

    times, states, norms = [], [], []

    def record(t, k):
        times.append(t)
        if keep_states or not states:
            states.append(k)
        else:
            states[-1] = k
        norms.append([norm_theta(k, th) for th in thetas])

    k = k0.copy()
    record(0.0, k)
    for step in range(1, n_steps + 1):
        k = _rk4_step(engine.apply_L, k, h)
        t = step * h
        peak = k.max_abs()
        if not np.isfinite(peak) or peak > BLOWUP_LEVEL:
            raise BlowUpError(t)
        if step % record_every == 0 or step == n_steps:
            record(t, k)
    times = np.array(times)
    bounds = np.full((len(times), len(thetas)), np.nan)
    for j, T in enumerate(horizons):
        inside = times < T
        bounds[inside, j] = T / (T - times[inside]) * k0_norm if np.isfinite(T) else k0_norm
    return Trajectory(times, states, thetas, np.array(norms).reshape(len(times), len(thetas)),
                      bounds, theta0, horizons, notes)


class ABSemigroup:
    """``exp(s (A + B^omega))`` for one fixed step ``s``.

    ``A + B`` never mixes orders, so each order gets its own block: a dense
    matrix exponential when the block has at most ``expm_limit`` entries,
    otherwise ten RK4 sub-steps.
    """

    def __init__(self, engine: Engine, omega: float, step: float, expm_limit: int = 10**6):
        self.engine = engine
        self.omega = omega
        self.step = step
        self.blocks: dict[int, NDArray | None] = {}
        for n in range(1, engine.max_order + 1):
            size = engine.order_size(n)
            self.blocks[n] = expm(step * engine.block_AB(n, omega)) if size * size <= expm_limit else None

    def _rk4_order(self, k, n):
        sub = self.step / 10.0

        def f(v):
            w = k.zeros_like()
            w.orders[n] = v
            return self.engine.apply_A(w, n) + self.engine.apply_B(w, n, self.omega)

        v = k[n]
        for _ in range(10):
            s1 = f(v)
            s2 = f(v + 0.5 * sub * s1)
            s3 = f(v + 0.5 * sub * s2)
            s4 = f(v + sub * s3)
            v = v + sub / 6.0 * (s1 + 2 * s2 + 2 * s3 + s4)
        return v

    def __call__(self, k: CorrelationVector) -> CorrelationVector:
        out = [k[0].copy()]
        for n in range(1, self.engine.max_order + 1):
            mat = self.blocks[n]
            if mat is None:
                out.append(self._rk4_order(k, n))
            else:
                out.append((mat @ k[n].ravel()).reshape(k[n].shape))
        return CorrelationVector(out, k.layout)


@dataclass
class PicardResult:
    state: CorrelationVector
    iterates: int
    differences: NDArray      # ||k^i_t - k^(i-1)_t||_theta for i = 1..n_terms
    majorant: NDArray         # (1/i!)(i/e)^i (t/T_delta)^i
    theta: float
    t_delta: float
    converged: bool


def picard_solve(engine: Engine, k0: CorrelationVector, t: float, n_terms: int,
                 omega: float = 0.0, theta: float | None = None, delta: float | None = None,
                 theta1: float | None = None, theta2: float | None = None,
                 substeps: int = 256, tol: float = 0.0, expm_limit: int = 10**6) -> PicardResult:
    """Iterated Duhamel formula split as ``(A + B^omega) + (C^omega + D)``.

    Iterate ``i`` solves ``k' = (A + B^omega) k + (C^omega + D) k^(i-1)``; the
    integral over the past is the trapezoid rule on ``substeps`` equal steps.
    ``theta1``/``theta2`` default to ``theta0(k0)`` and ``theta0 + 1``;
    ``theta`` (the norm scale) defaults to ``theta2`` and ``delta`` to a tenth
    of ``theta - theta1``. Stops early once a difference falls below ``tol``.
    """
    if n_terms < 0:
        raise ValueError("n_terms must be nonnegative")
    if t < 0:
        raise ValueError("t must be nonnegative")
    t1 = theta_zero(k0) if theta1 is None else theta1
    if not np.isfinite(t1):
        t1 = 0.0
    t2 = t1 + 1.0 if theta2 is None else theta2
    th = t2 if theta is None else theta
    dl = 0.1 * (th - t1) if delta is None else delta
    if not (t1 < th <= t2 and 0 < dl < th - t1):
        raise ValueError("need theta1 < theta <= theta2 and 0 < delta < theta - theta1")
    denom = omega + 2.0 * engine.model.mean_b
    t_delta = (th - t1 - dl) * math.exp(-t2) / denom if denom > 0 else math.inf
    horizon = _horizon(t2, t1, omega, engine.model.mean_b)
    if t >= horizon:
        warnings.warn(f"t = {t:.6g} is past the horizon {horizon:.6g}", HorizonWarning, stacklevel=2)

    m = max(1, substeps)
    step = t / m
    sg = ABSemigroup(engine, omega, step, expm_limit)

    free = [k0.copy()]
    for _ in range(m):
        free.append(sg(free[-1]))
    current = free
    diffs, growth = [], 0
    for i in range(1, n_terms + 1):
        forcing = [engine.apply_CD(k, omega) for k in current]
        acc = k0.zeros_like()
        nxt = [free[0]]
        for j in range(1, m + 1):
            acc = sg(acc) + (sg(forcing[j - 1]) + forcing[j]) * (0.5 * step)
            nxt.append(free[j] + acc)
        diffs.append(norm_theta(nxt[-1] - current[-1], th))
        current = nxt
        if len(diffs) >= 2 and diffs[-1] > diffs[-2]:
            growth += 1
            if growth >= 3:
                raise DivergenceError(f"Picard differences grew three times in a row (last {diffs[-1]:.3g})")
        else:
            growth = 0
        if diffs[-1] <= tol:
            break
        if not np.isfinite(diffs[-1]) or current[-1].max_abs() > BLOWUP_LEVEL:
            raise BlowUpError(t)
    n = np.arange(1, len(diffs) + 1)
    ratio = t / t_delta if np.isfinite(t_delta) else 0.0
    majorant = np.array([math.exp(i * math.log(i / math.e) - math.lgamma(i + 1)) * ratio**i for i in n])
    return PicardResult(current[-1], len(diffs), np.array(diffs), majorant, th, t_delta,
                        bool(diffs and diffs[-1] <= max(tol, 0.0)))
