"""Closed-form horizons, norm envelopes, operator-norm bounds and the ladder."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import NDArray
from scipy.special import gammaln

__all__ = ["HorizonParams", "horizon", "optimal", "q_norm_bound", "operator_norm_bounds",
           "OperatorBounds", "ladder", "majorant_terms", "EnvelopeReport", "envelope_check",
           "ENVELOPE_SLACK"]

# engineering tolerance for truncation effects in envelope_check
ENVELOPE_SLACK = 0.05


@dataclass(frozen=True)
class HorizonParams:
    theta0: float
    theta: float
    omega: float = 0.0
    mean_b: float = 0.0
    sup_b: float = 0.0

    def __post_init__(self):
        if self.omega < 0 or self.mean_b < 0 or self.sup_b < 0:
            raise ValueError("omega, <b> and sup b must be nonnegative")
        if not math.isfinite(self.omega):
            raise ValueError("omega must be finite (the model is not stable)")
        if self.omega + 2.0 * self.mean_b <= 0:
            raise ValueError("omega + 2<b> must be positive")
        if not self.theta > self.theta0:
            raise ValueError(f"theta = {self.theta} must exceed theta0 = {self.theta0}")

    @property
    def rate(self) -> float:
        return self.omega + 2.0 * self.mean_b

    def with_theta(self, theta: float) -> "HorizonParams":
        return replace(self, theta=theta)


def horizon(p: HorizonParams) -> float:
    """``T(theta, theta0) = (theta - theta0) e^(-theta) / (omega + 2<b>)``."""
    return (p.theta - p.theta0) * math.exp(-p.theta) / p.rate


def optimal(theta0: float, omega: float, mean_b: float) -> tuple[float, float]:
    """Maximiser ``theta* = theta0 + 1`` of the horizon and ``tau = T(theta*, theta0)``."""
    rate = omega + 2.0 * mean_b
    if rate <= 0:
        raise ValueError("omega + 2<b> must be positive")
    return theta0 + 1.0, math.exp(-theta0) / (math.e * rate)


def q_norm_bound(t: float, T: float) -> float:
    if not 0 <= t < T:
        raise ValueError(f"need 0 <= t < T, got t={t}, T={T}")
    return T / (T - t)


@dataclass(frozen=True)
class OperatorBounds:
    L: float
    C: float
    D: float

    def as_dict(self) -> dict[str, float]:
        return {"L": self.L, "C": self.C, "D": self.D}


def operator_norm_bounds(p: HorizonParams, theta_pp: float) -> OperatorBounds:
    """Bounds on ``L, C^omega, D : K_theta'' -> K_theta`` (needs theta'' < theta)."""
    gap = p.theta - theta_pp
    if gap <= 0:
        raise ValueError("theta'' must be smaller than theta")
    e = math.e
    big_l = 2.0 * ((1.0 + p.mean_b) / (e * gap) + 4.0 * p.sup_b / (e * e * gap * gap))
    c = (p.omega + p.mean_b) * math.exp(p.theta) / (e * gap)
    d = p.mean_b * math.exp(p.theta) / (e * gap)
    return OperatorBounds(big_l, c, d)


def ladder(theta1: float, theta: float, l: int, delta: float) -> NDArray:
    """Scales ``theta^0 < ... < theta^(2l+1)`` interleaving gaps of ``delta/(l+1)`` and ``eps``."""
    if l < 1 or int(l) != l:
        raise ValueError("l must be a positive integer")
    if not 0 < delta < theta - theta1:
        raise ValueError("need 0 < delta < theta - theta1")
    eps = (theta - theta1 - delta) / l
    out = np.empty(2 * l + 2)
    for s in range(l + 1):
        out[2 * s] = theta1 + s / (l + 1) * delta + s * eps
        out[2 * s + 1] = theta1 + (s + 1) / (l + 1) * delta + s * eps
    out[0], out[-1] = theta1, theta
    return out


def majorant_terms(T: float, T_delta: float, n_max: int) -> NDArray:
    """``(1/n!) (n/e)^n (T/T_delta)^n`` for ``n = 1..n_max``, in log space."""
    if not 0 < T < T_delta:
        raise ValueError("need 0 < T < T_delta")
    n = np.arange(1, n_max + 1, dtype=float)
    return np.exp(n * (np.log(n) - 1.0 + math.log(T / T_delta)) - gammaln(n + 1.0))


@dataclass
class EnvelopeReport:
    max_ratio: float
    ratios: NDArray
    times: NDArray
    horizon: float
    slack: float
    flow_nonincreasing: bool | None
    status: str

    def as_dict(self) -> dict:
        return {"max_ratio": self.max_ratio, "horizon": self.horizon, "slack": self.slack,
                "flow_nonincreasing": self.flow_nonincreasing, "status": self.status,
                "note": "slack is an engineering allowance for truncation at finite order"}


def envelope_check(times: NDArray, norms: NDArray, k0_norm: float, p: HorizonParams,
                   flow_norms: NDArray | None = None, slack: float = ENVELOPE_SLACK) -> EnvelopeReport:
    """Compare ``||k_t||_theta`` with ``T/(T - t) ||k0||_theta0``.

    ``flow_norms`` are optional dual norms of the A+B flow; they must not
    increase. Status is ``pass`` or ``flag``.
    """
    times = np.asarray(times, dtype=float)
    norms = np.asarray(norms, dtype=float)
    T = horizon(p)
    if np.any(times > 0.9 * T + 1e-15):
        raise ValueError("sample times must stay within 0.9 T")
    env = np.array([q_norm_bound(t, T) for t in times]) * k0_norm
    ratios = np.where(env > 0, norms / np.where(env > 0, env, 1.0), 0.0)
    max_ratio = float(ratios.max()) if ratios.size else 0.0
    flow_ok = None
    if flow_norms is not None:
        fn = np.asarray(flow_norms, dtype=float)
        flow_ok = bool(np.all(np.diff(fn) <= 1e-12 * max(1.0, float(np.abs(fn).max()))))
    ok = max_ratio <= 1.0 + slack and flow_ok is not False
    return EnvelopeReport(max_ratio, ratios, times, T, slack, flow_ok, "pass" if ok else "flag")
