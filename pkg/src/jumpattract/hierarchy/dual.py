"""Predual side of the hierarchy and measured operator norms on the grid."""
from __future__ import annotations

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import expm

from .engines import Engine, TensorEngine
from .state import CorrelationVector

__all__ = ["check_dissipativity", "dissipativity_identity", "random_test_vectors",
           "predual_block", "dual_norm", "flow_dual_norms", "operator_norms", "weighted_norm"]


def _require_full(engine: Engine) -> TensorEngine:
    if not isinstance(engine, TensorEngine):
        raise TypeError("predual computations need the full-tensor engine")
    return engine


def check_dissipativity(engine: Engine, G: CorrelationVector, theta: float, omega: float) -> float:
    """``sum_n h^(dn) e^(theta n)/n! sum_grid (A-hat G + B-hat^omega G)``; should be <= 0."""
    eng = _require_full(engine)
    if any(np.any(o < 0) for o in G.orders):
        raise ValueError("test vector must be nonnegative")
    w = eng.lebesgue_poisson_weights(theta)
    total = 0.0
    for n in range(1, eng.max_order + 1):
        total += w[n] * float(np.sum(eng.predual_A(G, n) + eng.predual_B(G, n, omega)))
    return total


def dissipativity_identity(engine: Engine, G: CorrelationVector, theta: float, omega: float) -> float:
    """Same functional rewritten as ``sum w_n sum (Phi_+ - Phi_- - omega n) G``."""
    eng = _require_full(engine)
    w = eng.lebesgue_poisson_weights(theta)
    total = 0.0
    for n in range(1, eng.max_order + 1):
        rate = eng.big_phi_plus(n) - eng.big_phi_minus(n) - omega * n
        total += w[n] * float(np.sum(rate * G[n]))
    return total


def random_test_vectors(engine: Engine, count: int, rng=None, sparsity: float = 0.0):
    """Nonnegative random test vectors; a mix of dense, sparse and clustered ones."""
    eng = _require_full(engine)
    rng = np.random.default_rng(rng)
    base = eng.zeros()
    for i in range(count):
        orders = [np.array(rng.random())]
        for n in range(1, eng.max_order + 1):
            shape = base[n].shape
            kind = i % 3
            if kind == 0:
                g = rng.exponential(size=shape)
            elif kind == 1:
                g = rng.random(shape) * (rng.random(shape) < max(sparsity, 0.05))
            else:
                g = np.zeros(shape)
                centre = rng.integers(eng.p)
                g[(centre,) * n] = 1.0 + rng.random()
                g += 1e-3 * rng.random(shape)
            orders.append(g)
        yield CorrelationVector(orders, eng.layout)


def predual_block(engine: Engine, n: int, omega: float) -> NDArray:
    """Dense matrix of ``A-hat + B-hat^omega`` on order ``n``."""
    eng = _require_full(engine)
    base = eng.zeros()
    size = base[n].size
    mat = np.empty((size, size))
    for col in range(size):
        e = base.copy()
        e.orders[n].reshape(-1)[col] = 1.0
        mat[:, col] = (eng.predual_A(e, n) + eng.predual_B(e, n, omega)).ravel()
    return mat


def dual_norm(engine: Engine, G: CorrelationVector, theta: float) -> float:
    """Discrete predual norm ``sum_n h^(dn) e^(theta n)/n! sum_grid |G|``."""
    eng = _require_full(engine)
    w = eng.lebesgue_poisson_weights(theta)
    return float(sum(w[n] * np.abs(G[n]).sum() for n in range(eng.max_order + 1)))


def flow_dual_norms(engine: Engine, G: CorrelationVector, theta: float, omega: float,
                    times: NDArray) -> NDArray:
    """Dual norms of ``exp(t (A-hat + B-hat^omega)) G`` at increasing ``times``."""
    eng = _require_full(engine)
    times = np.asarray(times, dtype=float)
    steps = np.diff(np.concatenate([[0.0], times]))
    blocks = {n: predual_block(eng, n, omega) for n in range(1, eng.max_order + 1)}
    cur = G.copy()
    out = []
    for dt in steps:
        orders = [cur[0]]
        for n in range(1, eng.max_order + 1):
            orders.append((expm(dt * blocks[n]) @ cur[n].ravel()).reshape(cur[n].shape))
        cur = CorrelationVector(orders, cur.layout)
        out.append(dual_norm(eng, cur, theta))
    return np.array(out)


def weighted_norm(matrix: NDArray, orders: NDArray, theta: float, theta_pp: float) -> float:
    """Exact ``K_theta'' -> K_theta`` norm of a matrix acting on flat vectors.

    For the weighted sup-norms this is the largest row sum of
    ``e^(-theta n_row) |M| e^(theta'' n_col)``.
    """
    rows = np.exp(-theta * orders)
    cols = np.exp(theta_pp * orders)
    return float(np.max(rows * (np.abs(matrix) @ cols)))


def operator_norms(engine: Engine, theta: float, theta_pp: float, omega: float = 0.0) -> dict[str, float]:
    """Measured norms of ``L``, ``C^omega`` and ``D`` from ``K_theta''`` to ``K_theta``."""
    orders = engine.flat_orders()
    return {name: weighted_norm(engine.dense(op, omega), orders, theta, theta_pp)
            for name, op in (("L", "L"), ("C", "C"), ("D", "D"))}
