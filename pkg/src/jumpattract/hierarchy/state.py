"""Truncated correlation vectors ``(k^(0), ..., k^(N))`` and the weighted sup-norm."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

__all__ = ["CorrelationVector", "ClosureRule", "OrderError", "norm_theta", "theta_zero"]

LAYOUTS = ("reduced", "full")


class OrderError(ValueError):
    """Order outside the truncated chain, or no closure at the top order."""


@dataclass(frozen=True)
class ClosureRule:
    """How the order ``N+1`` input of C and D is produced at the top order.

    ``zero-tail`` drops it; ``mean-field`` uses
    ``k^(N+1)(eta ∪ z) = k^(N)(eta) k^(1)(z)``.
    """

    tag: str = "zero-tail"

    def __post_init__(self):
        if self.tag not in ("zero-tail", "mean-field"):
            raise ValueError(f"unknown closure {self.tag!r}")


class CorrelationVector:
    """Orders ``0..N`` of a correlation function on the grid.

    ``reduced`` layout (homogeneous states): order 1 is the scalar density,
    order 2 the separation table ``g(r)`` in FFT order. ``full`` layout:
    order ``n`` is an ``(P,)*n`` tensor over the ``P = M^d`` grid nodes.
    """

    __slots__ = ("orders", "layout")

    def __init__(self, orders: list[NDArray], layout: str):
        if layout not in LAYOUTS:
            raise ValueError(f"layout must be one of {LAYOUTS}")
        if len(orders) < 2:
            raise ValueError("need at least orders 0 and 1")
        self.orders = [np.asarray(o, dtype=float) for o in orders]
        self.layout = layout

    @property
    def max_order(self) -> int:
        return len(self.orders) - 1

    def __getitem__(self, n: int) -> NDArray:
        return self.orders[n]

    def copy(self) -> "CorrelationVector":
        return CorrelationVector([o.copy() for o in self.orders], self.layout)

    def _combine(self, other, op):
        if isinstance(other, CorrelationVector):
            return CorrelationVector([op(a, b) for a, b in zip(self.orders, other.orders)], self.layout)
        return CorrelationVector([op(a, other) for a in self.orders], self.layout)

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, scalar: float):
        return CorrelationVector([o * scalar for o in self.orders], self.layout)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def flatten(self) -> NDArray:
        return np.concatenate([o.ravel() for o in self.orders])

    def unflatten(self, flat: NDArray) -> "CorrelationVector":
        out, pos = [], 0
        for o in self.orders:
            out.append(np.asarray(flat[pos:pos + o.size]).reshape(o.shape))
            pos += o.size
        return CorrelationVector(out, self.layout)

    def zeros_like(self) -> "CorrelationVector":
        return CorrelationVector([np.zeros_like(o) for o in self.orders], self.layout)

    def max_abs(self) -> float:
        return max(float(np.abs(o).max()) for o in self.orders)

    def order_sup(self) -> NDArray:
        return np.array([float(np.abs(o).max()) for o in self.orders])

    def allclose(self, other: "CorrelationVector", atol: float) -> bool:
        return all(np.allclose(a, b, rtol=0, atol=atol) for a, b in zip(self.orders, other.orders))

    @classmethod
    def poisson(cls, density: float, max_order: int, layout: str, grid_shape: tuple[int, ...]):
        """``k^(n) = density^n`` (a homogeneous Poisson state)."""
        orders = [np.array(1.0)]
        if layout == "reduced":
            if max_order > 2:
                raise OrderError("reduced layout holds orders up to 2")
            orders.append(np.array(float(density)))
            if max_order == 2:
                orders.append(np.full(grid_shape, density**2))
        else:
            p = int(np.prod(grid_shape))
            for n in range(1, max_order + 1):
                orders.append(np.full((p,) * n, float(density) ** n))
        return cls(orders, layout)

    def __repr__(self):
        shapes = ", ".join(str(o.shape) for o in self.orders)
        return f"CorrelationVector(layout={self.layout!r}, shapes=[{shapes}])"


def norm_theta(k: CorrelationVector, theta: float) -> float:
    """``sup_n exp(-theta n) max_grid |k^(n)|``."""
    sups = k.order_sup()
    n = np.arange(len(sups))
    return float(np.max(np.exp(-theta * n) * sups))


def theta_zero(k: CorrelationVector, tol: float = 1e-12) -> float:
    """Least ``theta`` with ``norm_theta(k, theta) <= 1 + tol``, by bisection."""
    sups = k.order_sup()
    if abs(sups[0] - 1.0) > tol:
        raise ValueError(f"k^(0) must be 1, got {sups[0]}")
    if np.all(sups[1:] == 0):
        return -math.inf
    target = 1.0 + tol
    hi = 1.0
    while norm_theta(k, hi) > target:
        hi *= 2.0
    lo = hi - 1.0
    while norm_theta(k, lo) <= target:
        lo -= 2.0 * (hi - lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if norm_theta(k, mid) <= target:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-14 * max(1.0, abs(hi)):
            break
    return hi
