"""Grid realisations of the hierarchy generator ``L = A + B + C + D``.

Two engines share one interface:

* :class:`ReducedEngine` -- homogeneous states, orders up to 2, any
  dimension; every integral is an FFT convolution over separations.
* :class:`TensorEngine` -- arbitrary (inhomogeneous) states stored as dense
  tensors over the ``P = M^d`` grid nodes; every integral is an explicit
  quadrature. Meant for small grids, where it is the oracle for the reduced
  engine and carries the predual (dissipativity) computations.

Integrals use the grid rule ``sum_x h^d f(x)``; the rate tables
``phi_+/-`` are built with the same rule, so the discrete identities
(e.g. ``C + D = 0`` at order 1) hold to roundoff.
"""
from __future__ import annotations


import numpy as np
from numpy.typing import NDArray

from ..kernels import KernelModel
from .state import ClosureRule, CorrelationVector, OrderError

__all__ = ["Engine", "ReducedEngine", "TensorEngine", "make_engine",
           "apply_A", "apply_B", "apply_C", "apply_D", "apply_L"]


class Engine:
    layout: str

    def __init__(self, model: KernelModel, max_order: int, closure: ClosureRule | str | None = "zero-tail"):
        if not model.factorized:
            raise ValueError("hierarchy engines need the factorised form of b")
        if max_order < 1:
            raise OrderError("max_order must be at least 1")
        self.model = model
        self.domain = model.domain
        self.max_order = max_order
        if isinstance(closure, str):
            closure = ClosureRule(closure)
        self.closure = closure
        self.dv = self.domain.cell_volume
        self.ma = model.mass_a_grid

    # -- helpers -----------------------------------------------------------
    def _check(self, k: CorrelationVector, n: int):
        if k.layout != self.layout:
            raise ValueError(f"{self.layout} engine got a {k.layout} vector")
        if k.max_order != self.max_order:
            raise OrderError(f"vector has order {k.max_order}, engine expects {self.max_order}")
        if not 0 <= n <= self.max_order:
            raise OrderError(f"order {n} outside 0..{self.max_order}")

    def _closure_tag(self, n: int) -> str | None:
        """None when order ``n + 1`` is stored, else the closure tag."""
        if n < self.max_order:
            return None
        if self.closure is None:
            raise OrderError(f"order {n} needs order {n + 1}; no closure rule given")
        return self.closure.tag

    # -- interface ---------------------------------------------------------
    def apply_A(self, k, n):
        raise NotImplementedError

    def apply_B(self, k, n, omega=None):
        raise NotImplementedError

    def apply_C(self, k, n, omega=None):
        raise NotImplementedError

    def apply_D(self, k, n):
        raise NotImplementedError

    def zeros(self) -> CorrelationVector:
        raise NotImplementedError

    def poisson(self, density: float) -> CorrelationVector:
        raise NotImplementedError

    def apply_L(self, k: CorrelationVector) -> CorrelationVector:
        """``dk/dt`` at every order; order 0 is identically zero."""
        out = [np.zeros_like(k[0])]
        for n in range(1, self.max_order + 1):
            out.append(self.apply_A(k, n) + self.apply_B(k, n) + self.apply_C(k, n) + self.apply_D(k, n))
        return CorrelationVector(out, self.layout)

    def apply_AB(self, k: CorrelationVector, omega: float = 0.0) -> CorrelationVector:
        out = [np.zeros_like(k[0])]
        for n in range(1, self.max_order + 1):
            out.append(self.apply_A(k, n) + self.apply_B(k, n, omega))
        return CorrelationVector(out, self.layout)

    def apply_CD(self, k: CorrelationVector, omega: float = 0.0) -> CorrelationVector:
        out = [np.zeros_like(k[0])]
        for n in range(1, self.max_order + 1):
            out.append(self.apply_C(k, n, omega) + self.apply_D(k, n))
        return CorrelationVector(out, self.layout)

    def order_size(self, n: int) -> int:
        return self.zeros()[n].size

    def block_AB(self, n: int, omega: float = 0.0) -> NDArray:
        """Dense matrix of ``A + B^omega`` on order ``n`` (it does not mix orders)."""
        base = self.zeros()
        size = base[n].size
        mat = np.empty((size, size))
        for col in range(size):
            e = base.copy()
            e.orders[n].reshape(-1)[col] = 1.0
            mat[:, col] = (self.apply_A(e, n) + self.apply_B(e, n, omega)).ravel()
        return mat

    def dense(self, which: str = "L", omega: float = 0.0) -> NDArray:
        """Dense matrix of ``L``, ``AB``, ``C`` (with omega) or ``D`` on the flat vector."""
        base = self.zeros()
        flat = base.flatten()
        mat = np.empty((flat.size, flat.size))
        for col in range(flat.size):
            v = np.zeros(flat.size)
            v[col] = 1.0
            mat[:, col] = self._apply_named(base.unflatten(v), which, omega).flatten()
        return mat

    def _apply_named(self, k, which, omega):
        if which == "L":
            return self.apply_L(k)
        if which == "AB":
            return self.apply_AB(k, omega)
        out = [np.zeros_like(k[0])]
        for n in range(1, self.max_order + 1):
            if which == "C":
                out.append(self.apply_C(k, n, omega))
            elif which == "D":
                out.append(self.apply_D(k, n))
            elif which == "A":
                out.append(self.apply_A(k, n))
            elif which == "B":
                out.append(self.apply_B(k, n, omega))
            else:
                raise ValueError(f"unknown operator {which!r}")
        return CorrelationVector(out, self.layout)

    def flat_orders(self) -> NDArray:
        """Order label of every entry of the flat vector."""
        base = self.zeros()
        return np.concatenate([np.full(o.size, n) for n, o in enumerate(base.orders)])


class ReducedEngine(Engine):
    """Homogeneous states: ``k1 = rho`` and ``k2(x, y) = g(x - y)``."""

    layout = "reduced"

    def __init__(self, model, max_order=2, closure="zero-tail"):
        if max_order > 2:
            raise OrderError("the reduced engine stores orders up to 2; use TensorEngine")
        super().__init__(model, max_order, closure)
        dom = self.domain
        self.alpha = model.alpha_grid
        self.k1 = model.kappa1_grid
        self.k2 = model.kappa2_grid
        self.pm = model.phi_minus_grid
        self.pm_pair = self.pm + dom.reflect(self.pm)
        self.pm_mass = float(self.pm.sum() * self.dv)
        self.mean_b = float((self.k1.sum() + self.k2.sum()) * self.dv)

    def _conv(self, f):
        return self.domain.convolve(self.alpha, f, symmetric=False)

    def zeros(self):
        orders = [np.array(0.0), np.array(0.0)]
        if self.max_order == 2:
            orders.append(np.zeros(self.domain.shape))
        return CorrelationVector(orders, self.layout)

    def poisson(self, density):
        return CorrelationVector.poisson(density, self.max_order, self.layout, self.domain.shape)

    def apply_A(self, k, n):
        self._check(k, n)
        if n == 0:
            return np.zeros_like(k[0])
        if n == 1:
            return self.ma * k[1]
        g = k[2]
        t = (1.0 + self.k2) * self._conv(g) + self._conv(self.k1 * g)
        return t + self.domain.reflect(t)

    def apply_B(self, k, n, omega=None):
        self._check(k, n)
        w = omega or 0.0
        if n == 0:
            return np.zeros_like(k[0])
        if n == 1:
            return -(self.ma + w) * k[1]
        return -(2.0 * self.ma + self.pm_pair + 2.0 * w) * k[2]

    def apply_C(self, k, n, omega=None):
        self._check(k, n)
        if n == 0:
            return np.zeros_like(k[0])
        shift = (omega or 0.0) * n * k[n]
        tag = self._closure_tag(n)
        rho = k[1]
        if n == 1:
            if tag is None:
                return np.sum(self.pm * k[2]) * self.dv + shift
            if tag == "mean-field":
                return self.ma * self.mean_b * rho * rho + shift
            return shift
        if tag == "mean-field":
            c = self._conv(k[2])
            return rho * self.mean_b * (c + self.domain.reflect(c)) + shift
        return shift

    def apply_D(self, k, n):
        self._check(k, n)
        if n == 0:
            return np.zeros_like(k[0])
        tag = self._closure_tag(n)
        rho = k[1]
        if n == 1:
            if tag is None:
                return -np.sum(self.pm * k[2]) * self.dv
            if tag == "mean-field":
                return -self.pm_mass * rho * rho
            return np.zeros_like(rho)
        if tag == "mean-field":
            return -2.0 * self.pm_mass * rho * k[2]
        return np.zeros_like(k[2])


def _contract(w: NDArray, k: NDArray, axis: int) -> NDArray:
    """``out[.., y, ..] = sum_x w[x, y] k[.., x, ..]`` along ``axis``."""
    return np.moveaxis(np.tensordot(k, w, axes=([axis], [0])), -1, axis)


def _pairfield(mat: NDArray, n: int, i: int, j: int) -> NDArray:
    """``mat[idx_i, idx_j]`` shaped to broadcast against an order-``n`` tensor."""
    p = mat.shape[0]
    shape = [1] * n
    shape[i] = shape[j] = p
    return (mat if i < j else mat.T).reshape(shape)


class TensorEngine(Engine):
    """Dense tensors over grid nodes; direct quadrature of every operator."""

    layout = "full"
    max_entries = 1 << 24

    def __init__(self, model, max_order=2, closure="zero-tail"):
        super().__init__(model, max_order, closure)
        dom = self.domain
        p = dom.resolution**dom.dimension
        if p ** (max_order + 1) > self.max_entries:
            raise OrderError(f"P^(N+1) = {p}^{max_order + 1} entries is too large for dense tensors")
        self.p = p
        idx = np.indices(dom.shape).reshape(dom.dimension, -1).T
        diff = (idx[None, :, :] - idx[:, None, :]) % dom.resolution  # diff[p, q] ~ q - p

        def lookup(table):
            return table[tuple(diff[..., a] for a in range(dom.dimension))]

        self.W = self.dv * lookup(model.alpha_grid)           # W[x, y] = h^d alpha(y - x)
        self.K1 = lookup(model.kappa1_grid).T                 # K1[x, z] = kappa1(x - z)
        self.K2 = lookup(model.kappa2_grid).T
        self.PM = self.ma * self.K1 + self.W @ self.K2        # phi_-(x, z)
        self.PP = self.W.T @ self.K1 + self.ma * self.K2      # phi_+(x, y)
        self._psi: dict[int, NDArray] = {}
        self._phi_plus: dict[int, NDArray] = {}

    def zeros(self):
        return CorrelationVector([np.zeros((self.p,) * n) for n in range(self.max_order + 1)], self.layout)

    def poisson(self, density):
        return CorrelationVector.poisson(density, self.max_order, self.layout, self.domain.shape)

    def homogeneous(self, rho: float, g: NDArray) -> CorrelationVector:
        """Full-layout copy of a reduced state ``(rho, g)``."""
        idx = np.indices(self.domain.shape).reshape(self.domain.dimension, -1).T
        diff = (idx[:, None, :] - idx[None, :, :]) % self.domain.resolution
        k2 = g[tuple(diff[..., a] for a in range(self.domain.dimension))]
        return CorrelationVector([np.array(1.0), np.full(self.p, rho), k2], self.layout)

    def big_phi_minus(self, n: int) -> NDArray:
        return self.psi(n) - n * self.ma

    def psi(self, n: int) -> NDArray:
        """``Psi(eta)`` on every order-``n`` grid configuration."""
        if n not in self._psi:
            out = np.full((self.p,) * n, n * self.ma)
            for i in range(n):
                for j in range(n):
                    if i != j:
                        out = out + _pairfield(self.PM, n, i, j)
            self._psi[n] = out
        return self._psi[n]

    def big_phi_plus(self, n: int) -> NDArray:
        if n not in self._phi_plus:
            out = np.zeros((self.p,) * n)
            for i in range(n):
                for j in range(n):
                    if i != j:
                        out = out + _pairfield(self.PP, n, i, j)
            self._phi_plus[n] = out
        return self._phi_plus[n]

    def apply_A(self, k, n):
        self._check(k, n)
        if n == 0:
            return np.zeros_like(k[0])
        kn = k[n]
        out = np.zeros_like(kn)
        for j in range(n):
            factor = 1.0
            for i in range(n):
                if i != j:
                    factor = factor + _pairfield(self.K2, n, j, i)
            term = _contract(self.W, kn, j) * factor
            for i in range(n):
                if i != j:
                    term = term + _contract(self.W, kn * _pairfield(self.K1, n, j, i), j)
            out += term
        return out

    def apply_B(self, k, n, omega=None):
        self._check(k, n)
        if n == 0:
            return np.zeros_like(k[0])
        return -(self.psi(n) + (omega or 0.0) * n) * k[n]

    def apply_C(self, k, n, omega=None):
        self._check(k, n)
        if n == 0:
            return np.zeros_like(k[0])
        kn = k[n]
        out = (omega or 0.0) * n * kn
        tag = self._closure_tag(n)
        if tag == "zero-tail":
            return out
        if tag == "mean-field":
            v1 = self.dv * self.K1 @ k[1]
            v2 = self.dv * self.K2 @ k[1]
            for j in range(n):
                shape = [1] * n
                shape[j] = self.p
                out = out + _contract(self.W, kn * v1.reshape(shape), j)
                out = out + v2.reshape(shape) * _contract(self.W, kn, j)
            return out
        up = k[n + 1]
        for j in range(n):
            t = (up * _pairfield(self.K1, n + 1, j, n)).sum(axis=-1) * self.dv
            out = out + _contract(self.W, t, j)
            kk = np.moveaxis(up, j, 0)
            u = np.einsum("xy,yz,x...z->y...", self.W, self.dv * self.K2, kk, optimize=True)
            out = out + np.moveaxis(u, 0, j)
        return out

    def apply_D(self, k, n):
        self._check(k, n)
        if n == 0:
            return np.zeros_like(k[0])
        tag = self._closure_tag(n)
        if tag == "zero-tail":
            return np.zeros_like(k[n])
        if tag == "mean-field":
            v = self.dv * self.PM @ k[1]
            total = sum(v.reshape([self.p if a == i else 1 for a in range(n)]) for i in range(n))
            return -total * k[n]
        up = k[n + 1]
        out = np.zeros_like(k[n])
        for i in range(n):
            out = out - (up * _pairfield(self.PM, n + 1, i, n)).sum(axis=-1) * self.dv
        return out

    # -- predual side --------------------------------------------------------
    def predual_A(self, G: CorrelationVector, n: int) -> NDArray:
        """``(A-hat G)(eta) = sum_x int a(x,y)(1 + sum_z b(x,y|z)) G(eta\\x ∪ y) dy``."""
        if n == 0:
            return np.zeros_like(G[0])
        gn = G[n]
        wt = self.W.T  # wt[y, x] = h^d alpha(y - x)
        out = np.zeros_like(gn)
        for j in range(n):
            factor = 1.0
            for i in range(n):
                if i != j:
                    factor = factor + _pairfield(self.K1, n, j, i)
            term = _contract(wt, gn, j) * factor
            for i in range(n):
                if i != j:
                    term = term + _contract(wt, gn * _pairfield(self.K2, n, j, i), j)
            out += term
        return out

    def predual_B(self, G: CorrelationVector, n: int, omega: float = 0.0) -> NDArray:
        if n == 0:
            return np.zeros_like(G[0])
        return -(self.psi(n) + omega * n) * G[n]

    def lebesgue_poisson_weights(self, theta: float) -> NDArray:
        """Grid Lebesgue-Poisson weights ``h^(dn) e^(theta n) / n!`` per order."""
        from math import factorial
        return np.array([self.dv**n * np.exp(theta * n) / factorial(n) for n in range(self.max_order + 1)])

    def pairing(self, G: CorrelationVector, k: CorrelationVector) -> float:
        """Grid version of ``<<G, k>> = int G k d lambda``."""
        w = self.lebesgue_poisson_weights(0.0)
        return float(sum(w[n] * np.sum(G[n] * k[n]) for n in range(self.max_order + 1)))


def make_engine(model: KernelModel, max_order: int = 2, closure: ClosureRule | str | None = "zero-tail",
                layout: str = "reduced") -> Engine:
    if layout == "reduced":
        return ReducedEngine(model, max_order, closure)
    if layout == "full":
        return TensorEngine(model, max_order, closure)
    raise ValueError(f"unknown layout {layout!r}")


def apply_A(engine: Engine, k: CorrelationVector, n: int) -> NDArray:
    return engine.apply_A(k, n)


def apply_B(engine: Engine, k: CorrelationVector, n: int, omega: float | None = None) -> NDArray:
    return engine.apply_B(k, n, omega)


def apply_C(engine: Engine, k: CorrelationVector, n: int, omega: float | None = None) -> NDArray:
    return engine.apply_C(k, n, omega)


def apply_D(engine: Engine, k: CorrelationVector, n: int) -> NDArray:
    return engine.apply_D(k, n)


def apply_L(engine: Engine, k: CorrelationVector) -> CorrelationVector:
    return engine.apply_L(k)
