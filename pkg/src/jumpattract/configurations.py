"""Finite configurations on the torus and the functionals Phi_+/-, Psi, Psi_omega."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .kernels import KernelModel, TorusDomain

__all__ = ["FiniteConfiguration", "big_phi", "psi", "psi_omega", "pair_matrix"]


@dataclass(frozen=True, eq=False)
class FiniteConfiguration:
    """Ordered list of torus points; coincident points are allowed."""

    points: NDArray
    domain: TorusDomain

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, self.domain.dimension)
        if np.any(pts < 0) or np.any(pts >= self.domain.length):
            pts = self.domain.wrap(pts)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    def to_list(self) -> list[float]:
        return self.points.ravel().tolist()

    @classmethod
    def from_list(cls, coords: list[float], domain: TorusDomain) -> "FiniteConfiguration":
        return cls(np.asarray(coords, dtype=float), domain)


def _points(model: KernelModel, eta) -> NDArray:
    if isinstance(eta, FiniteConfiguration):
        return eta.points
    return np.asarray(eta, dtype=float).reshape(-1, model.domain.dimension)


def pair_matrix(model: KernelModel, eta, sign: str) -> NDArray:
    """``phi_sign(x_i, x_j)`` for all ordered pairs, zero on the diagonal."""
    pts = _points(model, eta)
    disp = pts[:, None, :] - pts[None, :, :]
    mat = model.phi_at(disp, sign)
    np.fill_diagonal(mat, 0.0)
    return mat


def big_phi(model: KernelModel, eta, sign: str) -> float:
    """Total attraction (``'+'``) or repulsion (``'-'``) rate of ``eta``."""
    if len(_points(model, eta)) < 2:
        return 0.0
    return float(pair_matrix(model, eta, sign).sum())


def psi(model: KernelModel, eta) -> float:
    n = len(_points(model, eta))
    return n * model.mass_a + big_phi(model, eta, "-")


def psi_omega(model: KernelModel, eta, omega: float) -> float:
    if omega < 0:
        raise ValueError(f"omega must be nonnegative, got {omega}")
    return omega * len(_points(model, eta)) + psi(model, eta)
