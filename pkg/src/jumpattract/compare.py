"""Overlay of simulated pair correlations on hierarchy ``k2`` tables."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .kernels import TorusDomain
from .simulator import CorrelationEstimate

__all__ = ["shell_average", "Comparison", "compare_correlations"]


def shell_average(domain: TorusDomain, table: NDArray, edges: NDArray, samples: int = 32) -> NDArray:
    """Average of a separation table over each distance shell ``[r_i, r_{i+1})``.

    Uses midpoint samples in ``r`` (weighted by ``r`` in two dimensions) and
    both signs / a uniform angle set, with periodic linear interpolation.
    """
    edges = np.asarray(edges, dtype=float)
    frac = (np.arange(samples) + 0.5) / samples
    r = edges[:-1, None] + np.diff(edges)[:, None] * frac          # (bins, samples)
    if domain.dimension == 1:
        pts = np.concatenate([r, -r], axis=1)[..., None]
        return domain.interpolate(table, pts).mean(axis=1)
    phi = 2 * np.pi * (np.arange(samples) + 0.5) / samples
    disp = np.stack([r[:, :, None] * np.cos(phi), r[:, :, None] * np.sin(phi)], axis=-1)
    vals = domain.interpolate(table, disp).mean(axis=2)            # angular mean
    return (vals * r).sum(axis=1) / r.sum(axis=1)


@dataclass
class Comparison:
    time: float
    r_center: NDArray
    simulated: NDArray
    se: NDArray
    predicted: NDArray
    z: NDArray
    fraction_within: float
    threshold: float
    required_fraction: float

    @property
    def status(self) -> str:
        return "PASS" if self.fraction_within >= self.required_fraction else "FAIL"

    @property
    def max_abs_z(self) -> float:
        return float(np.abs(self.z).max()) if self.z.size else 0.0


def compare_correlations(estimate: CorrelationEstimate, domain: TorusDomain, g_table: NDArray,
                         threshold: float = 3.0, required_fraction: float = 0.95,
                         samples: int = 32) -> Comparison:
    """Standardised gaps ``(g_mc - k2) / se`` per bin.

    A bin with zero standard error counts as within the band only when the
    two values agree exactly.
    """
    pred = shell_average(domain, g_table, estimate.bin_edges, samples)
    gap = estimate.g - pred
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(estimate.g_se > 0, gap / estimate.g_se, np.where(gap == 0, 0.0, np.inf))
    within = float(np.mean(np.abs(z) <= threshold)) if z.size else 1.0
    return Comparison(estimate.time, estimate.bin_centers, estimate.g, estimate.g_se, pred, z,
                      within, threshold, required_fraction)
