"""
Kernels, pair rates and the stability test
==========================================

A model is three radial profiles on a periodic grid: the jump kernel
``alpha``, a repulsive kernel ``kappa1`` that depends on where the particle
starts, and an attractive kernel ``kappa2`` that depends on where it lands.
This script builds three models and asks which ones keep the number of
jumps per particle under control.
"""

import numpy as np

from jumpattract import KernelModel, TorusDomain, gaussian, stability_check, zero_profile
from jumpattract.configurations import big_phi

line = TorusDomain(1, 20.0, 256)

# %%
# Narrow repulsion, wide attraction. The product of Fourier symbols stays
# nonnegative, so the model is stable, but a pair of particles at moderate
# distance still gains rate. The certified constant ``omega`` absorbs that.

stable = KernelModel(line, gaussian(1.0), gaussian(0.5), gaussian(1.0))
rep = stability_check(stable)
print(f"verdict {rep.verdict}, min symbol product {rep.min_product:.2e}, omega {rep.omega:.6f}")

r = np.linspace(0, 6, 601)[:, None]
gap = stable.phi_at(r, "+") - stable.phi_at(r, "-")
print(f"largest pair gain {gap.max():.4f} at r = {r[np.argmax(gap), 0]:.2f}")

# %%
# Pure attraction. Particles stacked on one site gain rate quadratically
# in their number, which is the signature of an unbounded model.

attract = KernelModel(line, gaussian(1.0), zero_profile(), gaussian(1.0))
print(stability_check(attract).verdict)
for n in (2, 4, 8, 16):
    pile = np.full((n, 1), 5.0)
    excess = big_phi(attract, pile, "+") - big_phi(attract, pile, "-")
    print(f"  n = {n:2d}: excess {excess:8.3f}, per n^2 {excess / n**2:.4f}")

# %%
# Equal kernels. Gain and loss balance exactly for every pair.

balanced = KernelModel(line, gaussian(1.0), gaussian(0.7), gaussian(0.7))
print("max |phi+ - phi-| =", np.abs(balanced.phi_plus_grid - balanced.phi_minus_grid).max())
