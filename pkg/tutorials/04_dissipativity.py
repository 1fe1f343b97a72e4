"""
The predual flow loses mass
===========================

On the full tensor grid the adjoint of the single-jump part can be applied
to nonnegative test vectors. After the shift by ``omega`` the weighted total
never grows, which is what makes the free flow a contraction.
"""

import numpy as np

from jumpattract import KernelModel, TorusDomain, gaussian, stability_check
from jumpattract.hierarchy import (TensorEngine, check_dissipativity, dual_norm, flow_dual_norms,
                                   random_test_vectors)

dom = TorusDomain(1, 8.0, 16)
model = KernelModel(dom, gaussian(1.0), gaussian(0.5), gaussian(1.0), check_resolution=False)
omega = stability_check(model).omega
engine = TensorEngine(model, 2)

# %%
# Without the shift some clustered vectors gain. With it none do.

for shift in (0.0, omega):
    values = [check_dissipativity(engine, G, 0.0, shift) for G in random_test_vectors(engine, 300, rng=0)]
    print(f"omega = {shift:.4f}: largest value {max(values):+.4f}")

# %%
# Weighted l1 norm along the flow.

G = next(random_test_vectors(engine, 1, rng=3))
times = np.linspace(0.1, 1.0, 10)
norms = flow_dual_norms(engine, G, 0.5, omega, times)
print(f"t = 0: {dual_norm(engine, G, 0.5):.4f}")
for t, v in zip(times, norms):
    print(f"t = {t:.1f}: {v:.4f}")
