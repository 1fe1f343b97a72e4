"""
Iterating the Duhamel formula
=============================

Instead of stepping the hierarchy, one can split off the part that moves
single particles and iterate the remainder. Each pass adds one more order of
interaction. Inside the horizon the corrections shrink at a rate set by a
closed-form majorant.
"""

import numpy as np

from jumpattract import KernelModel, TorusDomain, gaussian, stability_check
from jumpattract.bounds import HorizonParams, horizon, ladder, optimal
from jumpattract.hierarchy import ReducedEngine, integrate, norm_theta, picard_solve, theta_zero

model = KernelModel(TorusDomain(1, 20.0, 128), gaussian(1.0), gaussian(0.5), gaussian(1.0))
omega = stability_check(model).omega
engine = ReducedEngine(model, 2, "mean-field")
k0 = engine.poisson(0.5)

# %%
# The horizon as a function of the scale parameter peaks one unit above
# ``theta0``.

th0 = theta_zero(k0)
thetas = th0 + np.linspace(0.05, 4, 80)
T = [horizon(HorizonParams(th0, th, omega, model.mean_b)) for th in thetas]
theta_star, tau = optimal(th0, omega, model.mean_b)
print(f"grid argmax {thetas[int(np.argmax(T))]:.3f}, theta* {theta_star:.3f}, tau {tau:.4f}")

# %%
# The scales used in the convergence argument.

print("ladder:", np.round(ladder(th0, theta_star, 3, 0.1 * (theta_star - th0)), 4))

# %%
# Successive differences against the majorant, then against a fine RK4 run.

res = picard_solve(engine, k0, 0.5 * tau, 12, omega=omega)
for n, (d, m) in enumerate(zip(res.differences, res.majorant), start=1):
    print(f"n = {n:2d}  difference {d:.3e}  majorant {m:.3e}")
ref = integrate(engine, k0, 0.5 * tau, tau / 1000).final
print("picard vs rk4:", norm_theta(res.state - ref, theta_star))
