"""Dirichlet heat kernel of the disk three ways.

The eigen-series, the free Gaussian (which it should match at short times
away from the boundary) and the exit-time Monte Carlo estimate.

    python demos/killed_brownian_motion.py
"""

import numpy as np

from dynakernel.ball_heat import Truncation, dirichlet_eigenbasis, gamma1
from dynakernel.halfspace import heat_kernel_free
from dynakernel.stochastic import gamma1_mc, sample_exits

basis = dirichlet_eigenbasis(2, Truncation(80, 40))
x, y = np.array([0.3, 0.0]), np.array([0.1, 0.2])
print(f"basis: {basis.lam.size} modes, smallest resolved time {basis.t_min:.4f}\n")

print("   t      series      free   series/free")
for t in (0.005, 0.02, 0.1, 0.5, 1.0):
    g = gamma1(basis, x, y, t).value
    f = heat_kernel_free(x, y, t)
    print(f"{t:5.3f}  {g:10.6f}  {f:8.6f}  {g / f:10.6f}")

# the walk only feels the sphere once it has had time to reach it
est = gamma1_mc(x, y, 0.5, n_paths=100_000, dt=1e-4, seed=0)
series = gamma1(basis, x, y, 0.5).value
print(f"\nMonte Carlo at t = 0.5: {est.mean:.5f} +- {est.stderr:.1e}"
      f" (series {series:.5f}, z = {(est.mean - series) / est.stderr:+.2f})")

taus, pos = sample_exits(np.zeros(2), 1e-4, 50_000, seed=2)
print(f"mean exit time from the centre: {taus.mean():.4f} (exact 1/4)")
hist, _ = np.histogram(np.arctan2(pos[:, 1], pos[:, 0]), bins=8, range=(-np.pi, np.pi))
print("exit angles, 8 bins:", hist)
