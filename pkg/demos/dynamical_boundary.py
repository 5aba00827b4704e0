"""Heat flow with the dynamical boundary law d_t u + d_nu u = 0 on the disk.

Builds the Wentzell spectrum, checks that the Green's function keeps mass
one, and follows a solution to its long-time average.

    python demos/dynamical_boundary.py
"""

import numpy as np

from dynakernel.ball_heat import Truncation
from dynakernel.dyn_eigen import dyn_solution, g1_dyn, g1_dyn_mass, wentzell_eigenpairs

basis = wentzell_eigenpairs(2, Truncation())
print("lowest Wentzell pairs (l, k, lambda):")
for p in basis.pairs[:8]:
    print(f"  {p.degree:2d} {p.index:2d}  {p.eigenvalue:10.6f}")
print(f"boundary residual max {basis.boundary_residual().max():.1e}, t_min {basis.t_min:.3f}\n")

x, y = np.array([0.3, 0.0]), np.array([-0.4, 0.5])
for t in (0.5, 1.0, 3.0, 20.0):
    g = g1_dyn(basis, x, y, t).value
    m = g1_dyn_mass(basis, x, t).value
    print(f"t = {t:5.1f}  G1dyn(x, y) = {g:.6f}  mass = {m:.12f}")
print(f"stationary value 1 / (|B| + |S|) = {1 / (3 * np.pi):.6f}\n")

# data: interior 1 + x1^2, boundary 2 + x2; the flow conserves the
# bulk-plus-boundary integral, so it settles at its average
phi_i = lambda p: 1 + p[:, 0] ** 2            # noqa: E731
phi_b = lambda p: 2 + p[:, 1]                 # noqa: E731
avg = (np.pi + np.pi / 4 + 4 * np.pi) / (3 * np.pi)
for t in (0.5, 2.0, 8.0, 30.0):
    u = dyn_solution(basis, phi_i, phi_b, np.array([0.1, 0.5]), t).value
    print(f"u(0.1, 0.5; t = {t:4.1f}) = {u:.8f}")
print(f"long-time average = {avg:.8f}")
