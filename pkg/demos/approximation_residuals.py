"""How well do the two approximate constructions solve the heat equation?

Prints the measured forcing of the path-corrected kernel as t -> 0 and the
two forcings of the split construction, with their trend verdicts.

    python demos/approximation_residuals.py
"""

import numpy as np

from dynakernel.approx import approx_residual_g1, approx_residual_u, approx_solution
from dynakernel.ball_heat import Truncation, dirichlet_eigenbasis

basis = dirichlet_eigenbasis(2, Truncation())


def show(rep, label):
    print(f"{rep.component} along {rep.grid_name} ({label}); verdict {rep.verdict}")
    for p, t, v, e in zip(rep.points, rep.times, rep.values, rep.fd_error):
        print(f"   x = {np.round(p, 3)}  t = {t:<7g} residual {v:.4g}  (fd change {e:.1e})")


show(approx_residual_g1(basis), "t decreasing")
f_rep, g_rep = approx_residual_u(basis)
show(f_rep, "|x| decreasing at t = 0.3")
show(g_rep, "t decreasing")

u = approx_solution(basis, 1.0, 1.0, np.array([0.3, 0.4]), 0.2)
print(f"\nsplit construction with constant data: {u.value:.15f}")
