import functools
import json

import numpy as np
import pytest
from scipy import special
from hypothesis import given, settings
from hypothesis import strategies as st

from dynakernel.ball_heat import Truncation
from dynakernel.dyn_eigen import (
    WentzellExpansion,
    dyn_solution,
    g1_dyn,
    g1_dyn_mass,
    real_harmonics,
    wentzell_eigenpairs,
)
from dynakernel.errors import TruncationError
from dynakernel.numerics import (
    ball_quadrature,
    ball_volume,
    boundary_defect,
    caloric_defect,
    observed_orders,
    sphere_area,
    sphere_quadrature,
)
from frozen_oracles import G1DYN_LIMIT_N2, G1DYN_LIMIT_N3, WENTZELL_MU_L0_N2

@functools.lru_cache(maxsize=None)
def _shared_disk():
    return wentzell_eigenpairs(2, Truncation())


disk_point = st.tuples(st.floats(0, 2 * np.pi), st.floats(0, 1)).map(
    lambda a: a[1] * np.array([np.cos(a[0]), np.sin(a[0])]))


def test_constant_mode(wdisk, wball3):
    for b in (wdisk, wball3):
        assert b.lam[0, 0] == 0.0
        p = b.pairs[0]
        assert p.eigenvalue == 0.0 and p.degree == 0
        # psi_0 = c on B and on S with c^2 (|B| + |S|) = 1
        c = b.radial(np.array([0.0, 0.5, 1.0]))[0, 0]
        assert np.allclose(c * np.sqrt(sphere_area(b.n) * 0 + 1), c[0])
        psi0 = c[0] * real_harmonics(b.n, 0, np.eye(b.n)[:1])[0, 0]
        assert abs(psi0**2 * (ball_volume(b.n) + sphere_area(b.n)) - 1) < 1e-14


def test_first_radial_root(wdisk):
    mu = wdisk.mu[0, 1]
    assert 2.405 < mu < 3.0
    assert abs(mu - WENTZELL_MU_L0_N2) <= 1e-12
    assert abs(wdisk.lam[0, 1] - WENTZELL_MU_L0_N2**2) <= 1e-11


def test_boundary_residuals(wdisk, wball3):
    for b in (wdisk, wball3):
        res = b.boundary_residual()
        assert np.max(res[b.valid]) <= 1e-10


def test_sorted_pairs_and_records(wdisk):
    lam = [p.eigenvalue for p in wdisk.pairs]
    assert np.all(np.diff(lam) >= 0)
    recs = wdisk.to_records()
    assert recs[0]["lambda"] == 0.0
    assert max(r["bc_residual"] for r in recs) <= 1e-10
    data = json.loads(wdisk.to_json())
    assert data["basis"] == "wentzell" and len(data["pairs"]) == len(recs)


def _first_modes(b, count, r, dirs, nodes):
    """Full mode functions of the first ``count`` (l, k) pairs on the ball
    and sphere quadrature points (all harmonics of each degree)."""
    bulk, bnd = [], []
    for p in b.pairs[:count]:
        l = p.degree
        j = p.index if l == 0 else p.index - 1
        prof = b.radial(r)[l, j]
        edge = b.radial(1.0)[l, j]
        Yd = real_harmonics(b.n, l, dirs)
        Yb = real_harmonics(b.n, l, nodes)
        for m in range(Yd.shape[0]):
            bulk.append(prof[:, None] * Yd[m][None, :])
            bnd.append(edge * Yb[m])
    return np.array(bulk), np.array(bnd)


@pytest.mark.parametrize("n", [2, 3])
def test_combined_orthonormality(n, wdisk, wball3):
    b = wdisk if n == 2 else wball3
    r, dirs, w = ball_quadrature(n, 64, 64 if n == 2 else 16)
    nodes, bw = sphere_quadrature(n, 64 if n == 2 else 16)
    bulk, bnd = _first_modes(b, 10, r, dirs, nodes)
    gram = np.einsum("aij,bij,ij->ab", bulk, bulk, w) + np.einsum("ai,bi,i->ab", bnd, bnd, bw)
    off = gram - np.diag(np.diag(gram))
    assert np.max(np.abs(off)) <= 1e-8
    assert np.max(np.abs(np.diag(gram) - 1)) <= 1e-8


@given(disk_point, disk_point, st.floats(0.5, 3))
@settings(max_examples=25, deadline=None)
def test_g1_dyn_symmetric_bitwise(x, y, t):
    b = _shared_disk()
    assert g1_dyn(b, x, y, t).value == g1_dyn(b, y, x, t).value


def test_g1_dyn_mass(wdisk):
    for t in (0.5, 1.0):
        m = g1_dyn_mass(wdisk, np.array([0.3, 0.0]), t)
        assert abs(m.value - 1) <= 1e-3


def test_g1_dyn_long_time_limit(wdisk, wball3):
    assert abs(g1_dyn(wdisk, np.array([0.3, 0.1]), np.array([-0.5, 0.2]), 60.0).value
               - G1DYN_LIMIT_N2) < 1e-12
    assert abs(g1_dyn(wball3, np.array([0.3, 0.1, 0]), np.array([0, 0, 1.0]), 60.0).value
               - G1DYN_LIMIT_N3) < 1e-12


def test_g1_dyn_truncation_refusal(wdisk):
    with pytest.raises(TruncationError):
        g1_dyn(wdisk, np.zeros(2), np.zeros(2), wdisk.t_min / 2)


def test_g1_dyn_pde_and_boundary_law(wdisk):
    y = np.array([-0.2, 0.3])
    u = lambda p, s: g1_dyn(wdisk, p, y, s).value          # noqa: E731
    d = [abs(caloric_defect(u, np.array([0.3, 0.2]), 0.6, h, h**2)) for h in (0.04, 0.02, 0.01)]
    assert np.all(observed_orders(d) >= 1.8)
    xb = np.array([0.6, 0.8])
    bd = [abs(boundary_defect(u, xb, 0.6, h, h / 4)) for h in (0.02, 0.01, 0.005)]
    assert np.all(observed_orders(bd) >= 0.9)


def test_dyn_solution_constants(wdisk):
    for x, t in ((np.array([0.2, 0.1]), 0.5), (np.array([0.6, 0.8]), 2.0)):
        assert abs(dyn_solution(wdisk, 1.0, 1.0, x, t).value - 1) < 1e-10


def test_dyn_solution_eigenmode(wdisk):
    # data = psi for the (l=1, k=1, cos) mode evolves by e^{-lambda t}
    l, j = 1, 0
    lam = wdisk.lam[l, j]

    def psi(p):
        r = np.linalg.norm(p, axis=1)
        d = p / np.where(r > 0, r, 1)[:, None]
        prof = wdisk.coef[l, j] * special.jv(l, wdisk.mu[l, j] * r)
        return prof * real_harmonics(2, l, d)[0]

    x, t = np.array([0.4, -0.3]), 0.7
    exp = WentzellExpansion(wdisk, psi, psi, radial_order=int(0.5 * wdisk.mu.max()) + 32)
    assert abs(exp(x, t).value - np.exp(-lam * t) * psi(x[None])[0]) < 1e-8


def test_dyn_solution_long_time_average(wdisk):
    phi_i = lambda p: 1 + p[:, 0] ** 2             # noqa: E731
    phi_b = lambda p: 2 + p[:, 1]                  # noqa: E731
    # (int_B phi_i + int_S phi_b) / (|B| + |S|) = (pi + pi/4 + 4 pi) / (3 pi)
    target = (np.pi + np.pi / 4 + 4 * np.pi) / (3 * np.pi)
    v = dyn_solution(wdisk, phi_i, phi_b, np.array([0.1, 0.5]), 40.0)
    assert abs(v.value - target) < 1e-10
    exp = WentzellExpansion(wdisk, phi_i, phi_b)
    assert abs(exp.combined_integral(1.0) - target * 3 * np.pi) < 1e-10
