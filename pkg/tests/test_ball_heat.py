import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynakernel.ball_heat import (
    SpaceTimeFunction,
    Truncation,
    angular_factor,
    ball_pairing,
    bound_h,
    bound_l,
    boundary_pairing_f1,
    corrector_phi1,
    decompose_reconstruct,
    dirichlet_dynamical_flat_solution,
    dirichlet_eigenbasis,
    e1,
    f1,
    gamma1,
    gamma1_dr,
    h1,
)
from dynakernel.errors import DomainError, TruncationError
from dynakernel.halfspace import heat_kernel_free
from dynakernel.numerics import (
    QuadratureSpec,
    caloric_defect,
    gauss_legendre,
    integrate_interval,
    observed_orders,
    sphere_quadrature,
)
from frozen_oracles import (
    DIRICHLET_LAMBDA1_N2,
    DIRICHLET_LAMBDA1_N3,
    GAMMA1_N2_X0_Y0_T02,
    GAMMA1_N2_X03_Y0102_T05,
    GAMMA1_N3_X03_Y01_T03,
)

disk_point = st.tuples(st.floats(0, 2 * np.pi), st.floats(0, 0.97)).map(
    lambda a: a[1] * np.array([np.cos(a[0]), np.sin(a[0])]))


# -- basis -----------------------------------------------------------------

def test_first_eigenvalues(disk, ball3):
    assert abs(disk.pairs[0].eigenvalue - DIRICHLET_LAMBDA1_N2) <= 1e-10
    assert abs(ball3.pairs[0].eigenvalue - DIRICHLET_LAMBDA1_N3) <= 1e-10


@pytest.mark.parametrize("n", [2, 3])
def test_basis_count_and_order(n):
    b = dirichlet_eigenbasis(n, Truncation(10, 7))
    lam = [p.eigenvalue for p in b.pairs]
    assert len(lam) == 11 * 7
    assert np.all(np.diff(lam) >= 0) and lam[0] > 0
    assert lam[0] == min(lam)


@pytest.mark.parametrize("n", [2, 3])
def test_profiles_normalised_and_vanish_on_sphere(n):
    b = dirichlet_eigenbasis(n, Truncation(12, 10))
    u, w = gauss_legendre(200)
    prof = b.radial(u)                                 # (L, K, m)
    mass = np.einsum("lkm,m->lk", prof**2, w * u ** (n - 1))
    assert np.max(np.abs(mass - 1)) <= 1e-10
    assert np.max(np.abs(b.radial(1.0))) <= 1e-12


def test_angular_factor_reproduces_delta_mass():
    # int_S A_l(a . z) dsigma_z = delta_l0
    for n, order in ((2, 128), (3, 24)):
        nodes, w = sphere_quadrature(n, order)
        a = np.eye(n)[0]
        ang = angular_factor(n, 8, nodes @ a)
        assert abs(ang[0] @ w - 1) < 1e-13
        assert np.max(np.abs(ang[1:] @ w)) < 1e-13


def test_tail_monotone_in_cutoffs():
    t = 0.05
    tails = [dirichlet_eigenbasis(2, Truncation(l, k)).tail(t)
             for l, k in ((10, 10), (20, 10), (20, 20))]
    assert tails[0] >= tails[1] >= tails[2]


def test_truncation_refusal(disk):
    with pytest.raises(TruncationError) as info:
        gamma1(disk, np.zeros(2), np.zeros(2), disk.t_min / 4)
    assert info.value.info["required_kmax"] > disk.kmax
    with pytest.raises(DomainError):
        gamma1(disk, np.zeros(2), np.zeros(2), 0.0)


def test_json_export(disk):
    data = json.loads(disk.to_json())
    assert data["pairs"][0]["lambda"] == disk.pairs[0].eigenvalue
    assert {"n", "l", "k", "lambda", "norm_constant", "boundary_flux"} <= set(data["pairs"][0])


# -- Gamma1 ----------------------------------------------------------------

def test_gamma1_oracles(disk, ball3):
    v = gamma1(disk, np.array([0.3, 0.0]), np.array([0.1, 0.2]), 0.5)
    assert abs(v.value - GAMMA1_N2_X03_Y0102_T05) <= 1e-13
    assert abs(gamma1(disk, np.zeros(2), np.zeros(2), 0.2).value - GAMMA1_N2_X0_Y0_T02) <= 1e-13
    v3 = gamma1(ball3, np.array([0.3, 0, 0]), np.array([0, 0.1, 0]), 0.3)
    assert abs(v3.value - GAMMA1_N3_X03_Y01_T03) <= 1e-13


@given(disk_point, disk_point, st.floats(0.02, 3))
@settings(max_examples=30, deadline=None)
def test_gamma1_symmetric_bitwise(x, y, t):
    b = dirichlet_eigenbasis(2, Truncation())
    assert gamma1(b, x, y, t).value == gamma1(b, y, x, t).value


def test_gamma1_zero_on_sphere(disk):
    y = np.array([0.2, -0.3])
    assert gamma1(disk, np.array([0.6, 0.8]), y, 0.1).value == 0.0
    assert gamma1(disk, y, np.array([-1.0, 0.0]), 0.1).value == 0.0


def test_gamma1_large_time_decay(disk):
    x, y = np.array([0.3, 0.1]), np.array([-0.2, 0.4])
    a, b = gamma1(disk, x, y, 2.0).value, gamma1(disk, x, y, 3.0).value
    assert abs((np.log(b) - np.log(a)) + DIRICHLET_LAMBDA1_N2) <= 1e-6


def test_gamma1_positive_on_grid(disk):
    pts = np.array([[r * np.cos(a), r * np.sin(a)] for r in (0, 0.3, 0.7, 0.95)
                    for a in (0.0, 2.0, 4.0)])
    for t in (0.02, 0.2, 1.0):
        v = gamma1(disk, pts[:, None, :], pts[None, :, :], t).value
        assert np.all(v > -1e-8)


def test_gamma1_pde_residual(disk):
    y = np.array([-0.1, 0.2])
    u = lambda p, s: gamma1(disk, p, y, s).value       # noqa: E731
    x, t = np.array([0.3, 0.25]), 0.1
    d = [abs(caloric_defect(u, x, t, h, h**2)) for h in (0.04, 0.02, 0.01)]
    assert np.all(observed_orders(d) >= 1.8)


def test_gamma1_dr_matches_differences(disk):
    x, y, t, h = np.array([0.3, 0.4]), np.array([-0.1, 0.2]), 0.1, 1e-5
    ex = x / np.linalg.norm(x)
    fd = (gamma1(disk, x + h * ex, y, t).value - gamma1(disk, x - h * ex, y, t).value) / (2 * h)
    assert abs(gamma1_dr(disk, x, y, t).value - fd) < 1e-6


# -- boundary kernels ------------------------------------------------------

def test_e1_is_normal_derivative(disk):
    y = np.array([0.6, 0.8])
    x, t, h = np.array([0.1, -0.3]), 0.1, 1e-5
    fd = -(gamma1(disk, x, y, t).value - gamma1(disk, x, y * (1 - h), t).value) / h
    assert abs(e1(disk, x, y, t).value - fd) < 1e-3 * abs(fd)


def test_e1_nonnegative(disk):
    nodes, _ = sphere_quadrature(2, 64)
    for x in (np.zeros(2), np.array([0.5, 0.2]), np.array([0.9, 0.0])):
        for t in (0.02, 0.1, 1.0):
            assert np.all(e1(disk, x, nodes, t).value >= -1e-8)


def test_e1_flux_balance(disk):
    x, t, k = np.array([0.3, 0.0]), 0.3, 1e-4
    nodes, w = sphere_quadrature(2, 256)
    flux = w @ e1(disk, x, nodes, t).value
    dmass = (ball_pairing(disk, x, t + k, 1.0).value
             - ball_pairing(disk, x, t - k, 1.0).value) / (2 * k)
    assert abs(flux + dmass) <= 1e-6


def test_e1_concentrates_at_boundary(disk):
    # the normalised flux density near the sphere localises at the nearest point
    e = np.array([0.6, 0.8])
    nodes, w = sphere_quadrature(2, 1024)
    phi = lambda y: np.exp(y[:, 0]) * (1 + 0.3 * y[:, 1])     # noqa: E731
    errs = []
    for t in (0.1, 0.05, 0.02):
        ev = e1(disk, 0.95 * e, nodes, t).value
        errs.append(abs((w @ (ev * phi(nodes))) / (w @ ev) - phi(e[None])[0]))
    assert errs[2] < errs[1] < errs[0] and errs[2] < 0.03


def test_f1_is_time_integral_of_e1(disk):
    x, y = np.array([0.3, 0.0]), np.array([0.0, 1.0])
    t0, t = 0.05, 0.5
    q = integrate_interval(lambda s: e1(disk, x, y, s).value * np.ones_like(s)
                           if np.ndim(s) == 0 else np.array([e1(disk, x, y, si).value for si in s]),
                           t0, t, QuadratureSpec("gauss-legendre", 48))
    diff = f1(disk, x, y, t).value - f1(disk, x, y, t0).value
    assert abs(diff - q.value) <= 1e-8


def test_f1_vanishes_initially(disk):
    x, y = np.array([0.3, 0.0]), np.array([0.0, 1.0])
    vals = [abs(f1(disk, x, y, t).value) for t in (0.1, 0.05, 0.02)]
    assert vals[2] < vals[1] < vals[0] and vals[2] < 1e-3


def test_mass_identity_f1_gamma1(disk):
    x = np.array([0.3, 0.0])
    for t in (0.25, 0.5, 1.0):
        total = boundary_pairing_f1(disk, x, t, 1.0).value + ball_pairing(disk, x, t, 1.0).value
        assert abs(total - 1) <= 1e-4


def test_h1_at_origin_equals_f1(disk):
    nodes, _ = sphere_quadrature(2, 16)
    a = h1(disk, np.zeros(2), nodes, 0.3)
    b = f1(disk, np.zeros(2), nodes, 0.3)
    assert np.max(np.abs(a.value - b.value)) <= np.max(a.error) + 1e-12


def test_h1_vanishes_initially_inside(disk):
    x, y = np.array([0.3, 0.1]), np.array([0.0, 1.0])
    vals = [abs(h1(disk, x, y, t).value) for t in (0.1, 0.05, 0.02)]
    assert vals[2] < vals[1] < vals[0] and vals[2] < 1e-3


def test_h1_recovers_boundary_value(disk):
    e = np.array([0.6, 0.8])
    nodes, w = sphere_quadrature(2, 1024)
    phi = lambda y: np.exp(y[:, 0]) * (1 + 0.3 * y[:, 1])     # noqa: E731
    errs = [abs(w @ (h1(disk, e, nodes, t).value * phi(nodes)) - phi(e[None])[0])
            for t in (0.08, 0.04, 0.02)]
    # the deficit closes like sqrt(t)
    assert errs[2] < errs[1] < errs[0]
    assert np.all(observed_orders(errs) >= 0.3)


# -- corrector -------------------------------------------------------------

def test_corrector_reproduces_gamma1(disk, rng):
    for _ in range(10):
        x, y = rng.uniform(-0.5, 0.5, (2, 2))
        t = rng.uniform(0.05, 0.6)
        c = corrector_phi1(disk, x, y, t)
        g = gamma1(disk, x, y, t)
        assert abs(heat_kernel_free(x, y, t) - c.value - g.value) <= c.error + g.error + 1e-12
        assert c.value >= -c.error


def test_corrector_vanishes_initially(disk):
    x, y = np.array([0.3, 0.0]), np.array([-0.2, 0.4])
    vals = [corrector_phi1(disk, x, y, t).value for t in (0.2, 0.1, 0.05)]
    assert vals[2] < vals[1] < vals[0] and vals[2] < 1e-5


# -- envelopes -------------------------------------------------------------

def test_bound_h_examples():
    z = np.zeros(2)
    assert bound_h(z, z, 2.0) == 0.5
    assert bound_h(z, z, 0.5) == 1.0
    vals = [bound_h(np.array([r, 0]), np.array([r, 0]), 0.1) for r in (0.9, 0.99, 0.999)]
    assert vals[2] < vals[1] < vals[0] and vals[2] < 1e-4


def test_bound_l_examples():
    y = np.array([0.0, 1.0])
    assert bound_l(np.zeros(2), y, 1.0) == 2.0
    vals = [bound_l(r * y, y, 0.5) for r in (0.9, 0.99, 0.999)]
    assert vals[2] < vals[1] < vals[0] and vals[2] < 1e-2


@given(disk_point, st.floats(0, 2 * np.pi), st.floats(0.01, 5))
@settings(max_examples=50, deadline=None)
def test_bound_l_decreasing_in_t(x, a, t):
    y = np.array([np.cos(a), np.sin(a)])
    if np.linalg.norm(x - y) < 1e-3:
        return
    assert bound_l(x, y, 2 * t) < bound_l(x, y, t)


# -- representation --------------------------------------------------------

def test_decomposition_caloric_polynomial(disk):
    f = SpaceTimeFunction(lambda p, s: p[:, 0] ** 2 + 2 * s)
    v = decompose_reconstruct(disk, f, np.array([0.3, 0.0]), 0.5)
    assert abs(v.value - (0.09 + 1.0)) <= 1e-3


def test_decomposition_constants(disk):
    f = SpaceTimeFunction(lambda p, s: np.ones(len(p)))
    v = decompose_reconstruct(disk, f, np.array([0.2, -0.4]), 0.3)
    assert abs(v.value - 1) <= 1e-6


def test_decomposition_eigenmode(disk):
    lam = disk.lam[0, 0]
    prof = lambda p: disk.radial(np.linalg.norm(p, axis=-1), zeros=disk.zeros[:1, :1],  # noqa
                                 coef=disk.coef[:1, :1], orders=disk.orders[:1])[0, 0]
    f = SpaceTimeFunction(lambda p, s: np.exp(-lam * s) * prof(p))
    x, t = np.array([0.3, 0.2]), 0.4
    v = decompose_reconstruct(disk, f, x, t)
    assert abs(v.value - np.exp(-lam * t) * prof(x[None])[0]) <= 1e-8 + v.error


def test_decomposition_with_defect(disk):
    # f = |x|^2 has defect -2n; the volume term carries it
    f = SpaceTimeFunction(lambda p, s: np.sum(p * p, axis=-1),
                          lambda p, s: np.full(len(p), -4.0))
    x, t = np.array([0.3, 0.0]), 0.5
    v = decompose_reconstruct(disk, f, x, t)
    assert abs(v.value - 0.09) <= 1e-3


def test_flat_solution(disk):
    x = np.array([0.3, -0.1])
    for t in (0.05, 0.5, 2.0):
        assert abs(dirichlet_dynamical_flat_solution(disk, 1.0, 1.0, x, t).value - 1) <= 1e-6
    phi = lambda p: 1 + p[:, 0] - p[:, 1] ** 2                    # noqa: E731
    decay = [abs(dirichlet_dynamical_flat_solution(disk, 0.0, phi, x, t).value)
             for t in (0.5, 1.0, 2.0)]
    assert decay[2] < decay[1] < decay[0] < 1
    early = dirichlet_dynamical_flat_solution(disk, 0.0, phi, x, disk.t_min)
    assert abs(early.value - phi(x[None])[0]) < 0.05
