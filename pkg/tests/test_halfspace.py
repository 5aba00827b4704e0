import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynakernel.errors import DomainError
from dynakernel.halfspace import (
    g_plus_heat,
    g_plus_mass,
    gamma_plus,
    gamma_plus_factorized,
    green_halfspace_laplace,
    heat_kernel_free,
    k_plus,
    phi_laplace,
    poisson_halfspace,
    reflect,
)
from dynakernel.numerics import (
    QuadratureSpec,
    caloric_defect,
    integrate_interval,
    observed_orders,
    sphere_quadrature,
)
from frozen_oracles import GREEN_HALF_N3

coord = st.floats(-2, 2)
height = st.floats(0.05, 2)


def upper(n):
    return st.tuples(*([coord] * (n - 1) + [height])).map(np.array)


def test_fundamental_solution_values():
    assert phi_laplace(2, np.array([1.0, 0.0])) == 0.0
    assert phi_laplace(3, np.array([0.0, 1.0, 0.0])) == pytest.approx(1 / (4 * np.pi), rel=1e-15)
    assert phi_laplace(2, np.array([np.e, 0.0])) == pytest.approx(-1 / (2 * np.pi), rel=1e-15)


@pytest.mark.parametrize("n,r", [(2, 0.7), (3, 1.3)])
def test_fundamental_solution_unit_flux(n, r):
    # -int_{|x|=r} d_r Phi dsigma = 1, radial derivative by central differences
    nodes, w = sphere_quadrature(n, 64 if n == 2 else 16)
    h = 1e-5
    dr = (phi_laplace(n, (r + h) * nodes) - phi_laplace(n, (r - h) * nodes)) / (2 * h)
    assert abs(-(w @ dr) * r ** (n - 1) - 1.0) < 1e-8


def test_green_halfspace_known_value():
    v = green_halfspace_laplace(np.array([0.0, 0, 1]), np.array([0.0, 0, 2]))
    assert v == pytest.approx(GREEN_HALF_N3, rel=1e-14)


def test_green_halfspace_vanishes_at_boundary():
    x = np.array([0.3, 0.8])
    vals = [abs(green_halfspace_laplace(x, np.array([0.1, e]))) for e in (1e-2, 1e-4, 1e-6)]
    assert vals[2] < vals[1] < vals[0] and vals[2] < 1e-6


@given(upper(3), upper(3))
@settings(max_examples=50, deadline=None)
def test_green_halfspace_symmetric(x, y):
    if np.linalg.norm(x - y) < 1e-3:
        return
    a, b = green_halfspace_laplace(x, y), green_halfspace_laplace(y, x)
    assert abs(a - b) <= 1e-13 * max(1.0, abs(a))


def test_poisson_halfspace_mass_and_value():
    assert poisson_halfspace(np.array([0.0, 1.0]), np.array([0.0, 0.0])) == pytest.approx(1 / np.pi)
    R = 50.0
    v = integrate_interval(lambda s: poisson_halfspace(np.array([0.0, 1.0]),
                                                       np.stack([s, 0 * s], -1)),
                           -R, R, QuadratureSpec("composite-midpoint", 8, panels=4000))
    assert abs(v.value - 2 / np.pi * np.arctan(R)) < 1e-6


@given(upper(3), st.tuples(coord, coord), st.floats(0.2, 5))
@settings(max_examples=50, deadline=None)
def test_poisson_halfspace_homogeneity(x, yb, lam):
    y = np.array([yb[0], yb[1], 0.0])
    a = poisson_halfspace(lam * x, lam * y)
    assert a == pytest.approx(lam ** (1 - 3) * poisson_halfspace(x, y), rel=1e-12)


def test_k_plus_is_shifted_poisson():
    x, y, t = np.array([0.2, 0.3]), np.array([1.0, 0.0]), 0.4
    assert k_plus(x, y, t) == poisson_halfspace(x + np.array([0, t]), y)


def test_k_plus_truncated_mass():
    R = 200.0
    v = integrate_interval(lambda s: k_plus(np.array([0.0, 0.5]), np.stack([s, 0 * s], -1), 0.5),
                           -R, R, QuadratureSpec("composite-midpoint", 8, panels=8000))
    assert abs(v.value - 2 / np.pi * np.arctan(R)) < 1e-6


def test_k_plus_concentrates_at_boundary():
    x, y = np.array([0.0, 0.0]), np.array([0.5, 0.0])
    vals = [k_plus(x, y, t) for t in (1e-1, 1e-2, 1e-3)]
    assert vals[2] < vals[1] < vals[0] and vals[2] < 1e-2


def test_heat_kernel_free_diagonal_and_mass():
    for n in (2, 3):
        x = np.full(n, 0.3)
        assert heat_kernel_free(x, x, 0.7) == pytest.approx((4 * np.pi * 0.7) ** (-n / 2), rel=1e-15)
    # box of half-width 10 at t = 1: Gaussian tail below 1e-10
    s = np.linspace(-10, 10, 401)
    grid = np.stack(np.meshgrid(s, s, indexing="ij"), -1)
    g = heat_kernel_free(np.array([0.3, -0.2]), grid, 1.0)
    assert abs(np.trapezoid(np.trapezoid(g, s), s) - 1) < 1e-10


def test_gamma_plus_properties(rng):
    for _ in range(20):
        x = np.append(rng.uniform(-1, 1, 2), rng.uniform(0.01, 2))
        y = np.append(rng.uniform(-1, 1, 2), rng.uniform(0.01, 2))
        t = rng.uniform(0.01, 2)
        a, b = gamma_plus(x, y, t), gamma_plus_factorized(x, y, t)
        assert abs(a - b) <= 1e-13 * max(1.0, heat_kernel_free(x, y, t))
        assert a <= heat_kernel_free(x, y, t)
    assert gamma_plus(np.array([0.3, 0.0]), np.array([0.0, 0.4]), 0.5) == 0.0


def test_reflect():
    assert np.array_equal(reflect(np.array([1.0, 2.0, 3.0])), [1.0, 2.0, -3.0])


def test_g_plus_vanishes_for_short_time():
    x, y = np.array([0.0, 0.5]), np.array([1.0, 0.6])
    vals = [g_plus_heat(x, y, t).value for t in (0.05, 0.02, 0.005)]
    assert vals[2] < vals[1] < vals[0] and vals[2] < 1e-10


def test_g_plus_image_form_symmetric():
    x, y = np.array([0.2, 0.5]), np.array([-0.1, 0.3])
    a, b = g_plus_heat(x, y, 0.3), g_plus_heat(y, x, 0.3)
    assert abs(a.value - b.value) <= 2 * max(a.error, b.error) + 1e-15


def test_g_plus_mass_identity():
    m = g_plus_mass(np.array([0.0, 0.5]), 0.25)
    assert abs(m.value - 1) <= 1e-4 + m.error


def test_g_plus_satisfies_heat_equation_inside():
    x, y, t = np.array([0.2, 0.5]), np.array([-0.1, 0.3]), 0.3
    u = lambda p, s: g_plus_heat(p, y, s).value          # noqa: E731
    d = [abs(caloric_defect(u, x, t, h, h)) for h in (0.04, 0.02, 0.01)]
    assert np.all(observed_orders(d) >= 1.8)


def test_g_plus_dynamical_boundary_law():
    # (d_t + d_nu) G = 0 on x_n = 0 with outward normal -e_n
    y, t = np.array([-0.1, 0.3]), 0.3
    x = np.array([0.2, 0.0])
    u = lambda p, s: g_plus_heat(p, y, s).value          # noqa: E731
    d = []
    for h in (0.02, 0.01, 0.005):
        dt = (u(x, t + h) - u(x, t)) / h
        dnu = -(u(x + np.array([0, h]), t) - u(x, t)) / h
        d.append(abs(dt + dnu))
    assert d[2] < d[1] < d[0]
    assert np.all(observed_orders(d) >= 0.9)


def test_g_plus_domain_errors():
    with pytest.raises(DomainError):
        g_plus_heat(np.array([0.0, 0.5]), np.array([0.0, 0.5]), 0.0)
    with pytest.raises(DomainError):
        g_plus_heat(np.array([0.0, 0.5]), np.array([0.0, 0.5]), 0.1, form="mixed")
