"""Laplace kernels on the unit ball and the dynamical-boundary Laplace problem.

Green's function, Poisson kernel, the contracted kernels
``K1(x, y, t) = P1(x e^{-t}, y)`` and ``J1(x, y, t) = G1(x e^{-t}, y)``,
plus quadrature-based solution operators built from them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ContractError, DomainError, SingularityError
from .numerics import (
    KernelValue,
    ball_quadrature,
    polar_ball_quadrature,
    sphere_area,
    sphere_quadrature,
)

__all__ = [
    "BOUNDARY_TOL",
    "BoundaryFunction",
    "InteriorFunction",
    "norm",
    "is_boundary",
    "inversion",
    "green_ball",
    "green_ball_dr",
    "poisson_ball",
    "k1",
    "k1_dt",
    "j1",
    "harmonic_extension",
    "laplace_dynamical_solution",
    "green_potential",
    "laplace_dynamical_interior_solution",
]

BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class BoundaryFunction:
    """Data on the unit sphere; ``func`` maps ``(m, n)`` points to ``(m,)``."""

    func: Callable[[np.ndarray], np.ndarray]
    smoothness: str = "smooth"

    def __call__(self, y):
        return np.asarray(self.func(np.asarray(y, dtype=float)), dtype=float)


@dataclass(frozen=True)
class InteriorFunction:
    """Interior datum together with its negative Laplacian.

    ``support_radius`` (if set) says the function vanishes for
    ``|y| >= support_radius``; quadratures use it to skip empty shells.
    """

    func: Callable[[np.ndarray], np.ndarray]
    neg_laplacian: Callable[[np.ndarray], np.ndarray] | None = None
    support_radius: float | None = None

    def __call__(self, y):
        return np.asarray(self.func(np.asarray(y, dtype=float)), dtype=float)


def _as_boundary_function(f):
    return f if isinstance(f, (BoundaryFunction, InteriorFunction)) else BoundaryFunction(f)


def norm(x):
    return np.linalg.norm(np.asarray(x, dtype=float), axis=-1)


def is_boundary(x) -> bool:
    return bool(abs(norm(x) - 1.0) <= BOUNDARY_TOL)


def _check_closed_ball(x):
    if np.any(norm(x) > 1.0 + BOUNDARY_TOL):
        raise DomainError("point outside the closed unit ball")


def inversion(x):
    """Kelvin dual point ``x / |x|^2``."""
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1, keepdims=True)
    if np.any(r2 == 0):
        raise SingularityError("inversion of the origin")
    return x / r2


def _scalar(v):
    return float(v) if np.ndim(v) == 0 else v


def _dual_distance(x, y):
    # |x| |y - x/|x|^2|, which is 1 at x = 0
    x2 = np.sum(x * x, axis=-1)
    y2 = np.sum(y * y, axis=-1)
    xy = np.sum(x * y, axis=-1)
    return np.sqrt(np.maximum(x2 * y2 - 2 * xy + 1.0, 0.0))


def green_ball(x, y):
    """Dirichlet Green's function of ``-Delta`` on the unit ball."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[-1]
    d = norm(x - y)
    if np.any(d == 0):
        raise SingularityError("Green's function at x = y")
    q = _dual_distance(x, y)
    if n == 2:
        return _scalar(-(np.log(d) - np.log(q)) / (2 * np.pi))
    if n == 3:
        return _scalar((1.0 / d - 1.0 / q) / (4 * np.pi))
    raise DomainError(f"dimension {n} not supported")


def green_ball_dr(x, y):
    """Radial derivative ``e_x . grad_x G1(x, y)`` for ``x != 0``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[-1]
    r = norm(x)
    if np.any(r == 0):
        raise SingularityError("radial direction undefined at the origin")
    e = x / r[..., None]
    diff = x - y
    d2 = np.sum(diff * diff, axis=-1)
    q2 = _dual_distance(x, y) ** 2
    # d/dr of |x-y|^2 and of |x|^2|y|^2 - 2 x.y + 1
    dd = 2 * np.sum(e * diff, axis=-1)
    dq = 2 * r * np.sum(y * y, axis=-1) - 2 * np.sum(e * y, axis=-1)
    if n == 2:
        return _scalar(-(dd / d2 - dq / q2) / (4 * np.pi))
    return _scalar((-0.5 * dd / d2**1.5 + 0.5 * dq / q2**1.5) / (4 * np.pi))


def poisson_ball(x, y):
    """``(1 - |x|^2) / (|S| |x - y|^n)`` with ``|S|`` the sphere area."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[-1]
    d = norm(x - y)
    if np.any(d == 0):
        raise SingularityError("Poisson kernel at x = y on the boundary")
    return _scalar((1.0 - np.sum(x * x, axis=-1)) / (sphere_area(n) * d**n))


def k1(x, y, t: float):
    if t <= 0:
        raise DomainError("t must be positive")
    _check_closed_ball(x)
    return poisson_ball(np.asarray(x, dtype=float) * np.exp(-t), y)


def k1_dt(x, y, t):
    """Closed-form time derivative of :func:`k1`."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[-1]
    z = x * np.exp(-t)
    z2 = np.sum(z * z, axis=-1)
    d2 = np.sum((z - y) ** 2, axis=-1)
    zy = np.sum(z * y, axis=-1)
    num = 2 * z2 * d2 + n * (1 - z2) * (z2 - zy)
    return _scalar(num / (sphere_area(n) * d2 ** (n / 2 + 1)))


def j1(x, y, t: float):
    if t < 0:
        raise DomainError("t must be nonnegative")
    return green_ball(np.asarray(x, dtype=float) * np.exp(-t), y)


def _default_order(n, r):
    """Sphere order resolving the Poisson kernel at radius ``r``.

    The kernel has its nearest complex singularity at radius ``1 / r``, so
    the equispaced and polar Gauss rules both gain a factor ``r`` per node
    (``r^2`` per polar node with the doubled azimuth count in 3-d).
    """
    base, cap, per = (256, 1 << 16, 36.0) if n == 2 else (32, 1024, 18.0)
    if r <= 0.0:
        return base
    return int(min(cap, max(base, np.ceil(per / -np.log(r)))))


def _sphere_rule_pair(n, order, r=0.0):
    if order is None:
        order = _default_order(n, r)
    return sphere_quadrature(n, order), sphere_quadrature(n, max(1, order // 2))


def harmonic_extension(phi_b, x, order: int | None = None) -> KernelValue:
    """Poisson integral of boundary data at an interior point.

    The error estimate compares against the sphere rule of half the order.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if norm(x) >= 1.0:
        raise DomainError("harmonic extension needs an interior point")
    phi_b = _as_boundary_function(phi_b)
    (nodes, w), (nodes_c, w_c) = _sphere_rule_pair(n, order, float(norm(x)))
    fine = w @ (poisson_ball(x, nodes) * phi_b(nodes))
    coarse = w_c @ (poisson_ball(x, nodes_c) * phi_b(nodes_c))
    return KernelValue(float(fine), float(abs(fine - coarse) + 1e-15))


def laplace_dynamical_solution(phi_b, x, t: float, order: int | None = None) -> KernelValue:
    """Solution of the Laplace problem with ``u_t + du/dnu = 0`` on the sphere."""
    if t <= 0:
        raise DomainError("t must be positive")
    _check_closed_ball(x)
    return harmonic_extension(phi_b, np.asarray(x, dtype=float) * np.exp(-t), order)


def green_potential(density, center, radial_order: int = 48,
                    sphere_order: int | None = None,
                    support_radius: float | None = None) -> KernelValue:
    """``int_B G1(center, y) density(y) dy`` by a rule centred on the pole.

    ``support_radius`` (if the density vanishes outside that ball) lets the
    rule stop at the edge of the support; a pole outside the support gets
    the plain product rule on the support ball instead.
    """
    c = np.asarray(center, dtype=float)
    n = c.size
    outside = support_radius is not None and norm(c) >= support_radius

    def apply(ro, so):
        if outside:
            r, dirs, w = ball_quadrature(n, ro, so)
            pts = (support_radius * r[:, None, None] * dirs[None]).reshape(-1, n)
            w = support_radius**n * w.ravel()
        else:
            pts, w = polar_ball_quadrature(c, ro, so, support_radius)
        return float(w @ (green_ball(c, pts) * np.asarray(density(pts), dtype=float)))

    so = sphere_order if sphere_order is not None else (64 if n == 2 else 16)
    fine = apply(radial_order, so)
    coarse = apply(max(2, radial_order // 2), max(2, so // 2))
    return KernelValue(fine, abs(fine - coarse) + 1e-15)


def laplace_dynamical_interior_solution(phi_i: InteriorFunction, x, t: float,
                                        radial_order: int = 48,
                                        sphere_order: int | None = None) -> KernelValue:
    """``w(x, t) = int_B J1(x, y, t) (-Delta phi_i)(y) dy``."""
    if not isinstance(phi_i, InteriorFunction) or phi_i.neg_laplacian is None:
        raise ContractError("interior datum must supply its negative Laplacian")
    if t < 0:
        raise DomainError("t must be nonnegative")
    x = np.asarray(x, dtype=float)
    _check_closed_ball(x)
    z = x * np.exp(-t)
    if norm(z) >= 1.0 - BOUNDARY_TOL:
        return KernelValue(0.0, 0.0)     # Green's function vanishes on the sphere
    return green_potential(phi_i.neg_laplacian, z, radial_order, sphere_order,
                           phi_i.support_radius)
