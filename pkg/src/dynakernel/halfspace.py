"""Explicit kernels on the upper half space ``{x_n > 0}``.

Laplace kernels (fundamental solution, Dirichlet Green's function,
Poisson kernel and its dynamical shift) and the heat kernels (free,
Dirichlet by reflection, and the Green's function for the dynamical
boundary law ``u_t + du/dnu = 0``).  Points are arrays whose last axis
holds the coordinates, so every kernel broadcasts over batches.
"""

from __future__ import annotations

import numpy as np
from scipy import special

from .errors import DomainError, SingularityError
from .numerics import (
    DEFAULT_GRADED,
    KernelValue,
    QuadratureSpec,
    gauss_legendre,
    integrate_interval_batch,
)

__all__ = [
    "reflect",
    "phi_laplace",
    "green_halfspace_laplace",
    "poisson_halfspace",
    "k_plus",
    "heat_kernel_free",
    "heat_kernel_free_dn",
    "gamma_plus",
    "gamma_plus_factorized",
    "g_plus_heat",
    "g_plus_mass",
]

# Poisson normalisation 2 / (n * |B_1|): 1/pi in the plane, 1/(2 pi) in space
POISSON_CONSTANT = {2: 1.0 / np.pi, 3: 1.0 / (2.0 * np.pi)}


def _points(*arrays):
    out = [np.asarray(a, dtype=float) for a in arrays]
    dim = out[0].shape[-1]
    if dim not in (2, 3) or any(a.shape[-1] != dim for a in out):
        raise DomainError("points must share dimension 2 or 3")
    return out


def _scalar(v):
    return float(v) if np.ndim(v) == 0 else v


def reflect(x):
    """Mirror image ``(x', -x_n)``."""
    x = np.array(x, dtype=float)
    x[..., -1] *= -1.0
    return x


def phi_laplace(n: int, x):
    """Fundamental solution of ``-Delta``: ``-log|x|/(2 pi)`` or ``1/(4 pi |x|)``."""
    r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
    if np.any(r == 0.0):
        raise SingularityError("fundamental solution evaluated at the origin")
    if n == 2:
        return _scalar(-np.log(r) / (2 * np.pi))
    if n == 3:
        return _scalar(1.0 / (4 * np.pi * r))
    raise DomainError(f"dimension {n} not supported")


def green_halfspace_laplace(x, y):
    x, y = _points(x, y)
    if np.any(x[..., -1] <= 0) or np.any(y[..., -1] <= 0):
        raise DomainError("half-space Green's function needs interior points")
    if np.any(np.all(x == y, axis=-1)):
        raise SingularityError("x = y")
    n = x.shape[-1]
    return _scalar(phi_laplace(n, y - x) - phi_laplace(n, y - reflect(x)))


def poisson_halfspace(x, y):
    x, y = _points(x, y)
    if np.any(x[..., -1] <= 0):
        raise DomainError("Poisson kernel needs x_n > 0")
    n = x.shape[-1]
    d = np.linalg.norm(x - y, axis=-1)
    return _scalar(POISSON_CONSTANT[n] * x[..., -1] / d**n)


def k_plus(x, y, t: float):
    """Dynamical Poisson kernel: the Poisson kernel seen from ``x + t e_n``."""
    if t <= 0:
        raise DomainError("t must be positive")
    x = np.array(x, dtype=float)
    x[..., -1] += t
    return poisson_halfspace(x, y)


def heat_kernel_free(x, y, t: float):
    """Gaussian heat kernel ``(4 pi t)^{-n/2} exp(-|x-y|^2 / 4t)``."""
    if np.any(np.asarray(t) <= 0):
        raise DomainError("t must be positive")
    x, y = _points(x, y)
    n = x.shape[-1]
    d2 = np.sum((x - y) ** 2, axis=-1)
    return _scalar((4 * np.pi * t) ** (-n / 2) * np.exp(-d2 / (4 * t)))


def heat_kernel_free_dn(x, y, t):
    """Derivative of the Gaussian kernel in the last coordinate of ``x``."""
    x, y = _points(x, y)
    return -(x[..., -1] - y[..., -1]) / (2 * t) * heat_kernel_free(x, y, t)


def gamma_plus(x, y, t: float):
    """Dirichlet heat kernel of the half space by reflection."""
    return _scalar(heat_kernel_free(x, y, t) - heat_kernel_free(x, reflect(y), t))


def _gauss_1d(z, t):
    return np.exp(-z**2 / (4 * t)) / np.sqrt(4 * np.pi * t)


def gamma_plus_factorized(x, y, t: float):
    """Same kernel written as tangential Gaussian times a 1-D odd image pair."""
    if t <= 0:
        raise DomainError("t must be positive")
    x, y = _points(x, y)
    n = x.shape[-1]
    d2 = np.sum((x[..., :-1] - y[..., :-1]) ** 2, axis=-1)
    tangential = (4 * np.pi * t) ** (-(n - 1) / 2) * np.exp(-d2 / (4 * t))
    normal = _gauss_1d(x[..., -1] - y[..., -1], t) - _gauss_1d(x[..., -1] + y[..., -1], t)
    return _scalar(tangential * normal)


def g_plus_heat(x, y, t: float, spec: QuadratureSpec = DEFAULT_GRADED,
                form: str = "image") -> KernelValue:
    """Heat Green's function of the half space with the dynamical boundary law.

    ``form="image"`` integrates the normal derivative of the free kernel at
    the mirror point; ``form="difference"`` integrates the normal derivative
    of the Dirichlet kernel itself.  Only the image form is the kernel of
    the dynamical problem; the other is kept for comparison.  The time
    integrand decays like a Gaussian as ``s -> t``, so a rule graded toward
    the right end is used.
    """
    if t <= 0:
        raise DomainError("t must be positive")
    if form not in ("image", "difference"):
        raise DomainError(f"unknown form {form!r}")
    x, y = _points(x, y)
    x, y = np.broadcast_arrays(x, y)
    n = x.shape[-1]
    y_star = reflect(y)
    en = np.zeros(n)
    en[-1] = 1.0

    def integrand(s):
        tau = t - s
        z = x[..., None, :] + s[:, None] * en           # (..., m, n)
        w = y_star[..., None, :]
        if form == "image":
            return -2.0 * heat_kernel_free_dn(z, w, tau)
        v = y[..., None, :]
        return heat_kernel_free_dn(z, v, tau) - heat_kernel_free_dn(z, w, tau)

    tail, err = integrate_interval_batch(integrand, 0.0, t, spec)
    value = gamma_plus(x, y, t) + tail
    if np.ndim(value) == 0:
        return KernelValue(float(value), float(err))
    return KernelValue(value, err)


def _box_mass(x, t, spec, r_tan, r_nor, panels, nodes):
    """Tensor Gauss rule over the boundary face and the box interior."""
    n = x.size
    u, w = gauss_legendre(nodes)

    def composite(a, b):
        edges = np.linspace(a, b, panels + 1)
        h = np.diff(edges)
        return ((edges[:-1, None] + h[:, None] * u).ravel(),
                (h[:, None] * w).ravel())

    axes = [composite(x[i] - r_tan, x[i] + r_tan) for i in range(n - 1)]
    ny, wy = composite(0.0, r_nor)
    tan_nodes = np.stack(np.meshgrid(*[a[0] for a in axes], indexing="ij"), -1)
    tan_nodes = tan_nodes.reshape(-1, n - 1)
    tan_w = np.prod(np.stack(np.meshgrid(*[a[1] for a in axes], indexing="ij"), -1),
                    axis=-1).ravel()

    bnd = np.column_stack([tan_nodes, np.zeros(len(tan_nodes))])
    gb = g_plus_heat(x, bnd, t, spec)
    total = gb.value @ tan_w
    err = gb.error @ tan_w
    for yn, wn in zip(ny, wy):
        pts = np.column_stack([tan_nodes, np.full(len(tan_nodes), yn)])
        gv = g_plus_heat(x, pts, t, spec)
        total += wn * (gv.value @ tan_w)
        err += wn * (gv.error @ tan_w)
    return float(total), float(err)


def g_plus_mass(x, t: float, spec: QuadratureSpec = DEFAULT_GRADED,
                panels: int = 4, nodes: int = 16) -> KernelValue:
    """Boundary plus interior integral of ``g_plus_heat(x, ., t)``.

    Both integrals are truncated to a box of half-width ``R`` about ``x``
    chosen so the Gaussian tail is below 1e-10; the tail bound is added to
    the error field, together with the time quadrature error and the change
    against the spatial rule with half the nodes per panel.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n not in (2, 3) or x[-1] < 0:
        raise DomainError("need a point of the closed half space")
    width = np.sqrt(4 * t * 30.0)
    r_tan = width
    r_nor = x[-1] + t + width
    total, err = _box_mass(x, t, spec, r_tan, r_nor, panels, nodes)
    coarse, _ = _box_mass(x, t, spec, r_tan, r_nor, panels, max(2, nodes // 2))
    tail = 2 * n * special.erfc(width / np.sqrt(4 * t)) * (1.0 + r_nor / np.sqrt(t))
    return KernelValue(total, err + abs(total - coarse) + float(tail))

