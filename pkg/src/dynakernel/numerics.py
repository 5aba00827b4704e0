"""Special functions and quadrature rules used by every kernel evaluation.

Bessel values come from :func:`scipy.special.jv`; zeros of :math:`J_\\nu`
are located here by interlacing from a base order and polished with a
safeguarded Newton iteration.  Quadrature rules are plain ``(nodes,
weights)`` arrays so they can be shared freely between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np
from scipy import special

from .errors import (
    DomainError,
    IntegrandError,
    RootFindError,
    UnsupportedOrderError,
)

__all__ = [
    "SpecialValue",
    "KernelValue",
    "QuadratureSpec",
    "DEFAULT_INTERVAL",
    "DEFAULT_GRADED",
    "caloric_defect",
    "boundary_defect",
    "observed_orders",
    "bessel_j",
    "bessel_j_zero",
    "bessel_j_zeros",
    "bessel_j_zero_table",
    "newton_bracketed",
    "safeguarded_newton",
    "legendre_p",
    "legendre_table",
    "gauss_legendre",
    "interval_rule",
    "integrate_interval",
    "integrate_interval_batch",
    "sphere_quadrature",
    "sphere_area",
    "ball_volume",
    "ball_quadrature",
    "polar_ball_quadrature",
]


class SpecialValue(NamedTuple):
    value: float
    error: float


class KernelValue(NamedTuple):
    """Kernel value with its quadrature/truncation error (0 if closed form)."""

    value: float
    error: float = 0.0


@dataclass(frozen=True)
class QuadratureSpec:
    """Rule family and size for one-dimensional integrals.

    ``kind`` is one of ``"gauss-legendre"``, ``"trapezoid-periodic"``,
    ``"composite-midpoint"`` or ``"graded-gauss"``.  The two graded kinds
    refine geometrically (``ratio`` per panel, ``panels`` panels) toward
    ``singular_end`` (``"left"`` or ``"right"``); ``order`` is then the
    number of nodes per panel.
    """

    kind: str = "gauss-legendre"
    order: int = 32
    singular_end: str | None = None
    panels: int = 40
    ratio: float = 0.5

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DomainError(f"unknown quadrature kind {self.kind!r}")
        if int(self.order) < 1:
            raise DomainError("quadrature order must be a positive integer")
        if self.singular_end not in (None, "left", "right"):
            raise DomainError("singular_end must be None, 'left' or 'right'")
        if not 0.0 < self.ratio < 1.0 or self.panels < 1:
            raise DomainError("graded rule needs 0 < ratio < 1 and panels >= 1")

    def halved(self) -> "QuadratureSpec":
        return QuadratureSpec(self.kind, max(1, self.order // 2),
                              self.singular_end, self.panels, self.ratio)


_KINDS = ("gauss-legendre", "trapezoid-periodic", "composite-midpoint", "graded-gauss")

DEFAULT_INTERVAL = QuadratureSpec("gauss-legendre", 32)
# time convolutions whose integrand varies on the scale t - s -> 0
DEFAULT_GRADED = QuadratureSpec("graded-gauss", 10, singular_end="right")


# --------------------------------------------------------------------------
# Bessel functions

def _check_order(order: float) -> float:
    order = float(order)
    if order < 0 or not float(2 * order).is_integer():
        raise UnsupportedOrderError(
            f"order {order} is not a nonnegative integer or half-integer")
    return order


def bessel_j(order: float, argument: float) -> SpecialValue:
    """:math:`J_\\nu(x)` for integer or half-integer ``order``."""
    order = _check_order(order)
    x = float(argument)
    if x < 0 or x > 1e4:
        raise DomainError(f"argument {x} outside [0, 1e4]")
    value = float(special.jv(order, x))
    return SpecialValue(value, 2e-16 * max(1.0, abs(value)) * (1.0 + x / 100.0))


def safeguarded_newton(f: Callable[[float], float], df: Callable[[float], float],
                       a: float, b: float, tol: float = 4e-16,
                       maxiter: int = 200) -> float:
    """Root of ``f`` in the sign-change bracket ``[a, b]``.

    Newton steps are taken whenever they land inside the current bracket
    and shrink it fast enough; otherwise the iteration bisects.
    """
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if np.sign(fa) == np.sign(fb):
        raise RootFindError("no sign change on bracket", bracket=(a, b),
                            values=(fa, fb))
    x = 0.5 * (a + b)
    width = b - a
    for _ in range(maxiter):
        fx = f(x)
        if fx == 0.0:
            return x
        if np.sign(fx) == np.sign(fa):
            a, fa = x, fx
        else:
            b = x
        d = df(x)
        step = fx / d if d != 0.0 else np.inf
        x_new = x - step
        if not (min(a, b) <= x_new <= max(a, b)) or abs(b - a) > 0.5 * width:
            x_new = 0.5 * (a + b)
            step = x - x_new
        width = b - a
        x = x_new
        if abs(step) <= tol * max(1.0, abs(x)) or b - a <= tol * max(1.0, abs(x)):
            return x
    raise RootFindError("safeguarded Newton did not converge", bracket=(a, b))


def newton_bracketed(f: Callable[[np.ndarray], np.ndarray],
                     df: Callable[[np.ndarray], np.ndarray],
                     a, b, tol: float = 1e-15, maxiter: int = 200) -> np.ndarray:
    """Vectorised safeguarded Newton over many sign-change brackets at once."""
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    fa, fb = f(a), f(b)
    if np.any(np.sign(fa) == np.sign(fb)):
        bad = int(np.argmax(np.sign(fa) == np.sign(fb)))
        raise RootFindError("no sign change on bracket",
                            bracket=(float(a[bad]), float(b[bad])))
    x = 0.5 * (a + b)
    done = np.zeros(a.shape, dtype=bool)
    for _ in range(maxiter):
        fx = f(x)
        left = np.sign(fx) == np.sign(fa)
        a = np.where(left, x, a)
        fa = np.where(left, fx, fa)
        b = np.where(left, b, x)
        d = df(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_new = x - fx / d
        bisect = ~((a <= x_new) & (x_new <= b))
        x_new = np.where(bisect, 0.5 * (a + b), x_new)
        scale = np.maximum(1.0, np.abs(x_new))
        converged = (np.abs(x_new - x) <= tol * scale) | (b - a <= tol * scale) | (fx == 0)
        # finished entries are frozen so ulp-level cycling cannot undo them
        x = np.where(done | (fx == 0), x, x_new)
        done |= converged
        if done.all():
            return x
    bad = int(np.argmin(done))
    raise RootFindError("safeguarded Newton did not converge",
                        bracket=(float(a[bad]), float(b[bad])))


def _polish_zeros(nu: float, a, b) -> np.ndarray:
    try:
        return newton_bracketed(lambda x: special.jv(nu, x),
                                lambda x: special.jvp(nu, x), a, b)
    except RootFindError as exc:
        raise RootFindError(f"zero of J_{nu} not found: {exc}", order=nu,
                            **exc.info) from exc


@lru_cache(maxsize=64)
def _zero_chain(base: float, steps: int, count: int):
    """Zeros of ``J_{base + i}`` for ``i = 0..steps``; level ``i`` holds
    ``count + steps - i`` zeros."""
    total = count + steps
    k = np.arange(1, total + 1, dtype=float)
    if base == 0.5:
        # J_{1/2}(x) is proportional to sin(x)/sqrt(x)
        zeros = np.pi * k
    else:
        # zeros of J_0 sit in ((k - 1/2) pi, k pi)
        zeros = _polish_zeros(0.0, (k - 0.5) * np.pi, k * np.pi)
    levels = [zeros]
    for i in range(1, steps + 1):
        # interlacing: j_{nu,k} < j_{nu+1,k} < j_{nu,k+1}
        zeros = _polish_zeros(base + i, zeros[:-1], zeros[1:])
        levels.append(zeros)
    for z in levels:
        z.setflags(write=False)
    return tuple(levels)


def bessel_j_zero_table(base: float, lmax: int, count: int):
    """Zeros ``j_{base+l, k}``, ``k <= count``, for ``l = 0..lmax`` in one sweep."""
    levels = _zero_chain(float(base), int(lmax), int(count))
    return [z[:count] for z in levels]


def bessel_j_zeros(order: float, count: int) -> np.ndarray:
    """First ``count`` positive zeros of :math:`J_\\nu`, increasing."""
    order = _check_order(order)
    if count < 1 or count > 500:
        raise DomainError("zero count must lie in [1, 500]")
    base = order % 1.0
    steps = int(round(order - base))
    return _zero_chain(base, steps, int(count))[steps][:count]


def bessel_j_zero(order: float, index: int) -> float:
    """The ``index``-th positive zero :math:`j_{\\nu,k}` of :math:`J_\\nu`."""
    return float(bessel_j_zeros(order, index)[index - 1])


# --------------------------------------------------------------------------
# Legendre polynomials

def legendre_table(lmax: int, x) -> np.ndarray:
    """Array of shape ``(lmax + 1,) + x.shape`` holding ``P_0 .. P_lmax``."""
    x = np.asarray(x, dtype=float)
    out = np.empty((lmax + 1,) + x.shape)
    out[0] = 1.0
    if lmax >= 1:
        out[1] = x
    for l in range(1, lmax):
        out[l + 1] = ((2 * l + 1) * x * out[l] - l * out[l - 1]) / (l + 1)
    return out


def legendre_p(degree: int, argument):
    if degree < 0 or degree > 200:
        raise DomainError("Legendre degree must lie in [0, 200]")
    x = np.asarray(argument, dtype=float)
    if np.any(np.abs(x) > 1.0 + 1e-14):
        raise DomainError("Legendre argument outside [-1, 1]")
    value = legendre_table(degree, np.clip(x, -1.0, 1.0))[degree]
    return float(value) if value.ndim == 0 else value


# --------------------------------------------------------------------------
# Interval rules

@lru_cache(maxsize=None)
def gauss_legendre(m: int):
    """Gauss-Legendre nodes and weights on ``[0, 1]``."""
    x, w = np.polynomial.legendre.leggauss(int(m))
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    # put the rounding defect on the central weight so the (exact) sum is 1
    w[len(w) // 2] += 1.0 - math.fsum(w)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _graded_panels(a, b, spec):
    length = b - a
    edges = length * spec.ratio ** np.arange(spec.panels)
    edges = np.concatenate([edges, [0.0]])[::-1]     # 0, tiny, ..., length
    if spec.singular_end == "right":
        return b - edges[::-1]
    return a + edges


def interval_rule(a: float, b: float, spec: QuadratureSpec = DEFAULT_INTERVAL):
    """Nodes and weights of ``spec`` on ``[a, b]``."""
    if not b > a:
        raise DomainError("interval needs a < b")
    m = int(spec.order)
    if spec.kind == "gauss-legendre":
        x, w = gauss_legendre(m)
        return a + (b - a) * x, (b - a) * w
    if spec.kind == "trapezoid-periodic":
        h = (b - a) / m
        return a + h * np.arange(m), np.full(m, h)
    if spec.singular_end is None:
        edges = np.linspace(a, b, spec.panels + 1)
    else:
        edges = _graded_panels(a, b, spec)
    lo, hi = edges[:-1], edges[1:]
    if spec.kind == "graded-gauss":
        x, w = gauss_legendre(m)
    else:
        x = (np.arange(m) + 0.5) / m
        w = np.full(m, 1.0 / m)
    nodes = lo[:, None] + (hi - lo)[:, None] * x[None, :]
    weights = (hi - lo)[:, None] * w[None, :]
    return nodes.ravel(), weights.ravel()


def integrate_interval(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                       spec: QuadratureSpec = DEFAULT_INTERVAL) -> SpecialValue:
    """Integrate a vectorised ``f`` over ``[a, b]``.

    The error estimate compares against the same rule at half the order,
    floored at a few ulps of the absolute integral.
    """

    def apply(s):
        nodes, weights = interval_rule(a, b, s)
        values = np.asarray(f(nodes), dtype=float)
        bad = ~np.isfinite(values)
        if bad.any():
            node = float(nodes[np.argmax(bad)])
            raise IntegrandError(f"non-finite integrand at node {node!r}", node=node)
        return math.fsum(weights * values), float(np.abs(weights) @ np.abs(values))

    value, mass = apply(spec)
    if spec.order > 1:
        coarse, _ = apply(spec.halved())
        error = abs(value - coarse)
    else:
        error = abs(value)
    return SpecialValue(value, max(error, 8 * np.finfo(float).eps * mass))


def integrate_interval_batch(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                             spec: QuadratureSpec = DEFAULT_INTERVAL):
    """Vector version of :func:`integrate_interval`.

    ``f`` maps the node array of shape ``(m,)`` to values of shape
    ``(..., m)``.  Returns ``(values, errors)`` with the leading shape.
    """

    def apply(s):
        nodes, weights = interval_rule(a, b, s)
        values = np.asarray(f(nodes), dtype=float)
        if not np.all(np.isfinite(values)):
            bad = np.nonzero(~np.isfinite(values))[-1][0]
            node = float(nodes[bad])
            raise IntegrandError(f"non-finite integrand at node {node!r}", node=node)
        return values @ weights, np.abs(values) @ np.abs(weights)

    value, mass = apply(spec)
    if spec.order > 1:
        error = np.abs(value - apply(spec.halved())[0])
    else:
        error = np.abs(value)
    return value, np.maximum(error, 8 * np.finfo(float).eps * mass)


# --------------------------------------------------------------------------
# Sphere and ball rules

def sphere_area(dim: int) -> float:
    return {2: 2 * np.pi, 3: 4 * np.pi}[_check_dim(dim)]


def ball_volume(dim: int) -> float:
    return sphere_area(dim) / dim


def _check_dim(dim):
    if dim not in (2, 3):
        raise DomainError(f"dimension {dim} not supported (2 or 3)")
    return dim


@lru_cache(maxsize=None)
def sphere_quadrature(dim: int, order: int | None = None):
    """Nodes (unit vectors) and weights on the unit sphere of ``R^dim``.

    ``dim == 2``: ``order`` equispaced angles (default 256).
    ``dim == 3``: Gauss-Legendre in the polar cosine with ``order`` nodes
    times ``2 * order`` azimuths (default order 32).
    """
    _check_dim(dim)
    if order is None:
        order = 256 if dim == 2 else 32
    order = int(order)
    if order < 1:
        raise DomainError("sphere order must be positive")
    if dim == 2:
        theta = 2 * np.pi * np.arange(order) / order
        nodes = np.column_stack([np.cos(theta), np.sin(theta)])
        weights = np.full(order, 2 * np.pi / order)
    else:
        x, w = np.polynomial.legendre.leggauss(order)
        phi = 2 * np.pi * np.arange(2 * order) / (2 * order)
        ct, ph = np.meshgrid(x, phi, indexing="ij")
        st = np.sqrt(1.0 - ct**2)
        nodes = np.column_stack([(st * np.cos(ph)).ravel(),
                                 (st * np.sin(ph)).ravel(), ct.ravel()])
        weights = np.outer(w, np.full(2 * order, np.pi / order)).ravel()
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


@lru_cache(maxsize=None)
def ball_quadrature(dim: int, radial_order: int = 48, sphere_order: int | None = None):
    """Product rule on the unit ball: radii, directions and weights.

    Returns ``(radii, directions, weights)`` with ``weights`` of shape
    ``(radial_order, n_dirs)``; the point for entry ``(i, j)`` is
    ``radii[i] * directions[j]``.
    """
    r, wr = gauss_legendre(radial_order)
    dirs, ws = sphere_quadrature(dim, sphere_order)
    weights = np.outer(wr * r ** (dim - 1), ws)
    weights.setflags(write=False)
    return r, dirs, weights


def polar_ball_quadrature(center, radial_order: int = 48, sphere_order: int | None = None,
                          support_radius: float | None = None):
    """Rule for ``int_B f(y) dy`` with ``f`` singular at ``center``.

    Polar coordinates about ``center`` cancel the ``|y - c|^{1-n}``
    singularity; the radial variable is graded as ``rho = rho_max u^2`` so
    logarithmic factors are also resolved.  With ``support_radius`` each
    ray is cut to the ball ``|y| <= support_radius`` where ``f`` lives, so
    no radial panel straddles the edge of the support.  Returns
    ``(points, weights)``.
    """
    c = np.asarray(center, dtype=float)
    dim = _check_dim(c.size)
    if c @ c >= 1.0:
        raise DomainError("polar rule needs an interior centre")
    dirs, ws = sphere_quadrature(dim, sphere_order)
    cw = dirs @ c
    lo = np.zeros(len(dirs))
    hi = -cw + np.sqrt(cw**2 + 1.0 - c @ c)
    if support_radius is not None and support_radius < 1.0:
        disc = cw**2 - (c @ c - support_radius**2)
        sq = np.sqrt(np.maximum(disc, 0.0))
        lo = np.maximum(-cw - sq, 0.0)
        hi = np.where(disc > 0, np.clip(-cw + sq, 0.0, hi), 0.0)
        keep = hi > lo                   # rays that miss the support carry nothing
        dirs, ws, lo, hi = dirs[keep], ws[keep], lo[keep], hi[keep]
    u, wu = gauss_legendre(radial_order)
    span = (hi - lo)[:, None]
    rho = lo[:, None] + span * u[None, :] ** 2
    jac = span * 2 * u[None, :] * rho ** (dim - 1)
    points = c[None, None, :] + rho[..., None] * dirs[:, None, :]
    weights = ws[:, None] * wu[None, :] * jac
    return points.reshape(-1, dim), weights.ravel()


# --------------------------------------------------------------------------
# finite-difference residuals

def caloric_defect(u, x, t: float, h: float, k: float) -> float:
    """Centred ``(d_t - Delta) u`` with steps ``h`` (space) and ``k`` (time)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    u0 = u(x, t)
    dt = (u(x, t + k) - u(x, t - k)) / (2 * k)
    lap = 0.0
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        lap += (u(x + e, t) - 2 * u0 + u(x - e, t)) / h**2
    return dt - lap


def boundary_defect(u, x, t: float, h: float, k: float, normal=None) -> float:
    """``(d_t + d_nu) u`` at a boundary point, one-sided in both variables.

    The normal derivative looks inward (backward difference along ``normal``,
    default ``x / |x|``); the time derivative is a forward difference so the
    stencil never needs ``t - k``.
    """
    x = np.asarray(x, dtype=float)
    nu = x / np.linalg.norm(x) if normal is None else np.asarray(normal, dtype=float)
    u0 = u(x, t)
    return (u(x, t + k) - u0) / k + (u0 - u(x - h * nu, t)) / h


def observed_orders(defects, ratio: float = 2.0) -> np.ndarray:
    """``log_ratio(|d_i| / |d_{i+1}|)`` for defects at steps shrinking by ``ratio``."""
    d = np.abs(np.asarray(defects, dtype=float))
    return np.log(d[:-1] / d[1:]) / np.log(ratio)
