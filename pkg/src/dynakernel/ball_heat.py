"""Dirichlet heat kernel of the unit ball and its boundary-flux kernels.

The kernel is summed from the Dirichlet eigenbasis

    Gamma1(x, y, t) = sum_{l,k} exp(-lam_lk t) R_lk(|x|) R_lk(|y|) A_l(x^ . y^)

where ``R_lk`` is the normalised radial Bessel profile and ``A_l`` the
angular reproducing kernel of degree ``l`` (addition theorem).  Series
with a time convolution converge slowly when summed term by term, so
each convolution is split as

    int_0^t e^{-lam (t-s)} a(s) ds = a(t) (1 - e^{-lam t}) / lam
                                     + int_0^t e^{-lam (t-s)} (a(s) - a(t)) ds

and the mode sum of ``a(t)/lam`` is replaced by its closed form (Poisson
kernel, harmonic extension, Green's function derivative).  Only the
remainder is summed over modes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import special

from .ball_laplace import (
    BOUNDARY_TOL,
    BoundaryFunction,
    harmonic_extension,
    norm,
    poisson_ball,
)
from .errors import DomainError, OriginSingularityError, TruncationError
from .halfspace import heat_kernel_free
from .numerics import (
    DEFAULT_GRADED,
    KernelValue,
    QuadratureSpec,
    ball_quadrature,
    bessel_j_zero_table,
    gauss_legendre,
    interval_rule,
    legendre_table,
    sphere_quadrature,
)

__all__ = [
    "Truncation",
    "EigenPair",
    "EigenBasis",
    "dirichlet_eigenbasis",
    "angular_factor",
    "gamma1",
    "gamma1_dr",
    "e1",
    "f1",
    "h1",
    "corrector_phi1",
    "bound_h",
    "bound_l",
    "ball_pairing",
    "boundary_pairing_f1",
    "boundary_convolution",
    "decompose_reconstruct",
    "dirichlet_dynamical_flat_solution",
    "SpaceTimeFunction",
]

TAIL_TARGET = 1e-8
_EXTRA = 20          # extra degrees and radial indices used to bound the tail


@dataclass(frozen=True)
class Truncation:
    """Cutoffs of an eigen-series: degrees ``l <= lmax``, indices ``k <= kmax``."""

    lmax: int = 40
    kmax: int = 60

    def __post_init__(self):
        if not 0 <= self.lmax <= 100 or not 1 <= self.kmax <= 200:
            raise DomainError("cutoffs must satisfy 0 <= lmax <= 100, 1 <= kmax <= 200")


@dataclass(frozen=True)
class EigenPair:
    eigenvalue: float
    degree: int
    index: int
    norm_constant: float
    boundary_flux: float


def angular_factor(n: int, lmax: int, c) -> np.ndarray:
    """Reproducing kernel of degree-``l`` harmonics at ``cos(angle) = c``.

    Shape ``(lmax + 1,) + c.shape``.  ``n = 2``: ``1/(2 pi)`` then
    ``cos(l angle)/pi``; ``n = 3``: ``(2l + 1) P_l(c) / (4 pi)``.
    """
    c = np.clip(np.asarray(c, dtype=float), -1.0, 1.0)
    if n == 2:
        out = np.empty((lmax + 1,) + c.shape)
        out[0] = 1.0
        if lmax >= 1:
            out[1] = c
        for l in range(1, lmax):
            out[l + 1] = 2 * c * out[l] - out[l - 1]     # Chebyshev recurrence
        out[1:] /= np.pi
        out[0] /= 2 * np.pi
        return out
    l = np.arange(lmax + 1).reshape((-1,) + (1,) * c.ndim)
    return (2 * l + 1) / (4 * np.pi) * legendre_table(lmax, c)


class EigenBasis:
    """Dirichlet eigenbasis of the unit ball, organised as ``(l, k)`` grids.

    Immutable after construction.  ``lam``, ``zeros``, ``coef`` and
    ``flux`` are arrays of shape ``(lmax + 1, kmax)``.
    """

    def __init__(self, n: int, trunc: Truncation = Truncation()):
        if n not in (2, 3):
            raise DomainError(f"dimension {n} not supported")
        self.n = n
        self.trunc = trunc
        self.lmax, self.kmax = trunc.lmax, trunc.kmax
        self.base_order = 0.0 if n == 2 else 0.5
        table = bessel_j_zero_table(self.base_order, self.lmax + _EXTRA, self.kmax + _EXTRA)
        full = np.array([z[: self.kmax + _EXTRA] for z in table])
        self._full_zeros = full
        self.zeros = np.ascontiguousarray(full[: self.lmax + 1, : self.kmax])
        self.degrees = np.arange(self.lmax + 1)
        self.orders = self.degrees + self.base_order
        self.lam = self.zeros**2
        nu1 = self.orders[:, None] + 1.0
        self.coef = np.sqrt(2.0) / special.jv(nu1, self.zeros)
        self.flux = np.sqrt(2.0) * self.zeros
        for a in (self.zeros, self.lam, self.coef, self.flux):
            a.setflags(write=False)
        self._check_normalisation()
        self.t_min = self._find_t_min()

    # -- radial profiles -------------------------------------------------
    def radial(self, r, zeros=None, coef=None, orders=None) -> np.ndarray:
        """Profiles ``R_lk(r)``, shape ``(lmax + 1, kmax) + r.shape``.

        Exactly zero for ``r >= 1 - 1e-12``.
        """
        zeros = self.zeros if zeros is None else zeros
        coef = self.coef if coef is None else coef
        orders = self.orders if orders is None else orders
        r = np.asarray(r, dtype=float)
        ex = (Ellipsis,) + (None,) * r.ndim
        arg = zeros[ex] * r
        deg = orders[(slice(None), None) + (None,) * r.ndim]
        if self.n == 2:
            val = special.jv(deg, arg)
        else:
            val = np.sqrt(2 * zeros[ex] / np.pi) * special.spherical_jn(
                (deg - 0.5).astype(int), arg)
        out = coef[ex] * val
        return np.where(r >= 1.0 - BOUNDARY_TOL, 0.0, out)

    def radial_dr(self, r) -> np.ndarray:
        """Derivatives ``R_lk'(r)``, same layout as :meth:`radial`."""
        r = np.asarray(r, dtype=float)
        ex = (Ellipsis,) + (None,) * r.ndim
        arg = self.zeros[ex] * r
        deg = self.orders[(slice(None), None) + (None,) * r.ndim]
        if self.n == 2:
            val = self.zeros[ex] * special.jvp(deg, arg)
        else:
            val = np.sqrt(2 * self.zeros[ex] / np.pi) * self.zeros[ex] * special.spherical_jn(
                (deg - 0.5).astype(int), arg, derivative=True)
        return self.coef[ex] * val

    def angular(self, c) -> np.ndarray:
        return angular_factor(self.n, self.lmax, c)

    # -- consistency and truncation -------------------------------------
    def _check_normalisation(self):
        u, w = gauss_legendre(200)
        kk = np.arange(min(self.kmax, 20))        # resolved by a 200-node rule
        for l in (0, self.lmax):
            sub = _SubBasis(self, np.full(kk.size, l), kk)
            mass = (sub.radial(u) ** 2 * u ** (self.n - 1)) @ w
            err = np.max(np.abs(mass - 1.0))
            if err > 1e-8:
                raise DomainError("radial normalisation cross-check failed",
                                  degree=l, discrepancy=float(err))

    @cached_property
    def _dropped(self):
        full = self._full_zeros
        L, K = full.shape
        ll = np.arange(L)[:, None] * np.ones((1, K), dtype=int)
        kk = np.ones((L, 1), dtype=int) * np.arange(K)[None, :]
        mask = (ll > self.lmax) | (kk >= self.kmax)
        z = full[mask]
        nu = ll[mask] + self.base_order
        rmax = np.sqrt(2.0) / np.abs(special.jv(nu + 1, z))
        if self.n == 3:
            rmax = rmax * np.sqrt(2 * z / np.pi)
            amax = (2 * ll[mask] + 1) / (4 * np.pi)
        else:
            amax = np.where(ll[mask] == 0, 0.5, 1.0) / np.pi
        return z**2, rmax, amax, z

    def tail(self, t: float, kind: str = "value") -> float:
        """Bound on the dropped part of a series at time ``t``.

        ``kind``: ``"value"`` (kernel), ``"flux"`` (boundary flux kernel),
        ``"dr"`` (radial derivative), ``"integrated"`` (flux kernel
        integrated in time, weight ``1/lam``) or ``"dr_integrated"``.
        """
        lam, rmax, amax, z = self._dropped
        decay = np.exp(-lam * t)
        if kind == "value":
            w = rmax**2
        elif kind == "flux":
            w = rmax * np.sqrt(2.0) * z
        elif kind == "dr":
            w = rmax**2 * z
        elif kind == "integrated":
            w = rmax * np.sqrt(2.0) * z / lam
        elif kind == "dr_integrated":
            w = rmax**2 * z / lam
        else:
            raise DomainError(f"unknown tail kind {kind!r}")
        return float(np.sum(decay * w * amax))

    def _find_t_min(self) -> float:
        lo, hi = 1e-7, 10.0
        if self.tail(hi) >= TAIL_TARGET:
            return hi
        for _ in range(60):
            mid = np.sqrt(lo * hi)
            if self.tail(mid) < TAIL_TARGET:
                hi = mid
            else:
                lo = mid
        return hi

    def require(self, t: float):
        if not t > 0:
            raise DomainError("t must be positive")
        if t < self.t_min:
            scale = np.sqrt(self.t_min / t)
            raise TruncationError(
                f"t = {t:g} below the basis threshold t_min = {self.t_min:.4g}",
                t_min=self.t_min,
                required_kmax=int(np.ceil(self.kmax * scale)),
                required_lmax=int(np.ceil((self.lmax + 1) * scale)),
            )

    # -- export ----------------------------------------------------------
    @cached_property
    def pairs(self) -> list[EigenPair]:
        out = [EigenPair(float(self.lam[l, k]), l, k + 1, float(abs(self.coef[l, k])),
                         float(self.flux[l, k]))
               for l in range(self.lmax + 1) for k in range(self.kmax)]
        out.sort(key=lambda p: (p.eigenvalue, p.degree, p.index))
        return out

    def to_records(self):
        return [{"n": self.n, "l": p.degree, "k": p.index, "lambda": p.eigenvalue,
                 "norm_constant": p.norm_constant, "boundary_flux": p.boundary_flux,
                 "boundary_value": 0.0}
                for p in self.pairs]

    def to_json(self) -> str:
        return json.dumps({"basis": "dirichlet", "n": self.n, "lmax": self.lmax,
                           "kmax": self.kmax, "t_min": self.t_min,
                           "pairs": self.to_records()}, indent=1)


_BASES: dict = {}


def dirichlet_eigenbasis(n: int, trunc: Truncation = Truncation()) -> EigenBasis:
    """Cached constructor (bases are immutable, so sharing is safe)."""
    key = (n, trunc.lmax, trunc.kmax)
    if key not in _BASES:
        _BASES[key] = EigenBasis(n, trunc)
    return _BASES[key]


# --------------------------------------------------------------------------
# geometry helpers

def _unit(x):
    x = np.asarray(x, dtype=float)
    r = norm(x)
    safe = np.where(r > 0, r, 1.0)
    return x / safe[..., None], r


def _cos(x, y):
    ux, _ = _unit(x)
    uy, _ = _unit(y)
    return np.sum(ux * uy, axis=-1)


def _check_ball(*points):
    for p in points:
        if np.any(norm(p) > 1.0 + BOUNDARY_TOL):
            raise DomainError("point outside the closed unit ball")


def _check_sphere(y):
    if np.any(np.abs(norm(y) - 1.0) > 1e-9):
        raise DomainError("second argument must lie on the unit sphere")


def _kv(value, error):
    if np.ndim(value) == 0:
        return KernelValue(float(value), float(error))
    return KernelValue(np.asarray(value), np.broadcast_to(error, np.shape(value)).copy())


def _chunks(npts, size=512):
    for i in range(0, npts, size):
        yield slice(i, min(npts, i + size))


def _pointwise(basis, x, y, fn):
    """Apply ``fn(rx, ry, A)`` over broadcast point batches in chunks."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    shape = np.broadcast_shapes(x.shape[:-1], y.shape[:-1])
    xb = np.broadcast_to(x, shape + x.shape[-1:]).reshape(-1, x.shape[-1])
    yb = np.broadcast_to(y, shape + y.shape[-1:]).reshape(-1, y.shape[-1])
    out = np.empty(len(xb))
    for sl in _chunks(len(xb)):
        out[sl] = fn(norm(xb[sl]), norm(yb[sl]), basis.angular(_cos(xb[sl], yb[sl])))
    return out.reshape(shape) if shape else out[0]


# --------------------------------------------------------------------------
# kernels

def gamma1(basis: EigenBasis, x, y, t: float) -> KernelValue:
    """Dirichlet heat kernel; exactly 0 when either point is on the sphere."""
    basis.require(t)
    _check_ball(x, y)
    decay = np.exp(-basis.lam * t)

    def fn(rx, ry, ang):
        # multiply the two profiles first so that swapping x and y is bitwise exact
        radial = np.einsum("lk,lkp->lp", decay, basis.radial(rx) * basis.radial(ry))
        return np.sum(radial * ang, axis=0)

    return _kv(_pointwise(basis, x, y, fn), basis.tail(t))


def gamma1_dr(basis: EigenBasis, x, y, t: float) -> KernelValue:
    """Radial derivative ``e_x . grad_x Gamma1`` (termwise, closed form)."""
    basis.require(t)
    _check_ball(x, y)
    if np.any(norm(x) == 0):
        raise OriginSingularityError("radial direction undefined at the origin")
    decay = np.exp(-basis.lam * t)

    def fn(rx, ry, ang):
        radial = np.einsum("lk,lkp,lkp->lp", decay, basis.radial_dr(rx), basis.radial(ry))
        return np.sum(radial * ang, axis=0)

    return _kv(_pointwise(basis, x, y, fn), basis.tail(t, "dr"))


def e1(basis: EigenBasis, x, y, t: float) -> KernelValue:
    """Outward flux kernel ``-d/dnu_y Gamma1(x, y, t)`` for ``y`` on the sphere."""
    basis.require(t)
    _check_ball(x)
    _check_sphere(y)
    weight = np.exp(-basis.lam * t) * basis.flux

    def fn(rx, ry, ang):
        radial = np.einsum("lk,lkp->lp", weight, basis.radial(rx))
        return np.sum(radial * ang, axis=0)

    return _kv(_pointwise(basis, x, y, fn), basis.tail(t, "flux"))


def f1(basis: EigenBasis, x, y, t: float) -> KernelValue:
    """Time integral of :func:`e1` over ``[0, t]`` in closed form.

    The stationary part ``sum R flux A / lam`` is the Poisson kernel, so
    ``F1 = P1(x, y) - sum exp(-lam t) R(|x|) flux A / lam``.
    """
    basis.require(t)
    _check_ball(x)
    _check_sphere(y)
    weight = np.exp(-basis.lam * t) * basis.flux / basis.lam

    def fn(rx, ry, ang):
        radial = np.einsum("lk,lkp->lp", weight, basis.radial(rx))
        return -np.sum(radial * ang, axis=0)

    series = _pointwise(basis, x, y, fn)
    x = np.asarray(x, dtype=float)
    inside = norm(x) < 1.0 - BOUNDARY_TOL
    # on the sphere (away from y) both the Poisson kernel and the series vanish
    xs = np.where(inside[..., None], x, 0.0)
    stationary = np.where(inside, poisson_ball(xs, y), 0.0)
    return _kv(stationary + series, basis.tail(t, "integrated"))


WATSON_MIN_ZERO = 30.0     # modes with j >= this (and lam t >= 40) use the expansion
WATSON_TERMS = 4


def _euler_step(A, B, lam, q, n, c):
    """Apply ``c - D`` (``D = rho d/drho``) to ``A(u) R + B(u) D R``, ``u = rho^2``.

    Polynomials are lists of per-mode coefficient arrays; the Bessel ODE
    gives ``D^2 R = (2 - n) D R - (lam u - q) R``.
    """
    deg = max(len(A), len(B)) + 1
    A = A + [np.zeros_like(lam)] * (deg - len(A))
    B = B + [np.zeros_like(lam)] * (deg - len(B))
    dA = [2 * m * A[m] for m in range(deg)]
    dB = [2 * m * B[m] for m in range(deg)]
    newA = [-(dA[m] - (lam * B[m - 1] if m else 0.0) + q * B[m]) for m in range(deg)]
    newB = [-(A[m] + dB[m] + (2 - n) * B[m]) for m in range(deg)]
    return ([c * A[m] + newA[m] for m in range(deg)],
            [c * B[m] + newB[m] for m in range(deg)])


def _poly(P, u):
    return sum(p * u**m for m, p in enumerate(P))


def _path_convolution(basis, r, t, spec, c=0.0, alpha=1.0, beta=0.0):
    """Per-mode remainders ``int_0^t e^{-lam(t-s)} (a(s) - a(t)) ds``.

    ``a(s) = e^{c s} (alpha R + beta rho R')(rho)`` at ``rho = r e^{-s}``.
    Low modes use the graded rule; fast-decaying modes use the Watson
    expansion ``sum_n (-1)^n a^(n)(t) / lam^(n+1)``, whose derivatives follow
    from the Bessel ODE.  Returns ``(remainder, a(t), error)``.
    """
    lam = basis.lam
    rho_t = r * np.exp(-t)
    Rt, dRt = basis.radial(rho_t), basis.radial_dr(rho_t)
    at = np.exp(c * t) * (alpha * Rt + beta * rho_t * dRt)
    rem = np.zeros_like(lam)
    err = np.zeros_like(lam)

    high = (basis.zeros >= WATSON_MIN_ZERO) & (lam * t >= 40.0)
    if high.any():
        lh = lam[high]
        q = (basis.degrees[:, None] * (basis.degrees[:, None] + basis.n - 2)
             * np.ones_like(lam))[high]
        A, B = [alpha * np.ones_like(lh)], [beta * np.ones_like(lh)]
        total = np.zeros_like(lh)
        u = rho_t**2
        for k in range(1, WATSON_TERMS + 2):
            A, B = _euler_step(A, B, lh, q, basis.n, c)
            deriv = np.exp(c * t) * (_poly(A, u) * Rt[high] + _poly(B, u) * rho_t * dRt[high])
            term = (-1) ** k * deriv / lh ** (k + 1)
            if k <= WATSON_TERMS:
                total += term
            else:
                err[high] = np.abs(term)
        rem[high] = total

    low = ~high
    if low.any():
        li, ki = np.nonzero(low)
        lam_low = lam[li, ki]
        sub = _SubBasis(basis, li, ki)

        def remainder(sp):
            s, w = interval_rule(0.0, t, sp)
            rho = r * np.exp(-s)
            a = 0.0
            if alpha:
                a = a + alpha * sub.radial(rho)
            if beta:
                a = a + beta * rho * sub.radial_dr(rho)
            a = np.exp(c * s) * a
            kern = np.exp(-lam_low[:, None] * (t - s))
            return (kern * (a - at[li, ki][:, None])) @ w

        fine = remainder(spec)
        coarse = remainder(spec.halved())
        rem[li, ki] = fine
        err[li, ki] = np.abs(fine - coarse)
    return rem, at, err


class _SubBasis:
    """Radial profiles for a subset of ``(l, k)`` modes, evaluated on a grid."""

    def __init__(self, basis, li, ki):
        self.n = basis.n
        self.zeros = basis.zeros[li, ki][:, None]
        self.coef = basis.coef[li, ki][:, None]
        self.deg = basis.orders[li][:, None]

    def radial(self, rho):
        arg = self.zeros * rho[None, :]
        if self.n == 2:
            val = special.jv(self.deg, arg)
        else:
            val = np.sqrt(2 * self.zeros / np.pi) * special.spherical_jn(
                (self.deg - 0.5).astype(int), arg)
        return np.where(rho[None, :] >= 1.0 - BOUNDARY_TOL, 0.0, self.coef * val)

    def radial_dr(self, rho):
        arg = self.zeros * rho[None, :]
        if self.n == 2:
            val = self.zeros * special.jvp(self.deg, arg)
        else:
            val = np.sqrt(2 * self.zeros / np.pi) * self.zeros * special.spherical_jn(
                (self.deg - 0.5).astype(int), arg, derivative=True)
        return self.coef * val


def h1(basis: EigenBasis, x, y, t: float, spec: QuadratureSpec = DEFAULT_GRADED) -> KernelValue:
    """Flux kernel convolved along the contracting path ``x e^{-s}``.

    ``H1 = K1(x, y, t) - sum flux A R(|x|e^{-t}) e^{-lam t}/lam
    + sum flux A int_0^t e^{-lam(t-s)} (R(|x|e^{-s}) - R(|x|e^{-t})) ds``.
    """
    basis.require(t)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_ball(x)
    _check_sphere(y)
    if x.ndim != 1:
        return _stack([h1(basis, xi, yi, t, spec) for xi, yi in _pairs(x, y)], x, y)
    r = norm(x)
    rem, at, qerr = _path_convolution(basis, r, t, spec)
    ang = basis.angular(_cos(x, y) if r > 0 else np.zeros(y.shape[:-1]))
    stationary = poisson_ball(x * np.exp(-t), y)
    ang = ang.reshape(ang.shape[0], 1, -1)
    coeff = basis.flux * (rem - np.exp(-basis.lam * t) / basis.lam * at)
    contrib = coeff[..., None] * ang
    value = stationary + contrib.sum(axis=(0, 1))
    err = (np.sum(basis.flux * qerr * np.max(np.abs(ang), axis=(1, 2))[:, None])
           + _upper_half(contrib))
    if y.ndim == 1:
        value, err = value[0], err[0]
    return _kv(value, err + basis.tail(t, "integrated"))


def _upper_half(contrib):
    """Size of the contribution of the upper half of the modes, used as a
    truncation indicator for slowly converging sums."""
    L, K = contrib.shape[:2]
    mask = np.zeros((L, K), dtype=bool)
    mask[L // 2 + 1:, :] = True
    mask[:, K // 2:] = True
    return np.abs(np.sum(contrib[mask], axis=0))


def _pairs(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    shape = np.broadcast_shapes(x.shape[:-1], y.shape[:-1])
    xb = np.broadcast_to(x, shape + x.shape[-1:]).reshape(-1, x.shape[-1])
    yb = np.broadcast_to(y, shape + y.shape[-1:]).reshape(-1, y.shape[-1])
    return zip(xb, yb)


def _stack(values, x, y):
    shape = np.broadcast_shapes(np.shape(x)[:-1], np.shape(y)[:-1])
    v = np.array([kv.value for kv in values]).reshape(shape)
    e = np.array([kv.error for kv in values]).reshape(shape)
    return KernelValue(v, e)


# --------------------------------------------------------------------------
# pairings with data

def _sphere_nodes(n, order=None):
    return sphere_quadrature(n, order)


def angular_moments(basis: EigenBasis, x, values, nodes, weights) -> np.ndarray:
    """``c_l = sum_j w_j A_l(x^ . z_j) g(z_j)`` for sphere samples ``g``.

    ``values`` may carry leading batch axes: shape ``(..., nodes)``.
    """
    ang = basis.angular(_cos(x, nodes) if norm(x) > 0 else np.zeros(len(nodes)))
    return np.einsum("lj,...j->...l", ang * weights, values)


def ball_pairing(basis: EigenBasis, x, t: float, phi, radial_order: int = 48,
                 sphere_order: int | None = None) -> KernelValue:
    """``int_B Gamma1(x, y, t) phi(y) dy`` by product quadrature.

    The error field is the change against the half-order rule plus the
    series tail.
    """
    basis.require(t)
    x = np.asarray(x, dtype=float)
    _check_ball(x)
    phi = phi if callable(phi) else (lambda y, c=float(phi): np.full(len(y), c))

    def apply(ro, so):
        r, dirs, w = ball_quadrature(basis.n, ro, so)
        pts = r[:, None, None] * dirs[None, :, :]
        vals = np.asarray(phi(pts.reshape(-1, basis.n)), dtype=float).reshape(len(r), len(dirs))
        ang = basis.angular(_cos(x, dirs) if norm(x) > 0 else np.zeros(len(dirs)))
        # g_l(r_i) = sum_j A_l(x^.z_j) phi(r_i z_j) w_ij
        g = np.einsum("lj,ij,ij->li", ang, vals, w)
        coeff = np.einsum("lki,li->lk", basis.radial(r), g)
        return float(np.sum(np.exp(-basis.lam * t) * basis.radial(norm(x)) * coeff))

    so = sphere_order if sphere_order is not None else (128 if basis.n == 2 else 24)
    fine = apply(radial_order, so)
    coarse = apply(max(2, radial_order // 2), max(2, so // 2))
    return KernelValue(fine, abs(fine - coarse) + basis.tail(t))


def boundary_pairing_f1(basis: EigenBasis, x, t: float, phi_b, order: int | None = None
                        ) -> KernelValue:
    """``int_S F1(x, y, t) phi_b(y) dsigma_y``: harmonic extension minus the
    decaying modal part."""
    basis.require(t)
    x = np.asarray(x, dtype=float)
    _check_ball(x)
    phi_b = phi_b if callable(phi_b) else (lambda y, c=float(phi_b): np.full(len(y), c))
    nodes, w = _sphere_nodes(basis.n, order)
    c = angular_moments(basis, x, np.asarray(phi_b(nodes), dtype=float), nodes, w)
    decay = np.exp(-basis.lam * t) * basis.flux / basis.lam
    series = -float(np.sum(decay * basis.radial(norm(x)) * c[:, None]))
    if norm(x) >= 1.0 - BOUNDARY_TOL:
        stationary = KernelValue(0.0, 0.0)
        # at the boundary F1 vanishes away from y: no mass is carried
    else:
        stationary = harmonic_extension(BoundaryFunction(phi_b), x, order)
    return KernelValue(stationary.value + series,
                       stationary.error + basis.tail(t, "integrated"))


def boundary_convolution(basis: EigenBasis, x, t: float, data, spec: QuadratureSpec = DEFAULT_GRADED,
                         order: int | None = None) -> KernelValue:
    """``int_0^t int_S E1(x, z, t - s) g(z, s) dsigma_z ds`` for sphere data ``g``.

    ``data(nodes, s)`` returns the samples of ``g`` with shape
    ``(len(s), len(nodes))``.  The stationary part is the Poisson integral
    of ``g(., t)``.
    """
    basis.require(t)
    x = np.asarray(x, dtype=float)
    _check_ball(x)
    nodes, w = _sphere_nodes(basis.n, order)
    rx = basis.radial(norm(x))                               # (L, K)
    interior = norm(x) < 1.0 - BOUNDARY_TOL

    def part(sp):
        s, ws = interval_rule(0.0, t, sp)
        vals = np.asarray(data(nodes, np.append(s, t)), dtype=float)
        c = angular_moments(basis, x, vals, nodes, w)        # (m + 1, L)
        ct = c[-1]
        diff = c[:-1] - ct                                   # (m, L)
        kern = np.exp(-basis.lam[None] * (t - s)[:, None, None])   # (m, L, K)
        rem = np.einsum("m,mlk,ml->lk", ws, kern, diff)
        modal = basis.flux * rx * (rem - np.exp(-basis.lam * t) / basis.lam * ct[:, None])
        if interior:
            stationary = float(w @ (poisson_ball(x, nodes) * vals[-1]))
        else:
            stationary = 0.0
        return stationary + float(modal.sum()), float(_upper_half(modal))

    fine, indicator = part(spec)
    coarse, _ = part(spec.halved())
    return KernelValue(fine, abs(fine - coarse) + indicator + basis.tail(t, "integrated"))


def corrector_phi1(basis: EigenBasis, x, y, t: float, spec: QuadratureSpec = DEFAULT_GRADED,
                   order: int | None = None) -> KernelValue:
    """Caloric corrector: free-kernel boundary values fed through ``E1``.

    ``Gamma(x, y, t) - corrector`` reproduces ``Gamma1``.
    """
    y = np.asarray(y, dtype=float)
    _check_ball(y)

    def data(nodes, s):
        s = np.maximum(np.asarray(s, dtype=float), 1e-300)
        return heat_kernel_free(nodes[None, :, :], y, s[:, None])

    return boundary_convolution(basis, x, t, data, spec, order)


# --------------------------------------------------------------------------
# envelopes

def bound_h(x, y, t: float) -> float:
    """Two-sided envelope factor of the Dirichlet heat kernel."""
    if t <= 0:
        raise DomainError("t must be positive")
    rx, ry = norm(x), norm(y)
    d2 = np.sum((np.asarray(x, dtype=float) - np.asarray(y, dtype=float)) ** 2, axis=-1)
    first = np.minimum(1.0, (1 - rx) * (1 - ry) / t)
    second = np.minimum(1.0, (1 - rx) * d2 / t) * np.minimum(1.0, (1 - ry) * d2 / t)
    out = first + second
    return float(out) if np.ndim(out) == 0 else out


def bound_l(x, y, t: float) -> float:
    """Envelope factor of the boundary flux kernel (``y`` on the sphere)."""
    if t <= 0:
        raise DomainError("t must be positive")
    _check_sphere(y)
    rx = norm(x)
    d2 = np.sum((np.asarray(x, dtype=float) - np.asarray(y, dtype=float)) ** 2, axis=-1)
    out = (1 - rx) / t + d2 / t * np.minimum(1.0, (1 - rx) * d2 / t)
    return float(out) if np.ndim(out) == 0 else out


# --------------------------------------------------------------------------
# decomposition and the frozen-boundary solution

@dataclass(frozen=True)
class SpaceTimeFunction:
    """``f(points, t)`` with its caloric defect ``(d/dt - Delta) f``.

    Both callables take points of shape ``(m, n)`` and a scalar time.
    ``defect=None`` declares the function caloric.
    """

    func: object
    defect: object = None


def decompose_reconstruct(basis: EigenBasis, f: SpaceTimeFunction, x, t: float,
                          spec: QuadratureSpec = DEFAULT_GRADED,
                          radial_order: int = 48) -> KernelValue:
    """Right-hand side of the representation

        f(x, t) = int_B Gamma1 f(., 0) + int_0^t int_B Gamma1 (f_t - Delta f)
                  + int_0^t int_S E1 f ds.
    """
    basis.require(t)
    x = np.asarray(x, dtype=float)
    initial = ball_pairing(basis, x, t, lambda p: f.func(p, 0.0), radial_order)
    boundary = boundary_convolution(
        basis, x, t,
        lambda nodes, s: np.array([f.func(nodes, si) for si in np.atleast_1d(s)]), spec)
    value = initial.value + boundary.value
    err = initial.error + boundary.error
    if f.defect is not None:
        # Gamma1(., t - s) is only resolved for t - s >= t_min; the last
        # slab is weighted by the defect at the final time (smooth data)
        s, w = interval_rule(0.0, t - basis.t_min, QuadratureSpec("gauss-legendre", 16))
        vol = sum(wi * ball_pairing(basis, x, t - si,
                                    lambda p, si=si: f.defect(p, si), radial_order).value
                  for si, wi in zip(s, w))
        last = basis.t_min * _defect_at(f, x, t)
        value += vol + last
        err += abs(last)
    return KernelValue(float(value), float(err))


def _defect_at(f, x, t):
    return float(np.asarray(f.defect(np.asarray(x, dtype=float)[None, :], t))[0])


def dirichlet_dynamical_flat_solution(basis: EigenBasis, phi_b, phi_i, x, t: float,
                                      radial_order: int = 48) -> KernelValue:
    """``int_S F1 phi_b dsigma + int_B Gamma1 phi_i dy`` (boundary values frozen)."""
    b = boundary_pairing_f1(basis, x, t, phi_b)
    v = ball_pairing(basis, x, t, phi_i, radial_order)
    return KernelValue(b.value + v.value, b.error + v.error)
