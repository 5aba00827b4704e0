"""Eigenproblem with the dynamical (Wentzell) boundary law and its heat kernel.

Modes solve ``-Delta psi = lam psi`` in the ball with ``d psi/dnu = lam psi``
on the sphere and are orthonormal for

    <f, g> = int_B f g dx + int_S f g dsigma.

Separating variables, ``psi = R(r) Y_lm`` with ``R(r) = r^{1-n/2} J_nu(mu r)``
(``nu = l + n/2 - 1``, ``lam = mu^2``); the boundary law becomes

    (l - mu^2) J_nu(mu) - mu J_{nu+1}(mu) = 0.

For ``l = 0`` the constant (``mu = 0``) is a mode and the remaining roots sit
one per gap between consecutive zeros of ``J_nu``.  For ``l >= 1`` the first
root lies in ``(sqrt(l)/2, sqrt(l))`` and the others one per gap again.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import mpmath
import numpy as np
from scipy import special

from .ball_heat import Truncation, angular_factor
from .ball_laplace import BOUNDARY_TOL, norm
from .errors import DomainError, RootFindError, TruncationError
from .numerics import (
    KernelValue,
    ball_quadrature,
    ball_volume,
    bessel_j_zero_table,
    newton_bracketed,
    sphere_area,
    sphere_quadrature,
)

__all__ = [
    "WentzellPair",
    "WentzellBasis",
    "wentzell_eigenpairs",
    "real_harmonics",
    "g1_dyn",
    "g1_dyn_mass",
    "WentzellExpansion",
    "dyn_solution",
]

TAIL_TARGET = 1e-8
_EXTRA = 20


@dataclass(frozen=True)
class WentzellPair:
    eigenvalue: float
    degree: int
    index: int               # 0 only for the constant mode
    norm_constant: float
    boundary_value: float    # R(1)
    boundary_flux: float     # R'(1)


def _root_function(l, nu):
    def f(mu):
        return (l - mu * mu) * special.jv(nu, mu) - mu * special.jv(nu + 1, mu)

    def df(mu):
        # derivative of the expression above, using J_nu' and J_{nu+1}'
        j0, j1 = special.jv(nu, mu), special.jv(nu + 1, mu)
        dj0 = special.jvp(nu, mu)
        dj1 = special.jvp(nu + 1, mu)
        return -2 * mu * j0 + (l - mu * mu) * dj0 - j1 - mu * dj1

    return f, df


def _roots_for_degree(l, nu, zeros, count):
    """First ``count`` positive roots for degree ``l`` given zeros of ``J_nu``."""
    if l == 0:
        a, b = zeros[:count], zeros[1: count + 1]
    else:
        a = np.concatenate([[0.5 * np.sqrt(l)], zeros[: count - 1]])
        b = np.concatenate([[np.sqrt(l)], zeros[1:count]])
        # the first bracket must end before the first Bessel zero
        b[0] = min(b[0], zeros[0])
    f, df = _root_function(l, nu)
    fa, fb = f(a), f(b)
    if np.any(np.sign(fa) == np.sign(fb)):
        i = int(np.argmax(np.sign(fa) == np.sign(fb)))
        raise RootFindError("Wentzell bracket without sign change",
                            degree=l, bracket=(float(a[i]), float(b[i])))
    try:
        return newton_bracketed(f, df, a, b)
    except RootFindError as exc:
        raise RootFindError(f"Wentzell root search failed for l = {l}: {exc}",
                            degree=l, **exc.info) from exc


def _mp_mode(n, l, mu0):
    """Newton-polished root and normalised boundary data for one mode."""
    nu = mpmath.mpf(l) + (0 if n == 2 else mpmath.mpf(1) / 2)
    m = mpmath.mpf(mu0)

    def parts(m):
        a, b = mpmath.besselj(nu, m), mpmath.besselj(nu + 1, m)
        return a, b, nu / m * a - b, a - (nu + 1) / m * b

    # one step suffices: the double root is already good to ~1e-13
    for _ in range(1):
        a, b, da, db = parts(m)
        f = (l - m * m) * a - m * b
        df = -2 * m * a + (l - m * m) * da - b - m * db
        m -= f / df
    a, b, da, _ = parts(m)
    bulk = (da**2 + (1 - nu**2 / m**2) * a**2) / 2
    if n == 3:
        s = mpmath.sqrt(mpmath.pi / (2 * m))
        bulk *= s**2
        a, b = s * a, s * b
    c = 1 / mpmath.sqrt(bulk + a**2)
    return float(m), float(c), float(c * a), float(c * (l * a - m * b))


class WentzellBasis:
    """Modes with ``l <= lmax`` and radial index ``k <= kmax``.

    Arrays have shape ``(lmax + 1, kmax + 1)``.  Column 0 of row 0 is the
    constant mode; for ``l >= 1`` column ``j`` holds radial index ``j + 1``
    and the last column is unused (``valid`` is False there).
    """

    def __init__(self, n: int, trunc: Truncation = Truncation()):
        if n not in (2, 3):
            raise DomainError(f"dimension {n} not supported")
        self.n = n
        self.trunc = trunc
        self.lmax, self.kmax = trunc.lmax, trunc.kmax
        self.base_order = 0.0 if n == 2 else 0.5
        L, K = self.lmax + _EXTRA, self.kmax + _EXTRA
        table = bessel_j_zero_table(self.base_order, L, K + 1)
        mu = np.zeros((L + 1, K + 1))
        for l in range(L + 1):
            nu = l + self.base_order
            if l == 0:
                mu[0, 1:] = _roots_for_degree(0, nu, table[0], K)
            else:
                mu[l, :K] = _roots_for_degree(l, nu, table[l], K)
        self._mu_full = mu
        self.degrees = np.arange(self.lmax + 1)
        self.orders = self.degrees + self.base_order
        ll, kk = np.meshgrid(self.degrees, np.arange(self.kmax + 1), indexing="ij")
        self.valid = (ll == 0) | (kk < self.kmax)
        self.mu = np.where(self.valid, mu[: self.lmax + 1, : self.kmax + 1], 0.0)
        self.index = np.where(ll == 0, kk, kk + 1)
        self.coef, self.boundary_value, self.boundary_flux = self._polish()
        self.lam = self.mu**2
        for a in (self.mu, self.lam, self.coef, self.boundary_value, self.boundary_flux):
            a.setflags(write=False)
        self.t_min = self._find_t_min()

    def _polish(self):
        """Refine kept roots and their constants in extended precision.

        The boundary residual of a mode with ``lam ~ 5e4`` is dominated by
        double-precision noise in ``jv``; rounding exact values once keeps
        the stored triple ``(lam, R(1), R'(1))`` consistent to a few ulps.
        """
        mu = np.array(self.mu)
        coef = np.zeros_like(mu)
        bval = np.zeros_like(mu)
        flux = np.zeros_like(mu)
        c0 = np.sqrt(self.n / (self.n + 1.0))
        coef[0, 0], bval[0, 0] = c0, c0
        with mpmath.workdps(32):
            for l, j in zip(*np.nonzero(self.valid)):
                if l == 0 and j == 0:
                    continue
                m, c, bv, fl = _mp_mode(self.n, int(l), float(mu[l, j]))
                mu[l, j], coef[l, j], bval[l, j], flux[l, j] = m, c, bv, fl
        self.mu = mu
        return coef, bval, flux

    # -- profiles ------------------------------------------------------------
    def _raw(self, mu, orders, r, derivative=False):
        """Unnormalised ``r^{1-n/2} J_nu(mu r)`` (spherical form for n = 3)."""
        r = np.asarray(r, dtype=float)
        ex = (Ellipsis,) + (None,) * r.ndim
        m = mu[ex]
        deg = orders.reshape((-1,) + (1,) * (mu.ndim - 1 + r.ndim))
        arg = m * r
        if self.n == 2:
            return m * special.jvp(deg, arg) if derivative else special.jv(deg, arg)
        ldeg = (deg - 0.5).astype(int)
        if derivative:
            return m * special.spherical_jn(ldeg, arg, derivative=True)
        return special.spherical_jn(ldeg, arg)

    def _normalise(self, mu, orders):
        nu = orders[:, None] * np.ones_like(mu)
        safe = np.where(mu > 0, mu, 1.0)
        jn, jp = special.jv(nu, safe), special.jvp(nu, safe)
        # int_0^1 J_nu(mu r)^2 r dr in closed form
        lommel = 0.5 * (jp**2 + (1 - nu**2 / safe**2) * jn**2)
        if self.n == 2:
            bulk, bval = lommel, jn
        else:
            scale = np.pi / (2 * safe)
            bulk, bval = scale * lommel, special.spherical_jn(
                (nu - 0.5).astype(int), safe)
        const = mu == 0
        bulk = np.where(const, 1.0 / self.n, bulk)
        bval = np.where(const, 1.0, bval)
        coef = 1.0 / np.sqrt(bulk + bval**2)
        flux = coef * self._raw(mu, orders, np.float64(1.0), derivative=True)
        flux = np.where(const, 0.0, flux)
        return coef, coef * bval, flux

    def radial(self, r) -> np.ndarray:
        """Normalised profiles, shape ``(lmax + 1, kmax + 1) + r.shape``."""
        r = np.asarray(r, dtype=float)
        ex = (Ellipsis,) + (None,) * r.ndim
        return self.coef[ex] * self._raw(self.mu, self.orders, r)

    def radial_dr(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        ex = (Ellipsis,) + (None,) * r.ndim
        return self.coef[ex] * self._raw(self.mu, self.orders, r, derivative=True)

    def angular(self, c) -> np.ndarray:
        return angular_factor(self.n, self.lmax, c)

    def boundary_residual(self) -> np.ndarray:
        """``|R'(1) - lam R(1)|`` for every mode."""
        res = np.abs(self.boundary_flux - self.lam * self.boundary_value)
        return np.where(self.valid, res, 0.0)

    # -- truncation ----------------------------------------------------------
    @cached_property
    def _dropped(self):
        mu = self._mu_full
        L, K = mu.shape
        ll, kk = np.meshgrid(np.arange(L), np.arange(K), indexing="ij")
        keep = (ll <= self.lmax) & ((kk < self.kmax) | ((ll == 0) & (kk == self.kmax)))
        valid_full = (ll == 0) | (kk < K - 1)
        mask = ~keep & valid_full
        orders = np.arange(L) + self.base_order
        coef, bval, _ = self._normalise(mu, orders)
        # |J_nu| and |j_l| are at most 1; below the first Bessel zero the
        # profile is monotone in r, so its sup is the boundary value
        first = (ll > 0) & (kk == 0)
        rmax = np.where(first, np.abs(bval), np.abs(coef))[mask]
        if self.n == 2:
            amax = np.where(ll[mask] == 0, 0.5, 1.0) / np.pi
        else:
            amax = (2 * ll[mask] + 1) / (4 * np.pi)
        return mu[mask] ** 2, rmax, amax

    def tail(self, t: float) -> float:
        lam, rmax, amax = self._dropped
        return float(np.sum(np.exp(-lam * t) * rmax**2 * amax))

    def _find_t_min(self) -> float:
        lo, hi = 1e-7, 50.0
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
            scale = self.t_min / t
            raise TruncationError(
                f"t = {t:g} below the basis threshold t_min = {self.t_min:.4g}",
                t_min=self.t_min,
                required_lmax=int(np.ceil((self.lmax + 1) * scale)),
                required_kmax=int(np.ceil(self.kmax * np.sqrt(scale))))

    # -- export --------------------------------------------------------------
    @cached_property
    def pairs(self) -> list[WentzellPair]:
        out = []
        for l in range(self.lmax + 1):
            for j in range(self.kmax + 1):
                if self.valid[l, j]:
                    out.append(WentzellPair(float(self.lam[l, j]), l, int(self.index[l, j]),
                                            float(abs(self.coef[l, j])),
                                            float(self.boundary_value[l, j]),
                                            float(self.boundary_flux[l, j])))
        out.sort(key=lambda p: (p.eigenvalue, p.degree, p.index))
        return out

    def multiplicity(self, l: int) -> int:
        return 1 if l == 0 else (2 if self.n == 2 else 2 * l + 1)

    def to_records(self):
        res = self.boundary_residual()
        recs = []
        for p in self.pairs:
            j = p.index if p.degree == 0 else p.index - 1
            recs.append({"n": self.n, "l": p.degree, "k": p.index, "lambda": p.eigenvalue,
                         "norm_constant": p.norm_constant,
                         "boundary_value": p.boundary_value,
                         "boundary_flux": p.boundary_flux,
                         "bc_residual": float(res[p.degree, j])})
        return recs

    def to_json(self) -> str:
        return json.dumps({"basis": "wentzell", "n": self.n, "lmax": self.lmax,
                           "kmax": self.kmax, "t_min": self.t_min,
                           "pairs": self.to_records()}, indent=1)


_BASES: dict = {}


def wentzell_eigenpairs(n: int, trunc: Truncation = Truncation()) -> WentzellBasis:
    key = (n, trunc.lmax, trunc.kmax)
    if key not in _BASES:
        _BASES[key] = WentzellBasis(n, trunc)
    return _BASES[key]


# --------------------------------------------------------------------------
# real spherical harmonics

def real_harmonics(n: int, l: int, dirs) -> np.ndarray:
    """Orthonormal real harmonics of degree ``l`` at unit vectors ``dirs``.

    Shape ``(multiplicity, len(dirs))``.
    """
    dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
    if n == 2:
        th = np.arctan2(dirs[:, 1], dirs[:, 0])
        if l == 0:
            return np.full((1, len(dirs)), 1.0 / np.sqrt(2 * np.pi))
        return np.stack([np.cos(l * th), np.sin(l * th)]) / np.sqrt(np.pi)
    polar = np.arccos(np.clip(dirs[:, 2], -1.0, 1.0))
    azim = np.arctan2(dirs[:, 1], dirs[:, 0])
    rows = []
    for m in range(-l, l + 1):
        y = special.sph_harm_y(l, abs(m), polar, azim)
        if m == 0:
            rows.append(y.real)
        elif m > 0:
            rows.append(np.sqrt(2) * (-1) ** m * y.real)
        else:
            rows.append(np.sqrt(2) * (-1) ** m * y.imag)
    return np.array(rows)


# --------------------------------------------------------------------------
# kernel and solution

def _cos(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    rx, ry = norm(x), norm(y)
    ux = x / np.where(rx > 0, rx, 1.0)[..., None]
    uy = y / np.where(ry > 0, ry, 1.0)[..., None]
    return np.sum(ux * uy, axis=-1)


def g1_dyn(basis: WentzellBasis, x, y, t: float) -> KernelValue:
    """Heat kernel of the dynamical-boundary problem (points may be on the sphere)."""
    basis.require(t)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(norm(x) > 1 + BOUNDARY_TOL) or np.any(norm(y) > 1 + BOUNDARY_TOL):
        raise DomainError("point outside the closed unit ball")
    decay = np.exp(-basis.lam * t)
    shape = np.broadcast_shapes(x.shape[:-1], y.shape[:-1])
    xb = np.broadcast_to(x, shape + x.shape[-1:]).reshape(-1, x.shape[-1])
    yb = np.broadcast_to(y, shape + y.shape[-1:]).reshape(-1, y.shape[-1])
    out = np.empty(len(xb))
    for i in range(0, len(xb), 512):
        sl = slice(i, i + 512)
        prod = basis.radial(norm(xb[sl])) * basis.radial(norm(yb[sl]))
        radial = np.einsum("lk,lkp->lp", decay, prod)
        out[sl] = np.sum(radial * basis.angular(_cos(xb[sl], yb[sl])), axis=0)
    value = out.reshape(shape) if shape else float(out[0])
    err = basis.tail(t)
    if np.ndim(value) == 0:
        return KernelValue(value, err)
    return KernelValue(value, np.full(shape, err))


def g1_dyn_mass(basis: WentzellBasis, x, t: float, radial_order: int | None = None,
                sphere_order: int | None = None) -> KernelValue:
    """``int_B G1dyn(x, y, t) dy + int_S G1dyn(x, y, t) dsigma_y`` by quadrature.

    The error field is the change against the half-size rule plus the tail.
    """
    basis.require(t)
    n = basis.n
    x = np.asarray(x, dtype=float)
    ro = radial_order if radial_order is not None else int(0.5 * basis.mu.max()) + 32
    so = sphere_order if sphere_order is not None else (256 if n == 2 else 32)

    rx = basis.radial(norm(x))
    decay = np.exp(-basis.lam * t)

    def apply(ro, so):
        # separable product rule: profiles once per radial node
        r, dirs, w = ball_quadrature(n, ro, so)
        g = np.einsum("lj,ij->li", basis.angular(_cos(x, dirs)), w)
        bulk = np.einsum("lki,li->lk", basis.radial(r), g)
        nodes, bw = sphere_quadrature(n, so)
        bnd = basis.radial(1.0) * (basis.angular(_cos(x, nodes)) @ bw)[:, None]
        return float(np.sum(decay * rx * (bulk + bnd)))

    fine = apply(ro, so)
    coarse = apply(max(2, ro // 2), max(2, so // 2))
    return KernelValue(fine, abs(fine - coarse) + basis.tail(t))


class WentzellExpansion:
    """Modal coefficients of data ``(phi_i, phi_b)``; immutable once built.

    ``coeff[l]`` has shape ``(kmax + 1, multiplicity)``.
    """

    def __init__(self, basis: WentzellBasis, phi_i, phi_b, radial_order: int = 64,
                 sphere_order: int | None = None):
        self.basis = basis
        n = basis.n
        so = sphere_order if sphere_order is not None else (256 if n == 2 else 32)
        r, dirs, w = ball_quadrature(n, radial_order, so)
        bnodes, bw = sphere_quadrature(n, so)
        pts = (r[:, None, None] * dirs[None]).reshape(-1, n)
        fi = _evaluate(phi_i, pts).reshape(len(r), len(dirs))
        fb = _evaluate(phi_b, bnodes)
        prof = basis.radial(r)                        # (L, K, nr)
        coeffs = []
        for l in range(basis.lmax + 1):
            Y = real_harmonics(n, l, dirs)            # (M, ndirs)
            Yb = real_harmonics(n, l, bnodes)
            bulk = np.einsum("ki,mj,ij,ij->km", prof[l], Y, fi, w)
            bnd = np.outer(basis.boundary_value[l], Yb @ (bw * fb))
            c = np.where(basis.valid[l][:, None], bulk + bnd, 0.0)
            c.setflags(write=False)
            coeffs.append(c)
        self.coeff = tuple(coeffs)

    def __call__(self, x, t: float) -> KernelValue:
        b = self.basis
        b.require(t)
        x = np.asarray(x, dtype=float)
        r = norm(x)
        d = x / r if r > 0 else np.eye(b.n)[0]
        prof = b.radial(r)
        decay = np.exp(-b.lam * t)
        total = 0.0
        for l in range(b.lmax + 1):
            Y = real_harmonics(b.n, l, d[None, :])[:, 0]
            total += float(np.sum(decay[l] * prof[l] * (self.coeff[l] @ Y)))
        return KernelValue(total, b.tail(t))

    def combined_integral(self, t: float) -> float:
        """``int_B u + int_S u`` at time ``t``: only the constant mode survives."""
        b = self.basis
        psi0 = b.coef[0, 0] / np.sqrt(sphere_area(b.n))
        total_measure = ball_volume(b.n) + sphere_area(b.n)
        return float(self.coeff[0][0, 0] * psi0 * total_measure * np.exp(-b.lam[0, 0] * t))


def _evaluate(f, pts):
    if callable(f):
        return np.asarray(f(pts), dtype=float)
    return np.full(len(pts), float(f))


_EXPANSIONS: dict = {}


def dyn_solution(basis: WentzellBasis, phi_i, phi_b, x, t: float) -> KernelValue:
    """Series solution of the heat equation with the dynamical boundary law."""
    key = (id(basis), phi_i if callable(phi_i) else float(phi_i),
           phi_b if callable(phi_b) else float(phi_b))
    if key not in _EXPANSIONS:
        _EXPANSIONS[key] = WentzellExpansion(basis, phi_i, phi_b)
    return _EXPANSIONS[key](x, t)
