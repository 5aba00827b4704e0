"""Monte Carlo for Brownian motion killed on leaving the unit ball.

The generator is the Laplacian, so each Euler step adds a Gaussian of
variance ``2 dt`` per coordinate.  Between grid points a crossing can still
happen; it is detected with the bridge probability
``exp(-(1 - r0)(1 - r1) / dt)`` of the flat boundary approximation.

Every path draws from its own xoshiro256** stream seeded by
``(seed, path_id)``, so the result does not depend on the thread layout.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numba
import numpy as np

from .errors import DomainError, RunawayPathError

__all__ = ["ExitSample", "MCEstimate", "sample_exit", "sample_exits", "gamma1_mc",
           "write_samples"]

STEP_CAP = 10_000_000
MAX_DT = 1e-3

# the bundled TBB is too old for numba; the built-in pool is enough here
if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER = "workqueue"
if "DYNAKERNEL_THREADS" in os.environ:
    numba.set_num_threads(int(os.environ["DYNAKERNEL_THREADS"]))


@dataclass(frozen=True)
class ExitSample:
    tau: float
    position: np.ndarray
    dt: float


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    n_paths: int
    dt: float


_M64 = 0xFFFFFFFFFFFFFFFF


@numba.njit(cache=True)
def _splitmix(z):
    z = (z + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(_M64)
    w = z
    w = (w ^ (w >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    w = (w ^ (w >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z, w ^ (w >> np.uint64(31))


@numba.njit(cache=True)
def _seed_state(seed, pid):
    # xoshiro256** state from splitmix64 over (seed, path id)
    st = np.empty(4, dtype=np.uint64)
    z = np.uint64(seed) * np.uint64(0x632BE59BD9B4E019) ^ np.uint64(pid)
    for k in range(4):
        z, st[k] = _splitmix(z)
    return st


@numba.njit(cache=True, inline="always")
def _rotl(v, k):
    return (v << np.uint64(k)) | (v >> np.uint64(64 - k))


@numba.njit(cache=True)
def _uniform(st):
    """Next double in [0, 1)."""
    out = _rotl(st[1] * np.uint64(5), 7) * np.uint64(9)
    t = st[1] << np.uint64(17)
    st[2] ^= st[0]
    st[3] ^= st[1]
    st[1] ^= st[2]
    st[0] ^= st[3]
    st[2] ^= t
    st[3] = _rotl(st[3], 45)
    return (out >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@numba.njit(cache=True)
def _normal_pair(st):
    # Box-Muller
    r = math.sqrt(-2.0 * math.log(1.0 - _uniform(st)))
    a = 2.0 * math.pi * _uniform(st)
    return r * math.cos(a), r * math.sin(a)


@numba.njit(cache=True)
def _norm(v):
    acc = 0.0
    for k in range(v.shape[0]):
        acc += v[k] * v[k]
    return math.sqrt(acc)


@numba.njit(cache=True)
def _run_path(start, dt, horizon, seed, pid, bridge, cap, out_pos):
    """Advance one path; return exit time, or inf if it survives past horizon.

    Returns -1 when the step cap is hit.
    """
    st = _seed_state(seed, pid)
    n = start.shape[0]
    x = start.copy()
    y = np.empty(n)
    z = np.empty(4)
    sig = math.sqrt(2.0 * dt)
    t = 0.0
    r0 = _norm(x)
    for _ in range(cap):
        if t >= horizon:
            return np.inf
        z[0], z[1] = _normal_pair(st)
        if n == 3:
            z[2], z[3] = _normal_pair(st)
        for k in range(n):
            y[k] = x[k] + sig * z[k]
        r1 = _norm(y)
        if r1 >= 1.0:
            frac = (1.0 - r0) / (r1 - r0)
            for k in range(n):
                out_pos[k] = x[k] + frac * (y[k] - x[k])
            out_pos /= _norm(out_pos)
            return t + frac * dt
        if bridge:
            # skip the draw when the crossing chance is negligible
            e = (1.0 - r0) * (1.0 - r1) / dt
            if e < 40.0 and _uniform(st) < math.exp(-e):
                for k in range(n):
                    out_pos[k] = 0.5 * (x[k] + y[k])
                out_pos /= _norm(out_pos)
                return t + 0.5 * dt
        for k in range(n):
            x[k] = y[k]
        r0 = r1
        t += dt
    return -1.0


@numba.njit(parallel=True, cache=True)
def _run_batch(start, dt, horizon, n_paths, seed, bridge, cap):
    n = start.shape[0]
    taus = np.empty(n_paths)
    pos = np.zeros((n_paths, n))
    for i in numba.prange(n_paths):
        buf = np.zeros(n)
        taus[i] = _run_path(start, dt, horizon, seed, i, bridge, cap, buf)
        pos[i, :] = buf
    return taus, pos


def _check(start, dt):
    start = np.ascontiguousarray(start, dtype=float)
    if start.shape not in ((2,), (3,)):
        raise DomainError("start must be a point in dimension 2 or 3")
    if not np.linalg.norm(start) < 1.0:
        raise DomainError("start must be interior")
    if not 0 < dt <= MAX_DT:
        raise DomainError(f"dt must lie in (0, {MAX_DT}]")
    return start


def sample_exits(start, dt: float, n_paths: int, seed: int, horizon: float = np.inf,
                 bridge: bool = True, cap: int = STEP_CAP):
    """Exit times and points of ``n_paths`` paths; ``inf`` past ``horizon``."""
    start = _check(start, dt)
    taus, pos = _run_batch(start, float(dt), float(horizon), int(n_paths),
                           int(seed), bool(bridge), int(cap))
    if np.any(taus < 0):
        bad = int(np.argmax(taus < 0))
        raise RunawayPathError("path exceeded the step cap", path_id=bad, cap=cap)
    return taus, pos


def sample_exit(start, dt: float, seed: int, path_id: int = 0,
                bridge: bool = True, cap: int = STEP_CAP) -> ExitSample:
    start = _check(start, dt)
    buf = np.zeros(start.size)
    tau = _run_path(start, float(dt), np.inf, int(seed), int(path_id), bool(bridge),
                    int(cap), buf)
    if tau < 0:
        raise RunawayPathError("path exceeded the step cap", path_id=path_id, cap=cap)
    return ExitSample(float(tau), buf, float(dt))


def _free_kernel(w, y, s):
    n = w.shape[-1]
    d2 = np.sum((w - y) ** 2, axis=-1)
    return (4 * np.pi * s) ** (-n / 2) * np.exp(-d2 / (4 * s))


def gamma1_mc(x, y, t: float, n_paths: int = 100_000, dt: float = 1e-4, seed: int = 0,
              bridge: bool = True, return_samples: bool = False):
    """Dirichlet heat kernel of the ball from the first-exit decomposition.

    ``Gamma1(x, y, t) = Gamma(x, y, t) - E[tau < t; Gamma(W_tau, y, t - tau)]``.
    """
    x = _check(x, dt)
    y = np.asarray(y, dtype=float)
    if not t > 0:
        raise DomainError("t must be positive")
    if not np.linalg.norm(y) < 1.0:
        raise DomainError("target must be interior")
    taus, pos = sample_exits(x, dt, n_paths, seed, horizon=t, bridge=bridge)
    hit = taus < t
    contrib = np.zeros(n_paths)
    contrib[hit] = _free_kernel(pos[hit], y, t - taus[hit])
    free = float(_free_kernel(x, y, t))
    est = MCEstimate(free - float(np.mean(contrib)),
                     float(np.std(contrib, ddof=1) / np.sqrt(n_paths)), int(n_paths),
                     float(dt))
    if return_samples:
        return est, (taus, pos, contrib)
    return est


def write_samples(path, taus, pos, contrib):
    """Raw per-path dump: ``path_id,tau,exit_x...,contrib``."""
    n = pos.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path_id", "tau"] + [f"exit_x{i}" for i in range(n)] + ["contrib"])
        for i in range(len(taus)):
            w.writerow([i, repr(float(taus[i]))] + [repr(float(v)) for v in pos[i]]
                       + [repr(float(contrib[i]))])
