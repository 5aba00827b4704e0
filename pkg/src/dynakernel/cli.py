"""Command-line front-end.

``dynakernel <eval|identities|eigen|mc|residual> --config run.json --set key=value``

The config is a flat JSON object with the fields of :class:`RunConfig`;
unknown keys are rejected.  Exit codes: 0 all rows ok, 1 configuration
error, 2 at least one computation failed (or a check did not pass).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import approx, ball_heat, ball_laplace, dyn_eigen, halfspace, stochastic
from .errors import ConfigError, DynakernelError
from .numerics import QuadratureSpec, sphere_quadrature

EXIT_OK, EXIT_CONFIG, EXIT_COMPUTE = 0, 1, 2

# kernel name -> domains it is defined on
KERNELS = {
    "phi": ("halfspace", "ball"),
    "G_laplace": ("halfspace", "ball"),
    "P": ("halfspace", "ball"),
    "K": ("halfspace", "ball"),
    "Gamma": ("halfspace", "ball"),
    "Gamma_D": ("halfspace", "ball"),
    "G_heat": ("halfspace",),
    "E1": ("ball",),
    "F1": ("ball",),
    "H1": ("ball",),
    "scriptG1": ("ball",),
    "scriptH1": ("ball",),
    "tildeGamma1": ("ball",),
    "tildeH1": ("ball",),
    "G1dyn": ("ball",),
    "corrector": ("ball",),
    "bound_h": ("ball",),
    "bound_l": ("ball",),
}
STATIC = {"phi", "G_laplace", "P"}

DEFAULT_TOLERANCES = {"P": 1e-10, "K": 1e-10, "F1_Gamma1": 1e-4, "G1dyn": 1e-3, "G_plus": 1e-4}
MC_BIAS = 0.02
MC_Z = 3.0


def fmt(v) -> str:
    """Fixed 17-significant-digit rendering (booleans as true/false)."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if v is None:
        return ""
    return str(v)


@dataclass
class RunConfig:
    n: int = 2
    domain: str = "ball"
    kernel: str = "Gamma_D"
    lmax: int = 40
    kmax: int = 60
    basis: str = "dirichlet"
    quad_kind: str = "graded-gauss"
    quad_order: int = 10
    sphere_order: int | None = None
    radial_order: int | None = None
    mc_paths: int = 100_000
    mc_dt: float = 1e-4
    mc_seed: int = 0
    x: list | None = None
    y: list | None = None
    y_sphere_nodes: int | None = None
    t: list | None = None
    tolerance: float | dict | None = None
    output: str = "dynakernel_out.csv"
    format: str = "csv"

    # -- parsing ---------------------------------------------------------
    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def validate(self):
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.n in (2, 3), "n must be 2 or 3")
        need(self.domain in ("halfspace", "ball"), "domain must be halfspace or ball")
        need(self.kernel in KERNELS, f"unknown kernel {self.kernel!r}")
        need(self.domain in KERNELS[self.kernel],
             f"kernel {self.kernel} is not defined on the {self.domain}")
        need(self.basis in ("dirichlet", "wentzell"), "basis must be dirichlet or wentzell")
        need(self.format in ("csv", "json"), "format must be csv or json")
        for name in ("lmax", "kmax", "quad_order", "mc_paths", "mc_seed"):
            need(isinstance(getattr(self, name), int), f"{name} must be an integer")
        need(0 <= self.lmax <= 100 and 1 <= self.kmax <= 200, "cutoffs out of range")
        need(self.quad_order >= 1 and self.mc_paths >= 2, "sizes must be positive")
        need(isinstance(self.mc_dt, (int, float)) and 0 < self.mc_dt <= stochastic.MAX_DT,
             f"mc_dt must lie in (0, {stochastic.MAX_DT}]")
        try:
            QuadratureSpec(self.quad_kind, self.quad_order, singular_end="right")
        except DynakernelError as exc:
            raise ConfigError(str(exc)) from None
        for name in ("x", "y"):
            pts = getattr(self, name)
            if pts is not None:
                need(isinstance(pts, list) and len(pts) > 0, f"{name} grid must be nonempty")
                for p in pts:
                    need(isinstance(p, list) and len(p) == self.n
                         and all(isinstance(c, (int, float)) for c in p),
                         f"{name} points must be lists of {self.n} numbers")
        if self.t is not None:
            need(isinstance(self.t, list) and len(self.t) > 0
                 and all(isinstance(c, (int, float)) for c in self.t), "t grid must be numbers")
        if self.y_sphere_nodes is not None:
            need(isinstance(self.y_sphere_nodes, int) and self.y_sphere_nodes >= 1,
                 "y_sphere_nodes must be a positive integer")
        if isinstance(self.tolerance, dict):
            bad = sorted(set(self.tolerance) - set(DEFAULT_TOLERANCES))
            need(not bad, f"unknown identities in tolerance: {bad}")

    # -- derived ---------------------------------------------------------
    @property
    def trunc(self):
        return ball_heat.Truncation(self.lmax, self.kmax)

    @property
    def spec(self):
        return QuadratureSpec(self.quad_kind, self.quad_order, singular_end="right")

    def tolerance_for(self, name):
        if isinstance(self.tolerance, dict):
            return float(self.tolerance.get(name, DEFAULT_TOLERANCES[name]))
        if self.tolerance is not None:
            return float(self.tolerance)
        return DEFAULT_TOLERANCES[name]

    def grid(self, name, default):
        pts = getattr(self, name)
        return [np.asarray(p, dtype=float) for p in (pts if pts is not None else default)]

    def times(self, default):
        return [float(s) for s in (self.t if self.t is not None else default)]


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_config(path: str | None, overrides: list[str]) -> RunConfig:
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override {item!r} is not key=value")
        data[key.strip()] = _parse_value(value)
    try:
        return RunConfig.from_dict(data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


# --------------------------------------------------------------------------
# output

def _write(cfg: RunConfig, path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if cfg.format == "json":
        recs = [dict(zip(header, (r if not isinstance(r, np.generic) else r.item()
                                  for r in row))) for row in rows]
        path.write_text(json.dumps(recs, indent=1, default=float) + "\n")
        return
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _coords(p, n):
    return [float(c) for c in p] if p is not None else [None] * n


# --------------------------------------------------------------------------
# eval

def _kernel_fn(cfg: RunConfig):
    """Return ``f(x, y, t) -> (value, error)`` for the configured kernel."""
    name, dom, spec = cfg.kernel, cfg.domain, cfg.spec
    exact = lambda v: (float(v), 0.0)                       # noqa: E731
    kv = lambda r: (float(r.value), float(r.error))         # noqa: E731
    if name == "phi":
        return lambda x, y, t: exact(halfspace.phi_laplace(cfg.n, x - y))
    if name == "Gamma":
        return lambda x, y, t: exact(halfspace.heat_kernel_free(x, y, t))
    if dom == "halfspace":
        table = {
            "G_laplace": lambda x, y, t: exact(halfspace.green_halfspace_laplace(x, y)),
            "P": lambda x, y, t: exact(halfspace.poisson_halfspace(x, y)),
            "K": lambda x, y, t: exact(halfspace.k_plus(x, y, t)),
            "Gamma_D": lambda x, y, t: exact(halfspace.gamma_plus(x, y, t)),
            "G_heat": lambda x, y, t: kv(halfspace.g_plus_heat(x, y, t, spec)),
        }
        return table[name]
    if name == "G_laplace":
        return lambda x, y, t: exact(ball_laplace.green_ball(x, y))
    if name == "P":
        return lambda x, y, t: exact(ball_laplace.poisson_ball(x, y))
    if name == "K":
        return lambda x, y, t: exact(ball_laplace.k1(x, y, t))
    if name == "bound_h":
        return lambda x, y, t: exact(ball_heat.bound_h(x, y, t))
    if name == "bound_l":
        return lambda x, y, t: exact(ball_heat.bound_l(x, y, t))
    if name == "G1dyn":
        wb = dyn_eigen.wentzell_eigenpairs(cfg.n, cfg.trunc)
        return lambda x, y, t: kv(dyn_eigen.g1_dyn(wb, x, y, t))
    b = ball_heat.dirichlet_eigenbasis(cfg.n, cfg.trunc)
    table = {
        "Gamma_D": lambda x, y, t: kv(ball_heat.gamma1(b, x, y, t)),
        "E1": lambda x, y, t: kv(ball_heat.e1(b, x, y, t)),
        "F1": lambda x, y, t: kv(ball_heat.f1(b, x, y, t)),
        "H1": lambda x, y, t: kv(ball_heat.h1(b, x, y, t, spec)),
        "scriptG1": lambda x, y, t: kv(approx.script_g1(b, x, y, t, spec)),
        "scriptH1": lambda x, y, t: kv(approx.script_h1(b, x, y, t, spec)),
        "tildeGamma1": lambda x, y, t: kv(approx.tilde_gamma1(b, x, y, t)),
        "tildeH1": lambda x, y, t: kv(approx.tilde_h1(b, x, y, t)),
        "corrector": lambda x, y, t: kv(ball_heat.corrector_phi1(b, x, y, t, spec,
                                                                  cfg.sphere_order)),
    }
    return table[name]


def _default_points(cfg: RunConfig):
    n = cfg.n
    if cfg.domain == "halfspace":
        return [[0.0] * (n - 1) + [0.5]], [[0.3] + [0.0] * (n - 2) + [0.2]]
    return [[0.3] + [0.0] * (n - 1)], [[0.1, 0.2] + [0.0] * (n - 2)]


def cmd_eval(cfg: RunConfig) -> int:
    dx, dy = _default_points(cfg)
    xs = cfg.grid("x", dx)
    if cfg.y_sphere_nodes is not None:
        nodes, _ = sphere_quadrature(cfg.n, cfg.y_sphere_nodes)
        ys = list(np.asarray(nodes, dtype=float))
    else:
        ys = cfg.grid("y", dy)
    ts = [None] if cfg.kernel in STATIC else cfg.times([0.5])
    try:
        fn = _kernel_fn(cfg)
    except DynakernelError as exc:
        fn = None
        setup_error = exc
    n = cfg.n
    header = ([f"x{i}" for i in range(n)] + [f"y{i}" for i in range(n)]
              + ["t", "value", "error", "code"])
    rows, failed = [], False
    for x in xs:
        for y in ys:
            for t in ts:
                try:
                    if fn is None:
                        raise setup_error
                    with np.errstate(divide="ignore", invalid="ignore"):
                        value, err = fn(x, y, t)
                    code = "OK"
                except DynakernelError as exc:
                    value, err, code, failed = None, None, exc.code, True
                rows.append(_coords(x, n) + _coords(y, n) + [t, value, err, code])
    _write(cfg, cfg.output, header, rows)
    return EXIT_COMPUTE if failed else EXIT_OK


# --------------------------------------------------------------------------
# identities

def _identity_points(n):
    pts = [[0.0, 0.0], [0.3, 0.0], [-0.2, 0.5], [0.6, -0.6], [0.05, 0.9]]
    return [p + [0.0] * (n - 2) if n == 3 else p for p in pts]


def _one(y):
    return np.ones(len(y))


def _identity_checks(cfg: RunConfig):
    """Yield ``(name, x, t, thunk)``; each thunk returns a KernelValue."""
    xs = cfg.grid("x", _identity_points(cfg.n) if cfg.domain == "ball"
                  else [[0.1] * (cfg.n - 1) + [0.4]])
    ts = cfg.times([0.5])
    if cfg.domain == "halfspace":
        for x in xs:
            for t in ts:
                yield "G_plus", x, t, lambda x=x, t=t: halfspace.g_plus_mass(x, t, cfg.spec)
        return
    for x in xs:
        yield "P", x, None, lambda x=x: ball_laplace.harmonic_extension(_one, x, cfg.sphere_order)
    for x in xs:
        for t in ts:
            yield "K", x, t, lambda x=x, t=t: ball_laplace.laplace_dynamical_solution(
                _one, x, t, cfg.sphere_order)

    def mass(x, t):
        b = ball_heat.dirichlet_eigenbasis(cfg.n, cfg.trunc)
        f = ball_heat.boundary_pairing_f1(b, x, t, 1.0)
        g = ball_heat.ball_pairing(b, x, t, 1.0)
        return type(f)(f.value + g.value, f.error + g.error)

    for x in xs:
        for t in ts:
            yield "F1_Gamma1", x, t, lambda x=x, t=t: mass(x, t)
    for x in xs:
        for t in ts:
            yield "G1dyn", x, t, lambda x=x, t=t: dyn_eigen.g1_dyn_mass(
                dyn_eigen.wentzell_eigenpairs(cfg.n, cfg.trunc), x, t)


def cmd_identities(cfg: RunConfig) -> int:
    n = cfg.n
    header = [f"x{i}" for i in range(n)] + ["t", "identity", "value", "deviation",
                                            "tolerance", "pass", "code"]
    rows, ok = [], True
    for name, x, t, thunk in _identity_checks(cfg):
        tol = cfg.tolerance_for(name)
        try:
            value = float(thunk().value)
            dev = abs(value - 1.0)
            passed, code = bool(dev <= tol), "OK"
        except DynakernelError as exc:
            value, dev, passed, code = None, None, False, exc.code
        ok &= passed
        rows.append([float(c) for c in x] + [t, name, value, dev, tol, passed, code])
    _write(cfg, cfg.output, header, rows)
    return EXIT_OK if ok else EXIT_COMPUTE


# --------------------------------------------------------------------------
# eigen tables

EIGEN_COLUMNS = ["n", "l", "k", "lambda", "norm_constant", "boundary_value", "boundary_flux",
                 "bc_residual", "code"]


def _dirichlet_records(b):
    # the profile vanishes on the sphere up to the root accuracy
    res = np.abs(b.radial(1.0))
    recs = b.to_records()
    for r in recs:
        r["bc_residual"] = float(res[r["l"], r["k"] - 1])
    return recs


def cmd_eigen(cfg: RunConfig) -> int:
    out = Path(cfg.output)
    try:
        if cfg.basis == "dirichlet":
            b = ball_heat.dirichlet_eigenbasis(cfg.n, cfg.trunc)
            recs = _dirichlet_records(b)
        else:
            b = dyn_eigen.wentzell_eigenpairs(cfg.n, cfg.trunc)
            recs = b.to_records()
    except DynakernelError as exc:
        rows = [[cfg.n, None, None, None, None, None, None, None, exc.code]]
        _write(cfg, out, EIGEN_COLUMNS, rows)
        return EXIT_COMPUTE
    lam = np.array([r["lambda"] for r in recs])
    monotone = bool(np.all(np.isfinite(lam)) and np.all(np.diff(lam) >= 0))
    rows = [[r[c] for c in EIGEN_COLUMNS[:-1]] + ["OK" if monotone else "NOT_MONOTONE"]
            for r in recs]
    if cfg.format == "csv":
        _write(cfg, out, EIGEN_COLUMNS, rows)
        meta = json.loads(b.to_json())
        meta["monotone"] = monotone
        meta["pairs"] = recs
        out.with_suffix(".json").write_text(json.dumps(meta, indent=1) + "\n")
    else:
        _write(cfg, out, EIGEN_COLUMNS, rows)
    return EXIT_OK if monotone else EXIT_COMPUTE


# --------------------------------------------------------------------------
# Monte Carlo

def mc_compare(mean, stderr, series):
    """Raw and bias-adjusted z-scores; the allowance is ``MC_BIAS * |series|``."""
    diff = mean - series
    z = diff / stderr
    z_adj = max(0.0, abs(diff) - MC_BIAS * abs(series)) / stderr
    return z, z_adj, bool(z_adj <= MC_Z)


def cmd_mc(cfg: RunConfig) -> int:
    if cfg.domain != "ball":
        raise ConfigError("mc needs the ball domain")
    n = cfg.n
    dx, dy = _default_points(cfg)
    xs, ys, ts = cfg.grid("x", dx), cfg.grid("y", dy), cfg.times([0.5])
    header = ([f"x{i}" for i in range(n)] + [f"y{i}" for i in range(n)]
              + ["t", "mc_mean", "mc_stderr", "series", "z", "z_adjusted", "pass", "code"])
    rows, ok = [], True
    for x in xs:
        for y in ys:
            for t in ts:
                try:
                    b = ball_heat.dirichlet_eigenbasis(n, cfg.trunc)
                    series = ball_heat.gamma1(b, x, y, t).value
                    est = stochastic.gamma1_mc(x, y, t, cfg.mc_paths, cfg.mc_dt, cfg.mc_seed)
                    z, z_adj, passed = mc_compare(est.mean, est.stderr, series)
                    row = [est.mean, est.stderr, series, z, z_adj, passed, "OK"]
                except DynakernelError as exc:
                    passed = False
                    row = [None] * 5 + [False, exc.code]
                ok &= passed
                rows.append([float(c) for c in x] + [float(c) for c in y] + [t] + row)
    _write(cfg, cfg.output, header, rows)
    return EXIT_OK if ok else EXIT_COMPUTE


# --------------------------------------------------------------------------
# residual experiments

def cmd_residual(cfg: RunConfig) -> int:
    if cfg.domain != "ball":
        raise ConfigError("residual needs the ball domain")
    if cfg.t is not None and not all(a > b for a, b in zip(cfg.t, cfg.t[1:])):
        raise ConfigError("t grid must be strictly decreasing")
    if cfg.x is not None and any(np.linalg.norm(p) == 0 for p in cfg.x):
        raise ConfigError("x grid must exclude the origin")
    b = ball_heat.dirichlet_eigenbasis(cfg.n, cfg.trunc)
    reports = [approx.approx_residual_g1(b, x_grid=cfg.x, t_grid=cfg.t, spec=cfg.spec)]
    reports += list(approx.approx_residual_u(b))
    n = cfg.n
    out = Path(cfg.output)
    header = [f"x{i}" for i in range(n)] + ["t", "residual", "fd_error", "component"]
    for rep in reports:
        rows = [[float(c) for c in p] + [float(t), float(v), float(e), rep.component]
                for p, t, v, e in zip(rep.points, rep.times, rep.values, rep.fd_error)]
        suffix = ".json" if cfg.format == "json" else ".csv"
        _write(cfg, out.with_name(f"{out.stem}_{rep.component}{suffix}"), header, rows)
    verdicts = [[rep.component, rep.grid_name, rep.verdict] for rep in reports]
    _write(cfg, out, ["component", "grid", "verdict"], verdicts)
    return EXIT_OK if all(rep.verdict for rep in reports) else EXIT_COMPUTE


COMMANDS = {"eval": cmd_eval, "identities": cmd_identities, "eigen": cmd_eigen,
            "mc": cmd_mc, "residual": cmd_residual}


def build_parser():
    p = argparse.ArgumentParser(prog="dynakernel", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON file with RunConfig fields")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="KEY=VALUE", help="override one config field (JSON value)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DynakernelError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
